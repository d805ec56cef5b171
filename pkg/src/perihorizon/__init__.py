"""Learning the peridynamic horizon with physics-informed neural networks."""

import jax

# Quadrature and gradient checks are asserted at 1e-10..1e-12; float32 cannot get there.
jax.config.update("jax_enable_x64", True)

from perihorizon.kernels import KernelSpec  # noqa: E402
from perihorizon.network import Architecture, NetworkParams, init_params, realize  # noqa: E402
from perihorizon.nonlocal_op import ResidualConfig  # noqa: E402

__all__ = [
    "Architecture",
    "KernelSpec",
    "NetworkParams",
    "ResidualConfig",
    "init_params",
    "realize",
]

__version__ = "0.1.0"
