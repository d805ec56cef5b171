"""Differential residual of the peridynamic equation applied to a trial field.

A trial field ``u`` is any JAX-traceable callable taking a point of shape (2,)
(``(x, t)`` in 1D, ``(x, y)`` for the stationary plate) and returning a scalar;
a trained network is bound into one with :func:`network_field`.

The nonlocal integral is evaluated with Gauss-Legendre rules on pieces where
the kernel is smooth. Nodes are placed by an affine map of [-1, 1] onto each
piece, and the piece end points depend on the horizon, so autodiff
differentiates through the bounds as well as through the integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import jax
import jax.numpy as jnp

from perihorizon import datagen
from perihorizon.autodiff import second_derivative_in
from perihorizon.kernels import KernelSpec, eval_smooth_in_delta, evaluate, support_pieces
from perihorizon.network import Architecture, NetworkParams, realize
from perihorizon.quadrature import gauss_legendre

SIGN_CONVENTIONS = ("standard", "paper")


@dataclass(frozen=True)
class ResidualConfig:
    """Discretization and model switches for the residual.

    sign_convention ``standard`` integrates C (u(y) - u(x)), the stable
    wave-like operator; ``paper`` uses C (u(x) - u(y)) literally.
    """

    sign_convention: str = "standard"
    quad_nodes_1d: int = 16
    quad_nodes_radial: int = 8
    quad_nodes_angular: int = 16
    wave_speed: float = 1.0
    spatial_domain: tuple[float, float] | None = None
    plate: tuple[float, float] = (1.0, 1.0)
    source_amplitude: float = -0.05

    def __post_init__(self):
        if self.sign_convention not in SIGN_CONVENTIONS:
            raise ValueError(f"sign_convention must be one of {SIGN_CONVENTIONS}")
        if min(self.quad_nodes_1d, self.quad_nodes_radial, self.quad_nodes_angular) < 2:
            raise ValueError("quadrature node counts must be >= 2")

    @property
    def sign(self) -> float:
        return 1.0 if self.sign_convention == "paper" else -1.0


def network_field(params: NetworkParams, arch: Architecture | None = None):
    return lambda p: realize(params, p, arch)


def _kernel_at(kernel: KernelSpec, xi, delta):
    if kernel.has_horizon:
        return eval_smooth_in_delta(kernel, xi, delta)
    return evaluate(kernel, xi)


def interaction_integral_1d(u, delta, x, t, kernel: KernelSpec, cfg: ResidualConfig):
    """Integral of C(x - y) (u(x, t) - u(y, t)) dy over the clipped kernel support."""
    rule = gauss_legendre(cfg.quad_nodes_1d)
    nodes = jnp.asarray(rule.nodes)
    weights = jnp.asarray(rule.weights)
    u_x = u(jnp.stack([x, t]))
    total = 0.0
    for a, b in support_pieces(kernel, x, delta, cfg.spatial_domain):
        half = 0.5 * (b - a)
        y = a + half * (nodes + 1.0)
        u_y = jax.vmap(lambda yy: u(jnp.stack([yy, t])))(y)
        total = total + half * jnp.sum(weights * _kernel_at(kernel, x - y, delta) * (u_x - u_y))
    return total


def residual_1d(u, delta, x, t, kernel: KernelSpec, cfg: ResidualConfig):
    """u_tt(x, t) - s * integral C(x - y)(u(x, t) - u(y, t)) dy, with s = +1 (paper) or -1 (standard)."""
    x = jnp.asarray(x, dtype=float)
    t = jnp.asarray(t, dtype=float)
    u_tt = second_derivative_in(1, u, jnp.stack([x, t]))
    return u_tt - cfg.sign * interaction_integral_1d(u, delta, x, t, kernel, cfg)


def residual_delta_derivative(u, delta, x, t, kernel: KernelSpec, cfg: ResidualConfig):
    """d(residual_1d)/d(delta) through the horizon-dependent bounds and kernel."""
    return jax.grad(lambda d: residual_1d(u, d, x, t, kernel, cfg))(jnp.asarray(delta, dtype=float))


def polar_integral_2d(u, delta, x, y, cfg: ResidualConfig):
    """Integral over the disc of radius delta of (u(x + r cos p, y + r sin p) - u(x, y)) dr dp.

    The 1/r of the bond force cancels against the polar Jacobian, so the
    integrand is regular at r = 0.
    """
    radial = gauss_legendre(cfg.quad_nodes_radial)
    angular = gauss_legendre(cfg.quad_nodes_angular)
    r = 0.5 * delta * (jnp.asarray(radial.nodes) + 1.0)
    w_r = 0.5 * delta * jnp.asarray(radial.weights)
    phi = math.pi * (jnp.asarray(angular.nodes) + 1.0)
    w_phi = math.pi * jnp.asarray(angular.weights)
    rr = r[:, None]
    px = (x + rr * jnp.cos(phi)[None, :]).ravel()
    py = (y + rr * jnp.sin(phi)[None, :]).ravel()
    u_c = u(jnp.stack([x, y]))
    u_n = jax.vmap(lambda a, b: u(jnp.stack([a, b])))(px, py)
    w = (w_r[:, None] * w_phi[None, :]).ravel()
    return jnp.sum(w * (u_n - u_c))


def residual_2d(u, delta, x, y, cfg: ResidualConfig):
    """-(6 c^2 / (pi delta^3)) * polar integral - f(x, y); zero when the stationary equation holds."""
    x = jnp.asarray(x, dtype=float)
    y = jnp.asarray(y, dtype=float)
    c = cfg.wave_speed
    a, b = cfg.plate
    scale = 6.0 * c * c / (math.pi * delta**3)
    f = datagen.source_term_2d(x, y, a=a, b=b, amplitude=cfg.source_amplitude)
    return -scale * polar_integral_2d(u, delta, x, y, cfg) - f


def batch_residual_1d(u, delta, points, kernel: KernelSpec, cfg: ResidualConfig):
    return jax.vmap(lambda p: residual_1d(u, delta, p[0], p[1], kernel, cfg))(points)


def batch_residual_2d(u, delta, points, cfg: ResidualConfig):
    return jax.vmap(lambda p: residual_2d(u, delta, p[0], p[1], cfg))(points)
