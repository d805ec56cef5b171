"""Fully connected tanh network Phi(x, t; theta) with the horizon as an extra parameter."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

DELTA_FLOOR = 1e-6

_ACTIVATIONS = {"tanh": jnp.tanh}


@dataclass(frozen=True)
class Architecture:
    """Layer layout of the PINN.

    ``input_lo``/``input_hi`` optionally describe the box the inputs live in;
    when given, coordinates are mapped affinely onto [-1, 1] before the first
    layer. The map is fixed, not trained.
    """

    input_dim: int = 2
    hidden_layers: int = 8
    hidden_width: int = 20
    activation: str = "tanh"
    input_lo: tuple[float, ...] | None = None
    input_hi: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_layers < 1 or self.hidden_width < 1:
            raise ValueError("architecture dimensions must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}")
        if (self.input_lo is None) != (self.input_hi is None):
            raise ValueError("input_lo and input_hi must be given together")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim,) + (self.hidden_width,) * self.hidden_layers + (1,)

    @property
    def parameter_count(self) -> int:
        """P(N) + 1: every weight and bias plus the horizon."""
        sizes = self.layer_sizes
        return sum(n_out * n_in + n_out for n_in, n_out in zip(sizes[:-1], sizes[1:])) + 1


class NetworkParams(NamedTuple):
    weights: tuple
    biases: tuple
    horizon: jax.Array


def init_params(arch: Architecture, seed: int, horizon: float = 1.0) -> NetworkParams:
    """Glorot-normal weights (output layer included), zero biases."""
    rng = np.random.default_rng(seed)
    sizes = arch.layer_sizes
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        std = np.sqrt(2.0 / (n_in + n_out))
        weights.append(jnp.asarray(rng.normal(0.0, std, size=(n_out, n_in))))
        biases.append(jnp.zeros(n_out))
    return NetworkParams(tuple(weights), tuple(biases), jnp.asarray(float(horizon)))


def check_layout(params: NetworkParams, arch: Architecture) -> None:
    sizes = arch.layer_sizes
    if len(params.weights) != len(sizes) - 1 or len(params.biases) != len(sizes) - 1:
        raise ValueError(f"expected {len(sizes) - 1} layers, got {len(params.weights)}")
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
            raise ValueError(
                f"layer {l}: weight {w.shape} / bias {b.shape} do not chain as {sizes[l]}->{sizes[l + 1]}"
            )


def realize(params: NetworkParams, point, arch: Architecture | None = None):
    """Phi(point; theta) for a single point of shape (input_dim,).

    The horizon is deliberately not an input of the network.
    """
    z = jnp.asarray(point, dtype=float)
    n_in = params.weights[0].shape[1]
    if z.shape != (n_in,):
        raise ValueError(f"point has shape {z.shape}, network expects ({n_in},)")
    if arch is not None and arch.input_lo is not None:
        lo = jnp.asarray(arch.input_lo)
        hi = jnp.asarray(arch.input_hi)
        z = 2.0 * (z - lo) / (hi - lo) - 1.0
    rho = _ACTIVATIONS["tanh" if arch is None else arch.activation]
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = rho(w @ z + b)
    return (params.weights[-1] @ z + params.biases[-1])[0]


def realize_batch(params: NetworkParams, points, arch: Architecture | None = None):
    return jax.vmap(lambda p: realize(params, p, arch))(jnp.asarray(points, dtype=float))


def dphi_ddelta(params: NetworkParams, point, arch: Architecture | None = None):
    """dPhi/d(delta); structurally zero because delta never reaches the network."""
    return jax.grad(lambda d: realize(params._replace(horizon=d), point, arch))(params.horizon)


def output_bound(params: NetworkParams) -> float:
    """|Phi| <= ||W_L||_1 + |b_L| since |tanh| <= 1."""
    return float(jnp.sum(jnp.abs(params.weights[-1])) + jnp.abs(params.biases[-1][0]))


def project_horizon(params: NetworkParams, floor: float = DELTA_FLOOR) -> NetworkParams:
    return params._replace(horizon=jnp.maximum(params.horizon, floor))


def flatten(params: NetworkParams) -> np.ndarray:
    """Flat vector of all parameters, layer by layer (W row-major, then b), delta last."""
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(np.asarray(w).ravel())
        parts.append(np.asarray(b).ravel())
    parts.append(np.atleast_1d(np.asarray(params.horizon)))
    return np.concatenate(parts)


def unflatten(vector, sizes) -> NetworkParams:
    vector = np.asarray(vector, dtype=float)
    expected = sum(n_out * n_in + n_out for n_in, n_out in zip(sizes[:-1], sizes[1:])) + 1
    if vector.size != expected:
        raise ValueError(f"vector has {vector.size} entries, layout {list(sizes)} needs {expected}")
    weights, biases, k = [], [], 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(jnp.asarray(vector[k : k + n_out * n_in].reshape(n_out, n_in)))
        k += n_out * n_in
        biases.append(jnp.asarray(vector[k : k + n_out]))
        k += n_out
    return NetworkParams(tuple(weights), tuple(biases), jnp.asarray(vector[k]))


def save_checkpoint(params: NetworkParams, path, header_extra: str = "") -> None:
    """Text checkpoint: a ``# dims`` header line with the layer sizes, then one value per line."""
    sizes = [params.weights[0].shape[1]] + [w.shape[0] for w in params.weights]
    header = "dims " + " ".join(str(s) for s in sizes)
    if header_extra:
        header += "\n" + header_extra
    np.savetxt(path, flatten(params), fmt="%.17g", header=header)


def load_checkpoint(path) -> NetworkParams:
    sizes = None
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            fields = line[1:].split()
            if fields and fields[0] == "dims":
                sizes = [int(s) for s in fields[1:]]
    if sizes is None:
        raise ValueError(f"{path}: missing '# dims' header")
    return unflatten(np.loadtxt(path, ndmin=1), sizes)
