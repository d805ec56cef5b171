"""Derivatives used by the PINN.

Parameter gradients come from reverse mode (``jax.grad``); second derivatives
of the network output in one input coordinate come from forward-over-forward
mode (two nested ``jax.jvp`` calls, i.e. dual numbers of dual numbers).
Each call traces its own computation, so no tape is shared between
evaluations and gradients always accumulate from zero.
"""

from __future__ import annotations

import traceback
from functools import partial

import jax
import jax.numpy as jnp
import numpy as np
from jax.flatten_util import ravel_pytree


class UnsupportedPrimitiveError(TypeError):
    """The differentiated function used an operation JAX cannot trace."""


_TRACE_ERRORS = (
    jax.errors.TracerArrayConversionError,
    jax.errors.ConcretizationTypeError,
    jax.errors.TracerBoolConversionError,
    jax.errors.TracerIntegerConversionError,
)


def _offending_line(exc: BaseException) -> str:
    frames = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(frames):
        path = frame.filename.replace("\\", "/")
        if "/jax/" in path or "/jaxlib/" in path or frame.filename == __file__:
            continue
        return f"{frame.filename}:{frame.lineno}: {frame.line}"
    return "<unknown location>"


def _guard(fn, *args):
    try:
        return fn(*args)
    except _TRACE_ERRORS as exc:
        raise UnsupportedPrimitiveError(
            f"non-differentiable primitive in traced function at {_offending_line(exc)} "
            f"({type(exc).__name__})"
        ) from exc


def grad(scalar_function, params):
    """Reverse-mode gradient of ``scalar_function`` at ``params`` (same pytree shape)."""
    return _guard(jax.grad(scalar_function), params)


def value_and_grad(scalar_function, params):
    return _guard(jax.value_and_grad(scalar_function), params)


def second_derivative_in(direction: int, network_eval, input_point):
    """d^2 f / d z_k^2 at ``input_point``, where k = ``direction``.

    ``network_eval`` maps a point of shape (d,) to a scalar.
    """
    point = jnp.asarray(input_point, dtype=float)
    e = jnp.zeros_like(point).at[direction].set(1.0)

    def first(p):
        return jax.jvp(network_eval, (p,), (e,))[1]

    return _guard(lambda p: jax.jvp(first, (p,), (e,))[1], point)


def _relative_errors(exact, approx, floor_fraction):
    exact = np.asarray(exact, dtype=float)
    approx = np.asarray(approx, dtype=float)
    scale = max(float(np.max(np.abs(exact))), float(np.max(np.abs(approx))), np.finfo(float).tiny)
    denom = np.maximum(np.maximum(np.abs(exact), np.abs(approx)), floor_fraction * scale)
    return np.abs(exact - approx) / denom


@partial(jax.jit, static_argnums=0)
def _compiled_grad(scalar_function, params):
    return jax.grad(scalar_function)(params)


@partial(jax.jit, static_argnums=0)
def _perturbed_values(scalar_function, params, offsets):
    # compiled once per function object, so repeated checks reuse the executable
    flat, unravel = ravel_pytree(params)
    return jax.vmap(lambda d: scalar_function(unravel(flat + d)))(offsets)


def central_differences(scalar_function, params, h: float, components=None, chunk: int = 512):
    """Central-difference estimates of the gradient components listed in ``components``."""
    flat, _ = ravel_pytree(params)
    n = flat.size
    idx = np.arange(n) if components is None else np.asarray(components, dtype=int)
    out = np.empty(idx.size)
    for start in range(0, idx.size, chunk):
        sel = idx[start : start + chunk]
        basis = np.zeros((sel.size, n))
        basis[np.arange(sel.size), sel] = h
        plus = np.asarray(_perturbed_values(scalar_function, params, jnp.asarray(basis)))
        minus = np.asarray(_perturbed_values(scalar_function, params, jnp.asarray(-basis)))
        out[start : start + sel.size] = (plus - minus) / (2.0 * h)
    return out


def grad_check(scalar_function, params, h: float = 1e-5, components=None, floor_fraction: float = 1e-3):
    """Worst relative error between reverse-mode gradient and central differences.

    Components are compared as |g - fd| / max(|g|, |fd|, floor_fraction * max|g|);
    the floor keeps components many orders below the gradient's scale from
    being judged against their own rounding noise.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    g, _ = ravel_pytree(_guard(_compiled_grad, scalar_function, params))
    g = np.asarray(g)
    idx = np.arange(g.size) if components is None else np.asarray(components, dtype=int)
    fd = central_differences(scalar_function, params, h, idx)
    return float(np.max(_relative_errors(g[idx], fd, floor_fraction)))


def flat_gradient(scalar_function, params) -> np.ndarray:
    g, _ = ravel_pytree(grad(scalar_function, params))
    return np.asarray(g)
