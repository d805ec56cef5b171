"""Probes of the training dynamics: monotone convergence of the horizon, the
sign indicator, gradient competition, the PL ratio, the tangent-kernel
spectrum and stagnation of loss components."""

from __future__ import annotations

import math
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np
from jax.flatten_util import ravel_pytree

from perihorizon.training import (
    PinnModel,
    TrainTrace,
    _as_arrays,
    _data_sq,
    _residual_sq,
    _tree_dot,
    total_loss,
)

MONOTONE_TOL = 1e-10
TANGENT_KERNEL_LIMIT = 200


@dataclass(frozen=True)
class ConvergenceVerdict:
    converged: bool
    monotone_after: int
    direction: str
    final_gap: float

    @property
    def monotone(self) -> bool:
        return self.direction != "none"


def _direction(steps: np.ndarray, tol: float) -> str:
    if steps.size == 0:
        return "none"
    if np.all(steps <= tol) and np.any(steps < -tol):
        return "decreasing"
    if np.all(steps >= -tol) and np.any(steps > tol):
        return "increasing"
    return "none"


def delta_monotonicity(
    trace: TrainTrace,
    transient: int | None = None,
    delta_true: float | None = None,
    gap_tol: float | None = None,
    tol: float = MONOTONE_TOL,
) -> ConvergenceVerdict:
    """Classify the horizon trajectory after ``transient`` epochs.

    ``transient`` defaults to 10% of the trace. ``monotone_after`` is the
    earliest epoch from which the trajectory stays monotone in the detected
    direction (the trace length when it never is). ``converged`` needs a
    monotone tail and, when ``delta_true`` and ``gap_tol`` are given,
    |delta_final - delta_true| <= gap_tol.
    """
    delta = trace.delta
    n = delta.size
    if transient is None:
        transient = n // 10
    if n <= transient:
        raise ValueError(f"trace has {n} epochs, transient is {transient}")
    steps = np.diff(delta[transient:])
    direction = _direction(steps, tol)
    all_steps = np.diff(delta)
    if direction == "none":
        monotone_after = n
    else:
        bad = all_steps > tol if direction == "decreasing" else all_steps < -tol
        idx = np.flatnonzero(bad)
        monotone_after = int(idx[-1] + 1) if idx.size else 0
    gap = math.nan if delta_true is None else abs(float(delta[-1]) - delta_true)
    converged = direction != "none"
    if gap_tol is not None:
        converged = converged and gap <= gap_tol
    return ConvergenceVerdict(converged, monotone_after, direction, gap)


def sign_indicator(params, data, model: PinnModel) -> float:
    """Mean over interior points of Phi_i * D(Phi_i)."""
    arrays = _as_arrays(data)
    _, (res, phi) = _residual_sq(params, arrays, model)
    if res.shape[0] == 0:
        return 0.0
    return float(jnp.mean(phi * res))


def sign_step_agreement(trace: TrainTrace, transient: int | None = None) -> float:
    """Fraction of post-transient epochs whose indicator sign matches the sign of the next delta step."""
    delta = trace.delta
    ind = trace.column("sign_indicator")
    if transient is None:
        transient = delta.size // 10
    steps = np.diff(delta)[transient:]
    ind = ind[transient : transient + steps.size]
    if steps.size == 0:
        raise ValueError("no post-transient steps to compare")
    return float(np.mean(np.sign(ind) == np.sign(steps)))


def grad_competition(params, data, model: PinnModel):
    """<grad R_s, grad R_d> and its ratio to L = R_s + R_d (None when L = 0)."""
    arrays = _as_arrays(data)
    s, g_s = jax.value_and_grad(_data_sq)(params, arrays, model)
    (d, _), g_d = jax.value_and_grad(_residual_sq, has_aux=True)(params, arrays, model)
    inner = 0.25 * float(_tree_dot(g_s, g_d))
    loss = 0.5 * float(s + d)
    return inner, (inner / loss if loss > 0 else None)


def pl_ratio_of(loss_fn, params):
    """||grad f||^2 / f at ``params``; None where f = 0."""
    value, g = jax.value_and_grad(loss_fn)(params)
    value = float(value)
    if value <= 0:
        return None
    flat, _ = ravel_pytree(g)
    return float(jnp.vdot(flat, flat)) / value


def pl_ratio(params, data, model: PinnModel, variant: str = "mean_squared"):
    arrays = _as_arrays(data)
    return pl_ratio_of(lambda p: total_loss(p, arrays, model, variant), params)


def tangent_kernel(params, points, model: PinnModel, limit: int = TANGENT_KERNEL_LIMIT) -> np.ndarray:
    """Gram matrix J J^T of the parameter Jacobian of Phi at ``points``."""
    points = jnp.asarray(points, dtype=float)
    if points.shape[0] > limit:
        raise ValueError(f"tangent kernel limited to {limit} points, got {points.shape[0]}")

    def outputs(flat, unravel):
        return model.phi(unravel(flat), points)

    flat, unravel = ravel_pytree(params)
    jac = np.asarray(jax.jacrev(outputs)(flat, unravel))
    return jac @ jac.T


def tangent_kernel_min_eig(params, data, model: PinnModel, limit: int = TANGENT_KERNEL_LIMIT) -> float:
    """Smallest eigenvalue of the tangent kernel over the data points."""
    points = _as_arrays(data).data_pts if not hasattr(data, "shape") else data
    gram = tangent_kernel(params, points, model, limit)
    return float(np.linalg.eigvalsh(0.5 * (gram + gram.T))[0])


def stagnation_detect(trace: TrainTrace, window: int, threshold: float = 0.01, columns=("R_s", "R_d")) -> dict:
    """Flag loss components whose best value in the trailing window improves on
    the best value before it by less than ``threshold`` (relative)."""
    n = len(trace)
    if not 0 < window < n:
        raise ValueError(f"window must lie in (0, {n})")
    flags = {}
    for name in columns:
        col = trace.column(name)
        before = float(np.nanmin(col[: n - window]))
        recent = float(np.nanmin(col[n - window :]))
        if before <= 0:
            flags[name] = False
            continue
        flags[name] = (before - recent) / before < threshold
    return flags


def hessian_top_eig(loss_fn, params, iters: int = 30, seed: int = 0) -> float:
    """Power-iteration estimate of the largest-magnitude Hessian eigenvalue of ``loss_fn``."""
    flat, unravel = ravel_pytree(params)
    grad_flat = jax.grad(lambda v: loss_fn(unravel(v)))
    hvp = jax.jit(lambda v: jax.jvp(grad_flat, (flat,), (v,))[1])
    v = jnp.asarray(np.random.default_rng(seed).normal(size=flat.size))
    v = v / jnp.linalg.norm(v)
    eig = 0.0
    for _ in range(iters):
        w = hvp(v)
        eig = float(jnp.vdot(v, w))
        norm = float(jnp.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
    return eig


def smoothness_estimates(params, data, model: PinnModel, iters: int = 30) -> dict:
    """Power-iteration estimates of the curvature of R_s and R_d separately (reporting only)."""
    arrays = _as_arrays(data)
    return {
        "beta_s": hessian_top_eig(lambda p: 0.5 * _data_sq(p, arrays, model), params, iters),
        "beta_d": hessian_top_eig(lambda p: 0.5 * _residual_sq(p, arrays, model)[0], params, iters),
    }


__all__ = [
    "ConvergenceVerdict",
    "delta_monotonicity",
    "grad_competition",
    "hessian_top_eig",
    "pl_ratio",
    "pl_ratio_of",
    "sign_indicator",
    "sign_step_agreement",
    "smoothness_estimates",
    "stagnation_detect",
    "tangent_kernel",
    "tangent_kernel_min_eig",
]
