"""Losses, optimizers, learning-rate schedules and the training loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

from perihorizon.datagen import CollocationSet
from perihorizon.kernels import KernelSpec
from perihorizon.network import (
    DELTA_FLOOR,
    Architecture,
    NetworkParams,
    init_params,
    project_horizon,
    realize,
)
from perihorizon.nonlocal_op import ResidualConfig, batch_residual_1d, batch_residual_2d

log = logging.getLogger(__name__)

LOSS_VARIANTS = ("mean_squared", "euclidean_norm")
TRACE_COLUMNS = ("epoch", "delta", "lr", "R_s", "R_d", "loss", "dL_ddelta", "sign_indicator", "grad_competition")


# -- model context -----------------------------------------------------------


@dataclass(frozen=True)
class PinnModel:
    """Everything static about a problem: network layout, kernel and residual settings.

    ``kernel`` is None for the 2D plate, whose operator has a fixed
    constant micromodulus.
    """

    arch: Architecture
    residual: ResidualConfig
    kernel: KernelSpec | None = None
    dim: int = 1

    def field(self, params: NetworkParams):
        arch = self.arch
        return lambda p: realize(params, p, arch)

    def phi(self, params: NetworkParams, points):
        return jax.vmap(self.field(params))(points)

    def residuals(self, params: NetworkParams, points):
        u = self.field(params)
        if self.dim == 1:
            return batch_residual_1d(u, params.horizon, points, self.kernel, self.residual)
        return batch_residual_2d(u, params.horizon, points, self.residual)


class TrainingArrays(NamedTuple):
    """Device arrays derived from a CollocationSet.

    The ``sample_*`` arrays enumerate the per-sample losses whose sum is the
    full loss: one per data point (with its residual if interior) and one
    per ghost pair.
    """

    data_pts: jax.Array
    data_targets: jax.Array
    res_pts: jax.Array
    ghost_a: jax.Array
    ghost_b: jax.Array
    sample_p: jax.Array
    sample_q: jax.Array
    sample_target: jax.Array
    sample_has_data: jax.Array
    sample_has_res: jax.Array
    sample_is_ghost: jax.Array

    @classmethod
    def from_collocation(cls, data: CollocationSet) -> TrainingArrays:
        dm = data.data_mask
        im = data.interior_mask
        first, second = data.ghost_pairs()
        data_pts = data.coords[dm]
        n_data, n_ghost = int(dm.sum()), first.size
        sample_p = np.vstack([data_pts, data.coords[first]]) if n_ghost else data_pts
        sample_q = np.vstack([data_pts, data.coords[second]]) if n_ghost else data_pts
        return cls(
            data_pts=jnp.asarray(data_pts),
            data_targets=jnp.asarray(data.targets[dm]),
            res_pts=jnp.asarray(data.coords[im]),
            ghost_a=jnp.asarray(data.coords[first].reshape(-1, 2)),
            ghost_b=jnp.asarray(data.coords[second].reshape(-1, 2)),
            sample_p=jnp.asarray(sample_p),
            sample_q=jnp.asarray(sample_q),
            sample_target=jnp.asarray(np.concatenate([data.targets[dm], np.zeros(n_ghost)])),
            sample_has_data=jnp.asarray(np.concatenate([np.ones(n_data), np.zeros(n_ghost)])),
            sample_has_res=jnp.asarray(np.concatenate([im[dm].astype(float), np.zeros(n_ghost)])),
            sample_is_ghost=jnp.asarray(np.concatenate([np.zeros(n_data), np.ones(n_ghost)])),
        )

    @property
    def n_samples(self) -> int:
        return int(self.sample_p.shape[0])


def _as_arrays(data) -> TrainingArrays:
    return data if isinstance(data, TrainingArrays) else TrainingArrays.from_collocation(data)


# -- losses ------------------------------------------------------------------


def _data_sq(params, arrays: TrainingArrays, model: PinnModel):
    total = jnp.sum((model.phi(params, arrays.data_pts) - arrays.data_targets) ** 2)
    if arrays.ghost_a.shape[0]:
        total = total + jnp.sum((model.phi(params, arrays.ghost_a) + model.phi(params, arrays.ghost_b)) ** 2)
    return total


def _residual_sq(params, arrays: TrainingArrays, model: PinnModel):
    if arrays.res_pts.shape[0] == 0:
        return jnp.asarray(0.0), (jnp.zeros(0), jnp.zeros(0))
    d = model.residuals(params, arrays.res_pts)
    phi = model.phi(params, arrays.res_pts)
    return jnp.sum(d * d), (d, phi)


def _safe_sqrt(s):
    # d sqrt(s) is defined as 0 at s == 0
    pos = s > 0
    return jnp.where(pos, jnp.sqrt(jnp.where(pos, s, 1.0)), 0.0)


def empirical_risk(params, data, model: PinnModel):
    """R_s: half the sum of squared data mismatches (ghost penalties included)."""
    return 0.5 * _data_sq(params, _as_arrays(data), model)


def residual_loss(params, data, model: PinnModel):
    """R_d: half the sum of squared residuals over the interior points."""
    return 0.5 * _residual_sq(params, _as_arrays(data), model)[0]


def total_loss(params, data, model: PinnModel, variant: str = "mean_squared"):
    """R_s + R_d, or sqrt(sum data^2) + sqrt(sum residual^2) for ``euclidean_norm``."""
    arrays = _as_arrays(data)
    s = _data_sq(params, arrays, model)
    d = _residual_sq(params, arrays, model)[0]
    if variant == "mean_squared":
        return 0.5 * (s + d)
    if variant == "euclidean_norm":
        return _safe_sqrt(s) + _safe_sqrt(d)
    raise ValueError(f"unknown loss variant {variant!r}")


def combine_from_sums(s, d, variant: str):
    if variant == "mean_squared":
        return 0.5 * (s + d)
    if variant == "euclidean_norm":
        return math.sqrt(s) + math.sqrt(d)
    raise ValueError(f"unknown loss variant {variant!r}")


def _tree_dot(a, b):
    return sum(jnp.vdot(x, y) for x, y in zip(jax.tree_util.tree_leaves(a), jax.tree_util.tree_leaves(b)))


def _scale(tree, c):
    return jax.tree_util.tree_map(lambda x: c * x, tree)


def _add(a, b):
    return jax.tree_util.tree_map(jnp.add, a, b)


@partial(jax.jit, static_argnames=("model", "variant"))
def loss_and_gradients(params, arrays: TrainingArrays, model: PinnModel, variant: str = "mean_squared"):
    """One pass producing the loss, its gradient and the per-epoch diagnostics."""
    s, g_s = jax.value_and_grad(_data_sq)(params, arrays, model)
    (d, (res, phi)), g_d = jax.value_and_grad(_residual_sq, has_aux=True)(params, arrays, model)
    grad_rs, grad_rd = _scale(g_s, 0.5), _scale(g_d, 0.5)
    if variant == "mean_squared":
        loss = 0.5 * (s + d)
        g = _add(grad_rs, grad_rd)
    else:
        loss = _safe_sqrt(s) + _safe_sqrt(d)
        cs = jnp.where(s > 0, 1.0 / (2.0 * _safe_sqrt(s) + (s <= 0)), 0.0)
        cd = jnp.where(d > 0, 1.0 / (2.0 * _safe_sqrt(d) + (d <= 0)), 0.0)
        g = _add(_scale(g_s, cs), _scale(g_d, cd))
    rs, rd = 0.5 * s, 0.5 * d
    inner = _tree_dot(grad_rs, grad_rd)
    l_ms = rs + rd
    stats = {
        "R_s": rs,
        "R_d": rd,
        "loss": loss,
        "dL_ddelta": g.horizon,
        "sign_indicator": jnp.mean(phi * res) if res.shape[0] else jnp.asarray(0.0),
        "grad_competition": jnp.where(l_ms > 0, inner / jnp.where(l_ms > 0, l_ms, 1.0), jnp.nan),
        "grad_inner": inner,
    }
    return g, stats


# -- optimizers --------------------------------------------------------------


class AdamState(NamedTuple):
    m: NetworkParams
    v: NetworkParams
    count: jax.Array


@dataclass(frozen=True)
class AdamHyper:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: NetworkParams) -> AdamState:
    zeros = jax.tree_util.tree_map(jnp.zeros_like, params)
    return AdamState(zeros, zeros, jnp.asarray(0, dtype=jnp.int64))


def adam_step(state: AdamState, params: NetworkParams, gradient, lr, hyper: AdamHyper = AdamHyper()):
    """Bias-corrected Adam update followed by projection of the horizon onto delta >= 1e-6."""
    b1, b2, eps = hyper.beta1, hyper.beta2, hyper.eps
    count = state.count + 1
    m = jax.tree_util.tree_map(lambda m_, g: b1 * m_ + (1 - b1) * g, state.m, gradient)
    v = jax.tree_util.tree_map(lambda v_, g: b2 * v_ + (1 - b2) * g * g, state.v, gradient)
    c1 = 1 - b1 ** count.astype(float)
    c2 = 1 - b2 ** count.astype(float)
    new = jax.tree_util.tree_map(lambda p, m_, v_: p - lr * (m_ / c1) / (jnp.sqrt(v_ / c2) + eps), params, m, v)
    return AdamState(m, v, count), project_horizon(new)


def _sample_loss(params, arrays: TrainingArrays, model: PinnModel, i):
    p = arrays.sample_p[i]
    q = arrays.sample_q[i]
    u = model.field(params)
    phi_p = u(p)
    fit = arrays.sample_has_data[i] * (phi_p - arrays.sample_target[i]) ** 2
    ghost = arrays.sample_is_ghost[i] * (phi_p + u(q)) ** 2
    res = model.residuals(params, p[None, :])[0]
    return 0.5 * (fit + ghost + arrays.sample_has_res[i] * res * res)


def sgd_step(params: NetworkParams, data, model: PinnModel, lr, sample_index):
    """theta <- theta - (lr/2) (grad |Phi_i - u_i|^2 + grad |D(Phi_i)|^2), then project delta."""
    arrays = _as_arrays(data)
    g = jax.grad(_sample_loss)(params, arrays, model, sample_index)
    return project_horizon(jax.tree_util.tree_map(lambda p, g_: p - lr * g_, params, g))


@partial(jax.jit, static_argnames=("model",))
def _sgd_sweep(params, arrays: TrainingArrays, model: PinnModel, lr, indices):
    def body(p, i):
        return sgd_step(p, arrays, model, lr, i), None

    params, _ = jax.lax.scan(body, params, indices)
    return params


@partial(jax.jit, static_argnames=("model", "variant", "hyper"))
def _adam_epoch(params, state, arrays, lr, model, variant, hyper):
    g, stats = loss_and_gradients(params, arrays, model, variant)
    state, new_params = adam_step(state, params, g, lr, hyper)
    return new_params, state, stats


# -- schedules ---------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    kind: str = "constant"
    lr: float = 1e-2
    lr_end: float = 1e-4
    cycle: int = 100
    degree: float = 3.0
    decay_steps: int = 1000
    warmup: int = 0

    def __post_init__(self):
        if self.kind not in ("constant", "cyclic_polynomial", "cosine"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.lr <= 0 or self.lr_end <= 0:
            raise ValueError("learning rates must be positive")
        if self.cycle < 1 or self.decay_steps < 1:
            raise ValueError("cycle and decay_steps must be >= 1")


def lr_at(schedule: Schedule, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if schedule.kind == "constant":
        return schedule.lr
    if schedule.kind == "cyclic_polynomial":
        frac = (epoch % schedule.cycle) / schedule.cycle
        return schedule.lr_end + (schedule.lr - schedule.lr_end) * (1.0 - frac) ** schedule.degree
    if epoch < schedule.warmup:
        return schedule.lr * (epoch + 1) / schedule.warmup
    n = min(epoch - schedule.warmup, schedule.decay_steps)
    return schedule.lr * 0.5 * (1.0 + math.cos(math.pi * n / schedule.decay_steps))


# -- trace and loop ----------------------------------------------------------


@dataclass
class TrainTrace:
    rows: list = field(default_factory=list)

    def append(self, **row):
        if self.rows and row["epoch"] <= self.rows[-1]["epoch"]:
            raise ValueError("trace epochs must increase strictly")
        self.rows.append({k: float(row.get(k, math.nan)) if k != "epoch" else int(row[k]) for k in TRACE_COLUMNS})

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def delta(self) -> np.ndarray:
        return self.column("delta")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (r[k] if k == "epoch" else repr(r[k])) for k in TRACE_COLUMNS})

    @classmethod
    def from_csv(cls, path) -> TrainTrace:
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in ("epoch", "delta") if c not in (reader.fieldnames or [])]
            if missing:
                raise ValueError(f"{path}: trace header lacks columns {missing}")
            for lineno, raw in enumerate(reader, start=2):
                try:
                    row = {k: (int(raw[k]) if k == "epoch" else float(raw[k] or "nan")) for k in TRACE_COLUMNS if k in raw}
                    trace.append(**row)
                except (TypeError, ValueError) as exc:
                    raise ValueError(f"{path}: malformed trace row at line {lineno}: {exc}") from exc
        return trace


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    optimizer: str = "adam"
    loss_variant: str = "mean_squared"
    schedule: Schedule = Schedule()
    seed: int = 0
    delta_init: float = 1.0
    adam: AdamHyper = AdamHyper()

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ValueError(f"unknown loss variant {self.loss_variant!r}")
        if self.delta_init <= 0:
            raise ValueError("delta_init must be positive")


class TrainingAborted(RuntimeError):
    """The loss became non-finite; carries the partial trace and last finite parameters."""

    def __init__(self, message, trace: TrainTrace, params: NetworkParams):
        super().__init__(message)
        self.trace = trace
        self.params = params


@dataclass
class TrainResult:
    trace: TrainTrace
    params: NetworkParams
    initial: NetworkParams


def seed_streams(root: int):
    """Independent seeds for (init, data, sampling) derived from one root seed."""
    children = np.random.SeedSequence(root).spawn(3)
    return tuple(int(c.generate_state(1)[0]) for c in children)


def train(config: TrainConfig, data, model: PinnModel, params: NetworkParams | None = None, callback=None) -> TrainResult:
    """Run ``config.epochs`` epochs and record one trace row per epoch.

    Each row holds the state *before* that epoch's update. An Adam epoch is
    one full-batch step; an SGD epoch is N single-sample steps with indices
    drawn uniformly with replacement.
    """
    arrays = _as_arrays(data)
    init_seed, _, sample_seed = seed_streams(config.seed)
    if params is None:
        params = init_params(model.arch, init_seed, horizon=config.delta_init)
    params = project_horizon(params)
    initial = params
    state = adam_init(params)
    rng = np.random.default_rng(sample_seed)
    trace = TrainTrace()
    for epoch in range(config.epochs):
        lr = lr_at(config.schedule, epoch)
        if config.optimizer == "adam":
            new_params, new_state, stats = _adam_epoch(
                params, state, arrays, jnp.asarray(lr), model, config.loss_variant, config.adam
            )
        else:
            _, stats = loss_and_gradients(params, arrays, model, config.loss_variant)
            idx = jnp.asarray(rng.integers(0, arrays.n_samples, size=arrays.n_samples))
            new_params, new_state = _sgd_sweep(params, arrays, model, jnp.asarray(lr), idx), state
        stats = {k: float(v) for k, v in stats.items()}
        if not math.isfinite(stats["loss"]):
            raise TrainingAborted(f"non-finite loss at epoch {epoch}", trace, params)
        trace.append(epoch=epoch, delta=float(params.horizon), lr=lr, **stats)
        if callback is not None:
            callback(epoch, trace.rows[-1])
        params, state = new_params, new_state
    return TrainResult(trace, params, initial)


__all__ = [
    "AdamHyper",
    "AdamState",
    "DELTA_FLOOR",
    "PinnModel",
    "Schedule",
    "TrainConfig",
    "TrainResult",
    "TrainTrace",
    "TrainingAborted",
    "TrainingArrays",
    "adam_init",
    "adam_step",
    "empirical_risk",
    "loss_and_gradients",
    "lr_at",
    "residual_loss",
    "sgd_step",
    "total_loss",
    "train",
]
