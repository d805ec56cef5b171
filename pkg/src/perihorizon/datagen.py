"""Synthetic ground truth for the horizon-learning experiments.

1D data come from a method-of-lines solve of the nonlocal wave equation
(hat-function discretization of the interaction integral, Stormer-Verlet in
time). The 2D plate uses its closed-form single-mode series solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from perihorizon.kernels import KernelSpec, evaluate, integration_domain
from perihorizon.quadrature import gauss_legendre

ROLES = ("interior", "initial", "boundary_ghost")


class StabilityError(ValueError):
    """Requested time step exceeds the Verlet stability bound."""


# -- dispersion ------------------------------------------------------------


def _half_support(kernel: KernelSpec, truncation: float | None):
    if kernel.variant == "distributed":
        if truncation is None:
            raise ValueError("distributed kernel is not compactly supported; pass truncation=")
        inner = max(kernel.lam - kernel.delta, 0.0)
        return [inner, max(inner, truncation)]
    r = kernel.effective_radius()
    if truncation is not None:
        r = min(r, truncation)
    return [0.0, r]


def dispersion(kernel: KernelSpec, k: float, nodes: int = 16, truncation: float | None = None):
    """(M(k), omega(k)) with M(k) = integral (1 - cos(k xi)) C(xi) d xi over the support."""
    lo, hi = _half_support(kernel, truncation)
    # one sub-interval per half wavelength keeps the rule accurate for large k
    n_sub = max(1, math.ceil(abs(k) * (hi - lo) / math.pi))
    bp = np.linspace(lo, hi, n_sub + 1)
    rule = gauss_legendre(nodes)
    y, w = rule.mapped(bp[:-1], bp[1:])
    m = 2.0 * float(np.sum(w * (1.0 - np.cos(k * y)) * evaluate(kernel, y)))
    m = max(m, 0.0)
    return m, math.sqrt(m)


# -- 1D forward problem ------------------------------------------------------


def gaussian_pulse(width: float):
    return lambda x: np.exp(-((np.asarray(x) / width) ** 2))


def zero_field(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ForwardProblem1D:
    kernel: KernelSpec
    domain: tuple[float, float]
    final_time: float = 1.0
    u0: Callable = field(default=None, compare=False)
    v0: Callable = field(default=zero_field, compare=False)
    sign_convention: str = "standard"
    periodic: bool = False

    def __post_init__(self):
        lo, hi = self.domain
        if not hi > lo:
            raise ValueError("domain must have hi > lo")
        if self.kernel.variant != "gauss" and hi - lo < 4 * self.kernel.delta:
            raise ValueError("domain width must be at least 4 * delta")
        if self.u0 is None:
            object.__setattr__(self, "u0", gaussian_pulse(self.kernel.delta / 2))

    @classmethod
    def default(cls, kernel: KernelSpec, **kw) -> ForwardProblem1D:
        """Gaussian pulse of width delta/2 at rest on [-4 delta, 4 delta], T = 1."""
        d = kernel.delta
        kw.setdefault("domain", (-4.0 * d, 4.0 * d))
        kw.setdefault("u0", gaussian_pulse(d / 2))
        return cls(kernel, **kw)


def solver_grid(problem: ForwardProblem1D, n: int) -> np.ndarray:
    lo, hi = problem.domain
    if problem.periodic:
        return lo + (hi - lo) * np.arange(n) / n
    return np.linspace(lo, hi, n)


def interaction_matrix(problem: ForwardProblem1D, grid: np.ndarray, nodes: int = 4):
    """Matrix K with (K u)_i ~ integral C(x_i - y) u_h(y) dy for the piecewise-linear interpolant u_h.

    Row sums equal the kernel mass seen by x_i, so ``K u - K.sum(1) * u``
    approximates integral C(x_i - y)(u(y) - u(x_i)) dy.
    """
    kernel = problem.kernel
    n = grid.size
    lo, hi = problem.domain
    h = grid[1] - grid[0]
    rule = gauss_legendre(nodes)
    K = np.zeros((n, n))
    for i, xi in enumerate(grid):
        if problem.periodic:
            if kernel.variant == "distributed":
                raise ValueError("periodic solve needs a compactly supported kernel")
            r = kernel.effective_radius()
            pieces = [(xi - r, xi + r)]
        else:
            pieces = integration_domain(kernel, xi, kernel.delta, (lo, hi))
        for a, b in pieces:
            inner = grid[0] + h * np.arange(math.ceil((a - grid[0]) / h), math.floor((b - grid[0]) / h) + 1)
            kinks = [xi] if kernel.variant in ("vshape", "tent") else []
            bp = np.unique(np.concatenate([[a, b], inner, kinks]))
            bp = bp[(bp >= a) & (bp <= b)]
            if bp.size < 2:
                continue
            y, w = rule.mapped(bp[:-1], bp[1:])
            y, w = y.ravel(), w.ravel()
            c = w * evaluate(kernel, xi - y)
            s = (y - grid[0]) / h
            j = np.floor(s).astype(int)
            if problem.periodic:
                frac = s - j
                np.add.at(K[i], j % n, c * (1.0 - frac))
                np.add.at(K[i], (j + 1) % n, c * frac)
            else:
                j = np.clip(j, 0, n - 2)
                frac = s - j
                np.add.at(K[i], j, c * (1.0 - frac))
                np.add.at(K[i], j + 1, c * frac)
    return K


def stable_dt(K: np.ndarray) -> float:
    """Largest admissible step, 0.5 / sqrt(max kernel mass)."""
    return 0.5 / math.sqrt(max(float(np.max(K.sum(axis=1))), np.finfo(float).tiny))


def _verlet_states(problem: ForwardProblem1D, grid, A, nt: int, dt: float):
    """Yield (u, v) at nt equally spaced output times in [0, T] (Stormer-Verlet)."""
    u = np.asarray(problem.u0(grid), dtype=float).copy()
    v = np.asarray(problem.v0(grid), dtype=float).copy()
    yield u, v
    if nt < 2:
        return
    interval = problem.final_time / (nt - 1)
    substeps = max(1, math.ceil(interval / dt - 1e-12))
    h = interval / substeps
    a = A @ u
    for _ in range(1, nt):
        for _ in range(substeps):
            v += 0.5 * h * a
            u += h * v
            a = A @ u
            v += 0.5 * h * a
        yield u, v


def _setup(problem: ForwardProblem1D, nx: int, refine: int):
    n_fine = nx * refine if problem.periodic else (nx - 1) * refine + 1
    grid = solver_grid(problem, n_fine)
    K = interaction_matrix(problem, grid)
    sign = -1.0 if problem.sign_convention == "paper" else 1.0
    return grid, K, sign * (K - np.diag(K.sum(axis=1)))


def forward_solve_1d(problem: ForwardProblem1D, nx: int, nt: int, refine: int = 1, dt: float | None = None):
    """Displacement on an (nx x nt) grid of space x time.

    Integrates on a grid ``refine`` times finer than the output grid and
    samples it. Returns ``(x, t, u)`` with ``u.shape == (nx, nt)``.
    """
    if nx < 2 or nt < 1 or refine < 1:
        raise ValueError("need nx >= 2, nt >= 1, refine >= 1")
    grid, K, A = _setup(problem, nx, refine)
    dt_max = stable_dt(K)
    if dt is None:
        dt = 0.5 * dt_max
    elif dt > dt_max:
        raise StabilityError(f"dt={dt:g} exceeds the stability bound; need dt <= {dt_max:g}")
    t_out = np.linspace(0.0, problem.final_time, nt) if nt > 1 else np.zeros(1)
    out = np.column_stack([u.copy() for u, _ in _verlet_states(problem, grid, A, nt, dt)])
    return grid[::refine], t_out, out[::refine]


def verlet_energy(problem: ForwardProblem1D, nx: int, nt: int, refine: int = 1):
    """Discrete energy 1/2 |v|^2 - 1/2 u.A_sym.u at the output times (for drift checks)."""
    grid, K, A = _setup(problem, nx, refine)
    A_sym = 0.5 * (A + A.T)
    t = np.linspace(0.0, problem.final_time, nt)
    e = [0.5 * v @ v - 0.5 * u @ A_sym @ u for u, v in _verlet_states(problem, grid, A, nt, 0.5 * stable_dt(K))]
    return t, np.array(e)


# -- 2D stationary plate -----------------------------------------------------


def source_term_2d(x, y, a: float = 1.0, b: float = 1.0, amplitude: float = -0.05):
    """f(x, y) = amplitude * sin(pi x / a) sin(pi y / b)."""
    xp = jnp if isinstance(x, jax.Array) or isinstance(y, jax.Array) else np
    return amplitude * xp.sin(math.pi * x / a) * xp.sin(math.pi * y / b)


def mode_denominator(m_bar: float, n_bar: float, delta: float, nodes: int = 64) -> float:
    """Integral over [0, 2pi] x [0, delta] of 1 - cos(m_bar r cos p) cos(n_bar r sin p)."""
    rule = gauss_legendre(nodes)
    r = 0.5 * delta * (rule.nodes + 1.0)
    wr = 0.5 * delta * rule.weights
    p = math.pi * (rule.nodes + 1.0)
    wp = math.pi * rule.weights
    R, P = np.meshgrid(r, p, indexing="ij")
    vals = 1.0 - np.cos(m_bar * R * np.cos(P)) * np.cos(n_bar * R * np.sin(P))
    return float(wr @ vals @ wp)


def _source_mode(m: int, n: int, a: float, b: float, amplitude: float) -> float:
    # f is exactly the (1, 1) sine mode; orthogonality kills every other coefficient
    return amplitude * a * b / 4.0 if (m, n) == (1, 1) else 0.0


def exact_solution_2d(
    x,
    y,
    delta: float,
    m_max: int = 1,
    n_max: int = 1,
    a: float = 1.0,
    b: float = 1.0,
    c: float = 1.0,
    amplitude: float = -0.05,
    nodes: int = 64,
):
    """Truncated double sine series for the stationary plate."""
    if m_max < 1 or n_max < 1:
        raise ValueError("truncation must be >= 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pref = 4.0 / (a * b) / (c * c) * math.pi * delta**3 / 6.0
    total = np.zeros(np.broadcast(x, y).shape)
    for m in range(1, m_max + 1):
        for n in range(1, n_max + 1):
            coef = _source_mode(m, n, a, b, amplitude)
            if coef == 0.0:
                continue
            mb, nb = math.pi * m / a, math.pi * n / b
            total = total + coef * np.sin(mb * x) * np.sin(nb * y) / mode_denominator(mb, nb, delta, nodes)
    total = pref * total
    return float(total) if total.ndim == 0 else total


@dataclass(frozen=True)
class PlateProblem:
    delta_true: float = 0.1
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    amplitude: float = -0.05
    truncation: int = 1


# -- collocation -------------------------------------------------------------


@dataclass
class CollocationSet:
    """Training points with roles, targets and ghost pairing.

    Ghost rows come in pairs sharing a ``pair`` id; the penalty asks the
    network to be odd across the plate edge, Phi(p) + Phi(p') = 0. Their
    ``target`` is unused (stored as 0).
    """

    coords: np.ndarray
    roles: np.ndarray
    targets: np.ndarray
    pair: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.roles = np.asarray(self.roles, dtype=object)
        self.targets = np.asarray(self.targets, dtype=float)
        self.pair = np.asarray(self.pair, dtype=int)
        n = len(self.coords)
        if not (len(self.roles) == len(self.targets) == len(self.pair) == n):
            raise ValueError("coords, roles, targets and pair must have equal length")
        bad = set(self.roles) - set(ROLES)
        if bad:
            raise ValueError(f"unknown roles {sorted(bad)}")

    def __len__(self):
        return len(self.coords)

    @property
    def dim(self) -> int:
        return int(self.meta.get("dim", 1))

    @property
    def interior_mask(self):
        return self.roles == "interior"

    @property
    def data_mask(self):
        return self.roles != "boundary_ghost"

    def ghost_pairs(self):
        """Index arrays (first, second) of the ghost pairs."""
        ghost = np.flatnonzero(self.pair >= 0)
        order = ghost[np.lexsort((ghost, self.pair[ghost]))]
        first, second = order[0::2], order[1::2]
        if first.size != second.size or np.any(self.pair[first] != self.pair[second]):
            raise ValueError("ghost rows must come in complete pairs")
        return first, second

    def subset(self, mask) -> CollocationSet:
        mask = np.asarray(mask, dtype=bool)
        return CollocationSet(self.coords[mask], self.roles[mask], self.targets[mask], self.pair[mask], dict(self.meta))


def build_collocation_1d(problem: ForwardProblem1D, nx: int = 50, nt: int = 20, refine: int = 8, seed: int = 0):
    """Uniform nx x nt grid over the domain and [0, T]; the t = 0 row is tagged ``initial``."""
    if nx < 1 or nt < 1:
        raise ValueError("counts must be positive")
    if nx == 1:
        lo, hi = problem.domain
        x, t = np.array([0.5 * (lo + hi)]), np.linspace(0.0, problem.final_time, nt)
        u = np.repeat(np.asarray(problem.u0(x), dtype=float)[:, None], nt, axis=1)
    else:
        x, t, u = forward_solve_1d(problem, nx, nt, refine=refine)
    X, T = np.meshgrid(x, t, indexing="ij")
    coords = np.column_stack([X.ravel(), T.ravel()])
    roles = np.where(coords[:, 1] == 0.0, "initial", "interior").astype(object)
    k = problem.kernel
    meta = {
        "dim": 1,
        "kernel": {"type": k.variant, "lambda": k.lam, "mu": k.mu, "delta_true": k.delta},
        "domain": list(problem.domain),
        "final_time": problem.final_time,
        "mesh": [nx, nt],
        "refine": refine,
        "seed": seed,
        "sign_convention": problem.sign_convention,
    }
    return CollocationSet(coords, roles, u.ravel(), np.full(len(coords), -1), meta)


def build_collocation_2d(problem: PlateProblem, n: int = 10, ghost_samples: int = 16, seed: int = 0):
    """n x n interior grid on (0, a) x (0, b) plus odd-reflection ghost pairs along every edge."""
    if n < 1 or ghost_samples < 1:
        raise ValueError("counts must be positive")
    a, b = problem.a, problem.b
    xs = a * np.arange(1, n + 1) / (n + 1)
    ys = b * np.arange(1, n + 1) / (n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    coords = [np.column_stack([X.ravel(), Y.ravel()])]
    targets = [
        np.asarray(
            exact_solution_2d(
                X.ravel(), Y.ravel(), problem.delta_true, problem.truncation, problem.truncation,
                a=a, b=b, c=problem.c, amplitude=problem.amplitude,
            )
        )
    ]
    roles = [np.full(n * n, "interior", dtype=object)]
    pair = [np.full(n * n, -1)]
    xi = np.linspace(0.0, problem.delta_true, ghost_samples)
    pid = 0
    for s in xi:
        for along_x, along_y in zip(xs, ys):
            for p, q in (
                ((-s, along_y), (s, along_y)),
                ((a + s, along_y), (a - s, along_y)),
                ((along_x, -s), (along_x, s)),
                ((along_x, b + s), (along_x, b - s)),
            ):
                coords.append(np.array([p, q]))
                targets.append(np.zeros(2))
                roles.append(np.array(["boundary_ghost"] * 2, dtype=object))
                pair.append(np.array([pid, pid]))
                pid += 1
    meta = {
        "dim": 2,
        "kernel": {"type": "plate", "delta_true": problem.delta_true},
        "plate": [a, b],
        "wave_speed": problem.c,
        "amplitude": problem.amplitude,
        "mesh": [n, n],
        "ghost_samples": ghost_samples,
        "seed": seed,
    }
    return CollocationSet(
        np.vstack(coords), np.concatenate(roles), np.concatenate(targets), np.concatenate(pair), meta
    )


def build_collocation(problem, counts, seed: int = 0) -> CollocationSet:
    """Dispatch on the problem type; ``counts`` is (nx, nt) in 1D or (n, ghost_samples) in 2D."""
    if isinstance(problem, ForwardProblem1D):
        return build_collocation_1d(problem, *counts, seed=seed)
    if isinstance(problem, PlateProblem):
        return build_collocation_2d(problem, *counts, seed=seed)
    raise TypeError(f"unsupported problem descriptor {type(problem).__name__}")
