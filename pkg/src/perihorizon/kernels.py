"""Micromodulus functions C(xi) and their supports.

Four families are available: Gauss, V-shaped, distributed and tent. All of
them are even and nonnegative. The compact ones vanish for |xi| > delta; the
distributed kernel instead vanishes *inside* |xi| < lambda - delta.

Every function here works on plain floats, numpy arrays and JAX arrays or
tracers, so the same code serves the forward solver and the PINN residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

VARIANTS = ("gauss", "vshape", "distributed", "tent")

# exp(-mu * xi^2) < 1e-15 beyond this many standard widths
GAUSS_CUTOFF = 6.0


@dataclass(frozen=True)
class KernelSpec:
    """One micromodulus family with its shape constants.

    ``delta`` is the horizon the kernel was built with (the true value when the
    spec describes the ground-truth material). The residual operator overrides
    it with the trainable horizon through :func:`eval_smooth_in_delta`.
    """

    variant: str
    lam: float = 1.0
    mu: float = 1.0
    delta: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "gauss":
            if self.lam <= 0 or self.mu <= 0:
                raise ValueError("Gauss kernel needs lambda > 0 and mu > 0")
            return
        if self.delta is None or self.delta <= 0:
            raise ValueError(f"{self.variant} kernel needs a positive delta")
        if self.variant in ("vshape", "distributed") and self.lam <= 0:
            raise ValueError(f"{self.variant} kernel needs lambda > 0")
        if self.variant == "distributed" and self.lam <= self.delta:
            raise ValueError(
                f"distributed kernel needs lambda > delta (got lambda={self.lam}, delta={self.delta})"
            )

    @classmethod
    def gauss(cls, lam: float, mu: float) -> KernelSpec:
        return cls("gauss", lam=lam, mu=mu)

    @classmethod
    def vshape(cls, lam: float, delta: float) -> KernelSpec:
        return cls("vshape", lam=lam, delta=delta)

    @classmethod
    def distributed(cls, lam: float, delta: float) -> KernelSpec:
        return cls("distributed", lam=lam, delta=delta)

    @classmethod
    def tent(cls, delta: float) -> KernelSpec:
        return cls("tent", delta=delta)

    @property
    def has_horizon(self) -> bool:
        return self.variant != "gauss"

    @property
    def compact(self) -> bool:
        return self.variant in ("vshape", "tent")

    def with_delta(self, delta: float) -> KernelSpec:
        if not self.has_horizon:
            raise ValueError("Gauss kernel has no horizon")
        return KernelSpec(self.variant, lam=self.lam, mu=self.mu, delta=float(delta))

    def effective_radius(self, delta=None):
        """Half-width of the region where C can be nonzero (infinite for the distributed kernel)."""
        if self.variant == "gauss":
            return GAUSS_CUTOFF / math.sqrt(self.mu)
        if self.variant == "distributed":
            return math.inf
        return self.delta if delta is None else delta

    def __call__(self, xi):
        return evaluate(self, xi)


def _xp(*args):
    return jnp if any(isinstance(a, jax.Array) for a in args) else np


def _abs(xp, z):
    # right-sided derivative at the kink: d|z|/dz = +1 at z = 0
    return xp.where(z >= 0, z, -z)


def _values(spec: KernelSpec, xi, delta):
    xp = _xp(xi, delta)
    xi = xp.asarray(xi, dtype=float)
    a = _abs(xp, xi)
    if spec.variant == "gauss":
        return spec.lam * xp.exp(-spec.mu * xi * xi)
    if spec.variant == "vshape":
        # open at |xi| = delta, where the kernel jumps; matches the global rewrite
        return xp.where(a < delta, spec.lam * a, 0.0)
    if spec.variant == "tent":
        z = delta - a
        return xp.where(z >= 0, z, 0.0)
    # distributed: the paper's c(xi) = |xi/delta| + (delta - lambda)/delta, clipped at 0
    c = (a - spec.lam + delta) / delta
    return xp.where(c >= 0, c, 0.0)


def evaluate(spec: KernelSpec, xi):
    """Piecewise value C(xi) at the kernel's own horizon."""
    return _values(spec, xi, spec.delta)


def eval_smooth_in_delta(spec: KernelSpec, xi, delta):
    """C(xi) written globally so the horizon ``delta`` can be differentiated.

    V-shape uses c_min(xi) - c(delta) * sgn(c_min(xi)) with c(z) = lambda |z| and
    c_min = min(c(xi) - c(delta), 0); inside the support sgn(c_min) = -1 and the
    expression collapses to lambda |xi|, outside it is 0. The distributed
    kernel uses c0(xi) = max(c(xi), 0). Tent is max(0, delta - |xi|).
    """
    if spec.variant == "gauss":
        raise ValueError("Gauss kernel has no horizon; eval_smooth_in_delta is not applicable")
    xp = _xp(xi, delta)
    xi = xp.asarray(xi, dtype=float)
    if spec.variant == "vshape":
        c_xi = spec.lam * _abs(xp, xi)
        c_delta = spec.lam * delta
        c_min = xp.minimum(c_xi - c_delta, 0.0)
        return c_min - c_delta * xp.sign(c_min)
    return _values(spec, xi, delta)


def integration_domain(spec: KernelSpec, x: float, delta: float, spatial_domain=None):
    """Intervals of y over which C(x - y) can be nonzero, clipped to the domain.

    Returns a list of ``(a, b)`` float pairs; empty pieces are dropped, so an
    empty list means the nonlocal integral vanishes at ``x``.
    """
    lo, hi = (-math.inf, math.inf) if spatial_domain is None else map(float, spatial_domain)
    if spec.variant == "distributed":
        if spatial_domain is None:
            raise ValueError("distributed kernel has unbounded support; pass a bounded spatial_domain")
        r = max(spec.lam - delta, 0.0)
        pieces = [(lo, min(hi, x - r)), (max(lo, x + r), hi)]
    else:
        r = spec.effective_radius(delta)
        pieces = [(max(lo, x - r), min(hi, x + r))]
    return [(a, b) for a, b in pieces if b > a]


def support_pieces(spec: KernelSpec, x, delta, spatial_domain=None):
    """Traceable split of the integration domain into pieces where C is smooth.

    Always returns two ``(a, b)`` pairs (possibly of zero length) so that the
    shapes stay fixed under ``jit``. The clamps pick the right-sided derivative
    in ``delta`` when an endpoint sits exactly on the domain boundary.
    """
    if spec.variant == "distributed":
        if spatial_domain is None:
            raise ValueError("distributed kernel has unbounded support; pass a bounded spatial_domain")
        lo, hi = spatial_domain
        r = jnp.where(spec.lam - delta > 0, spec.lam - delta, 0.0)
        left_end = jnp.where(x - r >= lo, x - r, lo)
        right_start = jnp.where(x + r <= hi, x + r, hi)
        return [(jnp.asarray(lo, dtype=float) + 0.0 * x, left_end), (right_start, jnp.asarray(hi, dtype=float) + 0.0 * x)]
    r = GAUSS_CUTOFF / math.sqrt(spec.mu) if spec.variant == "gauss" else delta
    a, b = x - r, x + r
    if spatial_domain is not None:
        lo, hi = spatial_domain
        a = jnp.where(a > lo, a, lo)
        b = jnp.where(b < hi, b, hi)
        # a point outside the domain has nothing to integrate on its far side
        mid = jnp.clip(x, lo, hi)
        return [(a, jnp.maximum(a, mid)), (jnp.minimum(b, mid), b)]
    return [(a, x), (x, b)]


def kernel_integral(spec: KernelSpec, delta=None) -> float:
    """Closed-form integral of C over the real line (restricted to compact kernels and Gauss)."""
    d = spec.delta if delta is None else delta
    if spec.variant == "gauss":
        return spec.lam * math.sqrt(math.pi / spec.mu)
    if spec.variant == "vshape":
        return spec.lam * d * d
    if spec.variant == "tent":
        return d * d
    raise ValueError("distributed kernel is not integrable on the real line")
