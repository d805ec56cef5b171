"""Gauss-Legendre rules on the reference interval [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)

    def mapped(self, a, b, xp=np):
        """Nodes and weights transplanted to [a, b] by y = a + (b - a)(s + 1)/2."""
        half = 0.5 * (xp.asarray(b) - xp.asarray(a))
        y = xp.asarray(a)[..., None] + half[..., None] * (xp.asarray(self.nodes) + 1.0)
        return y, half[..., None] * xp.asarray(self.weights)

    def integrate(self, f, a, b):
        y, w = self.mapped(a, b)
        total = np.sum(w * f(y), axis=-1)
        return total.reshape(np.broadcast_shapes(np.shape(a), np.shape(b)))


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadratureRule:
    if n < 1:
        raise ValueError("a quadrature rule needs at least one node")
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w)


def composite(f, breakpoints, n: int = 16):
    """Sum of n-point rules over consecutive breakpoints (for piecewise-smooth integrands)."""
    rule = gauss_legendre(n)
    bp = np.asarray(breakpoints, dtype=float)
    return float(np.sum(rule.integrate(f, bp[:-1], bp[1:])))
