"""Quadrature rules, frequency grids and deterministic summation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TRAPEZOID = "trapezoid"
GAUSS_LEGENDRE = "gauss_legendre"

# Rule used by the Mercer discretisation and the frequency grids.
QUADRATURE_RULE = TRAPEZOID

DEFAULT_FREQUENCY_NODES = 4096


def fsum(values) -> float:
    """Exactly rounded sum in fixed index order (reproducible totals)."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def rule_nodes(a: float, b: float, n: int, rule: str = QUADRATURE_RULE):
    """Return ``(nodes, weights)`` of an ``n``-point rule on ``[a, b]``."""
    if n < 2:
        raise ValueError(f"quadrature needs at least 2 nodes, got {n}")
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    if rule == TRAPEZOID:
        nodes = np.linspace(a, b, n)
        h = (b - a) / (n - 1)
        weights = np.full(n, h)
        weights[0] = weights[-1] = h / 2
    elif rule == GAUSS_LEGENDRE:
        x, w = np.polynomial.legendre.leggauss(n)
        nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
        weights = 0.5 * (b - a) * w
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return nodes, weights


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Symmetric quadrature grid on ``[-f_max, f_max]``."""

    nodes: np.ndarray
    weights: np.ndarray
    f_max: float

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        weights = _frozen(self.weights)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or nodes.size < 2 or nodes.shape != weights.shape:
            raise ValueError("degenerate frequency grid")
        if not self.f_max > 0:
            raise ValueError("f_max must be positive")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("frequency nodes must be strictly ascending")
        if np.max(np.abs(nodes + nodes[::-1])) > 1e-12 * max(1.0, self.f_max):
            raise ValueError("frequency nodes must be symmetric about 0")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(fsum(weights) - 2 * self.f_max) > 1e-10 * self.f_max:
            raise ValueError("weights must sum to 2*f_max")

    @classmethod
    def uniform(cls, f_max: float, size: int = DEFAULT_FREQUENCY_NODES,
                rule: str = QUADRATURE_RULE) -> "FrequencyGrid":
        if not f_max > 0:
            raise ValueError("f_max must be positive")
        nodes, weights = rule_nodes(-f_max, f_max, size, rule)
        # exact mirror symmetry; linspace can be off by an ulp
        nodes = 0.5 * (nodes - nodes[::-1])
        weights = 0.5 * (weights + weights[::-1])
        return cls(nodes, weights, float(f_max))

    @property
    def size(self) -> int:
        return self.nodes.size

    def integrate(self, values) -> float:
        values = np.asarray(values, dtype=float)
        if values.shape != self.nodes.shape:
            raise ValueError("integrand does not match the grid")
        return fsum(self.weights * values)
