"""Truncated Mercer (Karhunen-Loeve) spectra by Nystrom discretisation.

The integral operator ``[K phi](t) = int_0^T k(t, s) phi(s) ds`` is replaced by
the symmetric matrix ``W^{1/2} K W^{1/2}`` built from quadrature weights ``W``.
Its eigenvalues approximate the operator eigenvalues and its eigenvectors,
rescaled by ``W^{-1/2}``, are the eigenfunctions sampled at the nodes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError
from .kernels import Domain, KernelSpec
from .quadrature import fsum

# eigenvalues below EIGENVALUE_FLOOR * lambda_1 are set to zero
EIGENVALUE_FLOOR = 1e-12
# most negative Gram eigenvalue tolerated, relative to the trace
INDEFINITE_TOL = 1e-10
# default truncation keeps tail_trace below this fraction of the trace
DEFAULT_TAIL_FRACTION = 1e-3


def _frozen(a, ndim=1):
    a = np.array(a, dtype=float, ndmin=ndim)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EigenSpectrum:
    """Eigenvalues (descending) of a covariance operator plus the trace they miss.

    ``grid``, ``weights`` and ``eigenfunctions`` are present when the spectrum
    was computed from a kernel; a spectrum built from a bare list of variances
    carries only ``eigenvalues`` and ``tail_trace``. ``eigenfunctions`` has
    shape ``(grid_size, N)``.
    """

    eigenvalues: np.ndarray
    tail_trace: float = 0.0
    grid: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)
    eigenfunctions: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        lam = _frozen(self.eigenvalues)
        if lam.ndim != 1:
            raise ValueError("eigenvalues must be one-dimensional")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise ValueError("eigenvalues must be finite and nonnegative")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted in descending order")
        tail = float(self.tail_trace)
        if not math.isfinite(tail) or tail < -1e-10 * max(fsum(lam), 1e-300):
            raise ValueError(f"tail_trace must be nonnegative, got {tail}")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "tail_trace", max(tail, 0.0))
        if self.grid is not None:
            grid = _frozen(self.grid)
            weights = _frozen(self.weights)
            if grid.shape != weights.shape:
                raise ValueError("grid and weights differ in length")
            object.__setattr__(self, "grid", grid)
            object.__setattr__(self, "weights", weights)
        if self.eigenfunctions is not None:
            phi = _frozen(self.eigenfunctions, ndim=2)
            if self.grid is None or phi.shape != (self.grid.size, lam.size):
                raise ValueError("eigenfunctions must have shape (grid_size, N)")
            object.__setattr__(self, "eigenfunctions", phi)

    @classmethod
    def from_eigenvalues(cls, values, tail_trace=0.0) -> "EigenSpectrum":
        """Spectrum from explicit coefficient variances (sorted here)."""
        values = np.sort(np.asarray(values, dtype=float))[::-1]
        return cls(values, tail_trace)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def to_dict(self, eigenfunctions=False) -> dict:
        out = {
            "eigenvalues": self.eigenvalues.tolist(),
            "tail_trace": self.tail_trace,
        }
        if self.grid is not None:
            out["grid"] = self.grid.tolist()
            out["weights"] = self.weights.tolist()
            if eigenfunctions and self.eigenfunctions is not None:
                out["eigenfunctions"] = self.eigenfunctions.T.tolist()
        return out

    def to_json(self, eigenfunctions=False) -> str:
        # json writes floats with repr, which round-trips exactly
        return json.dumps(self.to_dict(eigenfunctions))

    @classmethod
    def from_dict(cls, d) -> "EigenSpectrum":
        if "eigenvalues" not in d:
            raise ValueError("spectrum JSON needs an 'eigenvalues' list")
        phi = d.get("eigenfunctions")
        return cls(
            np.asarray(d["eigenvalues"], dtype=float),
            float(d.get("tail_trace", 0.0)),
            d.get("grid"),
            d.get("weights"),
            None if phi is None else np.asarray(phi, dtype=float).T,
        )

    @classmethod
    def from_json(cls, text: str) -> "EigenSpectrum":
        return cls.from_dict(json.loads(text))


def decompose(kernel: KernelSpec, domain: Domain | None = None, n: int | None = None) -> EigenSpectrum:
    """Top-``n`` Mercer eigenpairs of ``kernel`` on ``domain``.

    Parameters
    ----------
    kernel : KernelSpec
    domain : Domain, optional
        Discretisation to use; defaults to ``kernel.domain``. Must lie inside
        the kernel's own domain.
    n : int, optional
        Truncation order, ``0 <= n <= grid_size``. By default the smallest
        order whose tail trace is below ``DEFAULT_TAIL_FRACTION`` of the trace.

    Returns
    -------
    EigenSpectrum
        With ``tail_trace = sum_g w_g k(g, g) - sum_{i<=n} lambda_i``.

    Raises
    ------
    NumericalError
        If the weighted Gram matrix has an eigenvalue below
        ``-INDEFINITE_TOL * trace``.
    """
    domain = kernel.domain if domain is None else domain
    if domain.T > kernel.domain.T * (1 + 1e-12):
        raise DomainError(f"domain [0, {domain.T}] exceeds the kernel's [0, {kernel.domain.T}]")
    if n is not None and (int(n) != n or n < 0 or n > domain.grid_size):
        raise ValueError(f"truncation order must be in [0, {domain.grid_size}], got {n}")

    x, w = domain.quadrature()
    gram = kernel.gram(x)
    sw = np.sqrt(w)
    b = sw[:, None] * gram * sw[None, :]
    b = 0.5 * (b + b.T)
    mu, vecs = np.linalg.eigh(b)
    mu, vecs = mu[::-1], vecs[:, ::-1]

    total = fsum(w * np.diag(gram))
    if mu[-1] < -INDEFINITE_TOL * abs(total):
        raise NumericalError(
            f"kernel Gram matrix is indefinite: eigenvalue {mu[-1]:.3e} vs trace {total:.3e}")
    mu = np.where(mu < EIGENVALUE_FLOOR * max(mu[0], 0.0), 0.0, mu)

    if n is None:
        n = truncation_order(mu, total)
    n = int(n)
    lam = mu[:n]
    phi = vecs[:, :n] / sw[:, None]
    return EigenSpectrum(lam, total - fsum(lam), x, w, phi)


def truncation_order(eigenvalues, total, fraction=DEFAULT_TAIL_FRACTION) -> int:
    """Smallest ``n`` with ``total - sum(eigenvalues[:n]) < fraction * total``."""
    if total <= 0:
        return 0
    remaining = total - np.cumsum(eigenvalues)
    ok = np.nonzero(remaining < fraction * total)[0]
    return int(ok[0]) + 1 if ok.size else len(eigenvalues)


def trace(spec: EigenSpectrum) -> float:
    """Retained eigenvalue mass plus the tail."""
    return fsum(spec.eigenvalues) + spec.tail_trace


def reconstruction_residual(spec: EigenSpectrum, kernel: KernelSpec) -> float:
    """Largest grid error of the truncated Mercer expansion of ``kernel``."""
    if spec.eigenfunctions is None:
        raise ValueError("spectrum carries no eigenfunctions")
    if not kernel.domain.contains(spec.grid):
        raise DomainError("spectrum grid is not inside the kernel's domain")
    gram = kernel.gram(spec.grid)
    phi = spec.eigenfunctions
    approx = (phi * spec.eigenvalues) @ phi.T
    return float(np.max(np.abs(gram - approx)))
