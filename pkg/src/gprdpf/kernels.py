"""Covariance kernels on ``[0, T]`` and power spectral densities.

Every source is zero-mean. Kernels are used by the Karhunen-Loeve path
(:mod:`gprdpf.mercer`), spectral densities by the stationary path
(:mod:`gprdpf.stationary`).

Parameter names accepted in ``params``:

=====================  ===========================================
family                 params
=====================  ===========================================
squared_exponential    ``variance``, ``lengthscale``
exponential_ou         ``variance``, ``lengthscale``
brownian               ``scale``
tabulated (kernel)     ``values`` (N_g x N_g nested list)
rectangular            ``level``, ``half_width``
lorentzian_ou          ``variance``, ``lengthscale``
gaussian_shape         ``variance``, ``width``
tabulated (spectrum)   ``frequencies`` (>= 0, ascending), ``values``
=====================  ===========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import DomainError
from .quadrature import DEFAULT_FREQUENCY_NODES, FrequencyGrid, fsum, rule_nodes

KERNEL_FAMILIES = ("squared_exponential", "exponential_ou", "brownian", "tabulated")
SPECTRAL_FAMILIES = ("rectangular", "lorentzian_ou", "gaussian_shape", "tabulated")

_KERNEL_PARAMS = {
    "squared_exponential": ("variance", "lengthscale"),
    "exponential_ou": ("variance", "lengthscale"),
    "brownian": ("scale",),
    "tabulated": (),
}
_SPECTRAL_PARAMS = {
    "rectangular": ("level", "half_width"),
    "lorentzian_ou": ("variance", "lengthscale"),
    "gaussian_shape": ("variance", "width"),
    "tabulated": (),
}

# relative slack when checking that an argument lies in [0, T]
_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class Domain:
    """Interval ``[0, T]`` discretised with ``grid_size`` quadrature nodes."""

    T: float
    grid_size: int = 256

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"domain length must be positive, got {self.T}")
        if int(self.grid_size) != self.grid_size or self.grid_size < 2:
            raise ValueError(f"grid_size must be an integer >= 2, got {self.grid_size}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "grid_size", int(self.grid_size))

    def quadrature(self, rule=None):
        """Nodes and weights of the quadrature rule on ``[0, T]``."""
        if rule is None:
            return rule_nodes(0.0, self.T, self.grid_size)
        return rule_nodes(0.0, self.T, self.grid_size, rule)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        tol = _DOMAIN_SLACK * self.T
        return bool(np.all((x >= -tol) & (x <= self.T + tol)))


def _check_params(family, params, required, extra=()):
    params = dict(params)
    mean = params.pop("mean", 0.0)
    if mean != 0:
        raise ValueError("only zero-mean sources are supported")
    unknown = sorted(set(params) - set(required) - set(extra))
    if unknown:
        raise ValueError(f"{family}: unknown parameter(s) {', '.join(unknown)}")
    missing = [p for p in required if p not in params]
    if missing:
        raise ValueError(f"{family}: missing parameter(s) {', '.join(missing)}")
    for name in required:
        v = float(params[name])
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{family}: parameter {name} must be positive, got {params[name]}")
        params[name] = v
    return params


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A covariance function ``k(s, t)`` on ``domain``."""

    family: str
    params: Mapping[str, float]
    domain: Domain
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {KERNEL_FAMILIES}")
        params = _check_params(self.family, self.params, _KERNEL_PARAMS[self.family], ("values",))
        table = self.table
        if self.family == "tabulated":
            if table is None:
                table = params.pop("values", None)
            if table is None:
                raise ValueError("tabulated kernel needs a table of values")
            table = np.asarray(table, dtype=float)
            n = self.domain.grid_size
            if table.shape != (n, n):
                raise ValueError(f"tabulated kernel must be {n}x{n} to match the domain grid, got {table.shape}")
            if not np.all(np.isfinite(table)):
                raise ValueError("tabulated kernel has non-finite entries")
            scale = max(np.max(np.abs(table)), 1.0)
            if np.max(np.abs(table - table.T)) > 1e-10 * scale:
                raise ValueError("tabulated kernel must be symmetric")
            table = _freeze(0.5 * (table + table.T))
        else:
            table = None
        params.pop("values", None)
        object.__setattr__(self, "params", MappingProxyType(params))
        object.__setattr__(self, "table", table)

    @classmethod
    def squared_exponential(cls, variance, lengthscale, domain):
        return cls("squared_exponential", {"variance": variance, "lengthscale": lengthscale}, domain)

    @classmethod
    def exponential_ou(cls, variance, lengthscale, domain):
        return cls("exponential_ou", {"variance": variance, "lengthscale": lengthscale}, domain)

    @classmethod
    def brownian(cls, scale, domain):
        return cls("brownian", {"scale": scale}, domain)

    @classmethod
    def tabulated(cls, values, domain):
        return cls("tabulated", {}, domain, table=values)

    def __call__(self, s, t):
        return eval_kernel(self, s, t)

    def gram(self, x, y=None) -> np.ndarray:
        """Matrix ``k(x_i, y_j)``; no domain check (callers validate grids)."""
        x = np.asarray(x, dtype=float)
        y = x if y is None else np.asarray(y, dtype=float)
        return _evaluate(self, x[:, None], y[None, :])

    def to_config(self) -> dict:
        params = dict(self.params)
        if self.table is not None:
            params["values"] = self.table.tolist()
        return {
            "family": self.family,
            "params": params,
            "domain": {"T": self.domain.T, "grid_size": self.domain.grid_size},
        }


def _evaluate(spec: KernelSpec, s, t):
    p = spec.params
    fam = spec.family
    if fam == "squared_exponential":
        d = s - t
        return p["variance"] * np.exp(-0.5 * (d / p["lengthscale"]) ** 2)
    if fam == "exponential_ou":
        return p["variance"] * np.exp(-np.abs(s - t) / p["lengthscale"])
    if fam == "brownian":
        return p["scale"] * np.minimum(s, t)
    return _bilinear(spec.table, spec.domain.T, s, t)


def _bilinear(table, T, s, t):
    # order the pair so that k(s, t) and k(t, s) take the identical float path
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    lo, hi = np.broadcast_arrays(lo, hi)
    n = table.shape[0]
    h = T / (n - 1)

    def locate(x):
        u = np.clip(x / h, 0.0, n - 1)
        i = np.minimum(np.floor(u).astype(int), n - 2)
        return i, u - i

    i, a = locate(lo)
    j, b = locate(hi)
    return ((1 - a) * (1 - b) * table[i, j] + a * (1 - b) * table[i + 1, j]
            + (1 - a) * b * table[i, j + 1] + a * b * table[i + 1, j + 1])


def eval_kernel(spec: KernelSpec, s, t):
    """Evaluate ``k(s, t)``; raises :class:`DomainError` outside ``[0, T]``."""
    if not (spec.domain.contains(s) and spec.domain.contains(t)):
        raise DomainError(f"arguments must lie in [0, {spec.domain.T}]")
    out = _evaluate(spec, np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class SpectralDensitySpec:
    """Even, nonnegative power spectral density ``S(f)`` truncated to ``[-f_max, f_max]``.

    ``f_max`` defaults to the band edge for ``rectangular`` and to the last
    table frequency for ``tabulated``; it is required for the other families.
    """

    family: str
    params: Mapping[str, float]
    f_max: float | None = None
    grid_size: int = DEFAULT_FREQUENCY_NODES
    frequencies: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in SPECTRAL_FAMILIES:
            raise ValueError(f"unknown spectral family {self.family!r}; expected one of {SPECTRAL_FAMILIES}")
        params = dict(self.params)
        freqs, vals = self.frequencies, self.values
        if self.family == "tabulated":
            freqs = params.pop("frequencies", freqs)
            vals = params.pop("values", vals)
            if freqs is None or vals is None:
                raise ValueError("tabulated spectrum needs frequencies and values")
            freqs = np.asarray(freqs, dtype=float)
            vals = np.asarray(vals, dtype=float)
            if freqs.ndim != 1 or freqs.shape != vals.shape or freqs.size < 2:
                raise ValueError("tabulated spectrum: frequencies and values must be 1-D of equal length >= 2")
            if freqs[0] < 0 or np.any(np.diff(freqs) <= 0):
                raise ValueError("tabulated spectrum: frequencies must be >= 0 and strictly ascending")
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ValueError("tabulated spectrum: values must be finite and nonnegative")
            freqs, vals = _freeze(freqs), _freeze(vals)
        else:
            freqs = vals = None
        params = _check_params(self.family, params, _SPECTRAL_PARAMS[self.family])
        f_max = self.f_max
        if f_max is None:
            if self.family == "rectangular":
                f_max = params["half_width"]
            elif self.family == "tabulated":
                f_max = float(freqs[-1])
            else:
                raise ValueError(f"{self.family}: f_max is required")
        f_max = float(f_max)
        if not (math.isfinite(f_max) and f_max > 0):
            raise ValueError(f"f_max must be positive, got {f_max}")
        if int(self.grid_size) != self.grid_size or self.grid_size < 2:
            raise ValueError(f"grid_size must be an integer >= 2, got {self.grid_size}")
        object.__setattr__(self, "params", MappingProxyType(params))
        object.__setattr__(self, "f_max", f_max)
        object.__setattr__(self, "grid_size", int(self.grid_size))
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "values", vals)

    @classmethod
    def rectangular(cls, level, half_width, f_max=None, grid_size=DEFAULT_FREQUENCY_NODES):
        return cls("rectangular", {"level": level, "half_width": half_width}, f_max, grid_size)

    @classmethod
    def lorentzian_ou(cls, variance, lengthscale, f_max, grid_size=DEFAULT_FREQUENCY_NODES):
        return cls("lorentzian_ou", {"variance": variance, "lengthscale": lengthscale}, f_max, grid_size)

    @classmethod
    def gaussian_shape(cls, variance, width, f_max, grid_size=DEFAULT_FREQUENCY_NODES):
        return cls("gaussian_shape", {"variance": variance, "width": width}, f_max, grid_size)

    @classmethod
    def tabulated(cls, frequencies, values, f_max=None, grid_size=DEFAULT_FREQUENCY_NODES):
        return cls("tabulated", {}, f_max, grid_size, frequencies=frequencies, values=values)

    def __call__(self, f):
        return eval_spectral_density(self, f)

    def grid(self, size=None) -> FrequencyGrid:
        return FrequencyGrid.uniform(self.f_max, self.grid_size if size is None else size)

    def to_config(self) -> dict:
        params = dict(self.params)
        if self.family == "tabulated":
            params["frequencies"] = self.frequencies.tolist()
            params["values"] = self.values.tolist()
        return {
            "family": self.family,
            "params": params,
            "spectrum": {"f_max": self.f_max, "grid_size": self.grid_size},
        }


def eval_spectral_density(spec: SpectralDensitySpec, f):
    """Evaluate ``S(f)``. Accepts scalars or arrays; always even and >= 0."""
    af = np.abs(np.asarray(f, dtype=float))
    p = spec.params
    fam = spec.family
    if fam == "rectangular":
        out = np.where(af <= p["half_width"], p["level"], 0.0)
    elif fam == "lorentzian_ou":
        s2, ell = p["variance"], p["lengthscale"]
        out = 2 * s2 * ell / (1 + (2 * np.pi * af * ell) ** 2)
    elif fam == "gaussian_shape":
        s2, w = p["variance"], p["width"]
        out = s2 / (math.sqrt(2 * math.pi) * w) * np.exp(-0.5 * (af / w) ** 2)
    else:
        out = np.interp(af, spec.frequencies, spec.values, left=spec.values[0], right=0.0)
        out = np.where(af <= spec.f_max, out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PowerReport:
    """Total power of a spectral density.

    ``quadrature`` is the grid integral over ``[-f_max, f_max]``. ``analytic``
    is the exact integral over the same interval and ``analytic_full`` the
    integral over the real line, both ``None`` when no closed form exists.
    ``tail_mass`` is the power discarded by truncating at ``f_max``.
    """

    quadrature: float
    analytic: float | None
    analytic_full: float | None
    tail_mass: float | None


def total_power(spec: SpectralDensitySpec, grid: FrequencyGrid | None = None) -> PowerReport:
    if grid is None:
        grid = spec.grid()
    if grid.size == 0:
        raise ValueError("empty frequency grid")
    quad = grid.integrate(eval_spectral_density(spec, grid.nodes))
    p = spec.params
    fm = grid.f_max
    analytic = full = None
    if spec.family == "rectangular":
        full = 2 * p["level"] * p["half_width"]
        analytic = 2 * p["level"] * min(p["half_width"], fm)
    elif spec.family == "lorentzian_ou":
        full = p["variance"]
        analytic = full * (2 / math.pi) * math.atan(2 * math.pi * fm * p["lengthscale"])
    elif spec.family == "gaussian_shape":
        full = p["variance"]
        analytic = full * math.erf(fm / (p["width"] * math.sqrt(2)))
    if full is not None:
        tail = full - analytic
    else:
        # mass of the table beyond f_max (piecewise linear, both sides)
        f, v = spec.frequencies, spec.values
        edge = min(fm, spec.f_max)
        if f[-1] > edge:
            beyond = f > edge
            ff = np.concatenate(([edge], f[beyond]))
            vv = np.concatenate(([np.interp(edge, f, v)], v[beyond]))
            tail = 2 * fsum(0.5 * (vv[1:] + vv[:-1]) * np.diff(ff))
        else:
            tail = 0.0
    return PowerReport(quad, analytic, full, tail)


def kernel_from_config(cfg: Mapping) -> KernelSpec:
    """Build a :class:`KernelSpec` from ``{family, params, domain: {T, grid_size}}``."""
    if "domain" not in cfg:
        raise ValueError("kernel config needs a 'domain' object")
    dom = cfg["domain"]
    domain = Domain(float(dom["T"]), int(dom.get("grid_size", 256)))
    return KernelSpec(cfg["family"], dict(cfg.get("params", {})), domain)


def spectral_density_from_config(cfg: Mapping) -> SpectralDensitySpec:
    """Build a :class:`SpectralDensitySpec` from ``{family, params, spectrum: {f_max, grid_size}}``."""
    sp = cfg.get("spectrum", {})
    return SpectralDensitySpec(
        cfg["family"],
        dict(cfg.get("params", {})),
        sp.get("f_max"),
        int(sp.get("grid_size", DEFAULT_FREQUENCY_NODES)),
    )
