"""Distortion and perception allocation across Karhunen-Loeve coefficients.

The process-level bound is the sum of per-coefficient scalar solutions that
share one water level ``gamma``. Perception levels are an input: either any
externally supplied :class:`PerceptionPlan` or the proportional heuristic
``P_i = alpha * lambda_i`` from :func:`heuristic_perception`. Since optimal
perception levels are not known in closed form the totals reported here are
upper bounds on the rate.

Coefficients beyond the truncation order (the spectrum's ``tail_trace``) are
reconstructed as zero: they cost no rate and contribute their full variance to
both distortion and perception.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, FeasibilityError
from .mercer import EigenSpectrum, trace
from .quadrature import fsum
from .scalar_rdpf import (
    ScalarAllocation,
    _distortion,
    _zero_rate_distortion,
    allocate,
    bisect_increasing,
)


# gamma used for the small-distortion end of the feasible range, relative to lambda_1
D_MIN_GAMMA = 1e-10
# relative slack accepted on a distortion target just above D_max
TARGET_SLACK = 1e-12
# noise variance below -NOISE_TOL * lambda means the test channel is invalid
NOISE_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float, ndmin=1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PerceptionPlan:
    """Per-coefficient perception levels ``P_i`` and the budget they come from.

    ``alpha`` is set when the plan was produced by the proportional heuristic.
    ``tail_share`` is the part of the budget nominally assigned to truncated
    coefficients (``alpha * tail_trace`` for the heuristic).
    """

    per_dim: np.ndarray
    budget: float
    alpha: float | None = None
    tail_share: float = 0.0

    def __post_init__(self):
        p = _frozen(self.per_dim)
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("perception levels must be finite and nonnegative")
        if not self.budget >= 0:
            raise ValueError(f"perception budget must be nonnegative, got {self.budget}")
        if fsum(p) > self.budget + 1e-12 * max(1.0, self.budget):
            raise ValueError(f"perception levels sum to {fsum(p)} > budget {self.budget}")
        object.__setattr__(self, "per_dim", p)

    @classmethod
    def from_levels(cls, levels, budget=None) -> "PerceptionPlan":
        levels = np.asarray(levels, dtype=float)
        return cls(levels, fsum(levels) if budget is None else float(budget))

    @property
    def total(self) -> float:
        return fsum(self.per_dim) + self.tail_share


@dataclass(frozen=True)
class AllocationResult:
    """Allocation at one water level. Rates in nats."""

    gamma: float
    per_dim: tuple[ScalarAllocation, ...]
    total_rate: float
    total_distortion: float
    total_perception: float
    tail_distortion: float
    tail_perception: float
    alpha: float | None = None


@dataclass(frozen=True)
class RDPPoint:
    rate: float
    distortion: float
    perception: float
    gamma: float = math.nan
    alpha: float | None = None


def heuristic_perception(spec: EigenSpectrum, P: float) -> PerceptionPlan:
    """Perception levels proportional to the coefficient variances.

    ``alpha = min(P / trace, 1)`` and ``P_i = alpha * lambda_i``. Values of
    ``alpha`` above one are pointless: ``P_i = lambda_i`` already makes every
    coefficient fall in the classical branch.
    """
    if not (P >= 0 and math.isfinite(P)):
        raise ValueError(f"perception budget must be finite and nonnegative, got {P}")
    tr = trace(spec)
    if not tr > 0:
        raise ValueError("spectrum has zero trace")
    alpha = min(P / tr, 1.0)
    return PerceptionPlan(alpha * spec.eigenvalues, float(P), alpha, alpha * spec.tail_trace)


def _active(spec: EigenSpectrum, plan: PerceptionPlan):
    if plan.per_dim.size != spec.n:
        raise ValueError(f"plan has {plan.per_dim.size} levels for {spec.n} eigenvalues")
    idx = np.nonzero(spec.eigenvalues > 0)[0]
    return idx, spec.eigenvalues[idx], plan.per_dim[idx]


def _total_distortion(lam, P, gamma, tail):
    return fsum(_distortion(lam, gamma, P)) + tail


def feasible_distortion_range(spec: EigenSpectrum, plan: PerceptionPlan) -> tuple[float, float]:
    """``(D_min, D_max)`` reachable by :func:`solve_gamma` for this plan."""
    _, lam, P = _active(spec, plan)
    tail = spec.tail_trace
    if lam.size == 0:
        return tail, tail
    d_min = _total_distortion(lam, P, D_MIN_GAMMA * lam[0], tail)
    d_max = fsum(_zero_rate_distortion(lam, P)) + tail
    return d_min, d_max


def solve_gamma(spec: EigenSpectrum, plan: PerceptionPlan, D_target: float) -> float:
    """Water level whose total distortion equals ``D_target``.

    Returns ``inf`` for the zero-rate endpoint when it is only reached
    asymptotically (some coefficient in the perception-limited branch).
    """
    d_min, d_max = feasible_distortion_range(spec, plan)
    if not (D_target >= d_min and D_target <= d_max * (1 + TARGET_SLACK)):
        raise FeasibilityError(
            f"distortion target {D_target} outside the feasible range [{d_min}, {d_max}]",
            (d_min, d_max))
    _, lam, P = _active(spec, plan)
    if lam.size == 0:
        return 1.0
    tail = spec.tail_trace
    if D_target >= d_max:
        # classical coefficients saturate at gamma = lambda_1; others only in the limit
        if _total_distortion(lam, P, float(lam[0]), tail) >= d_max:
            return float(lam[0])
        return math.inf
    return bisect_increasing(lambda g: _total_distortion(lam, P, g, tail),
                             D_target, 1e-12 * lam[0], float(lam[0]))


def evaluate(spec: EigenSpectrum, plan: PerceptionPlan, gamma: float) -> AllocationResult:
    """Per-coefficient solutions at water level ``gamma`` and their totals.

    ``gamma = inf`` gives the zero-rate allocation. Coefficients with zero
    variance are skipped.
    """
    idx, lam, P = _active(spec, plan)
    if math.isinf(gamma):
        # zero-rate limit: reconstruction keeps the perception-feasible variance
        dims = []
        for i, l, p in zip(idx, lam, P):
            a = allocate(float(l), 1e150 * float(l), float(p), int(i))
            dims.append(ScalarAllocation(a.lam, a.P, math.inf, a.branch,
                                         float(_zero_rate_distortion(l, p)), 0.0, a.nu, a.index))
    else:
        dims = [allocate(float(l), gamma, float(p), int(i)) for i, l, p in zip(idx, lam, P)]
    tail = spec.tail_trace
    return AllocationResult(
        gamma=float(gamma),
        per_dim=tuple(dims),
        total_rate=math.fsum(d.R for d in dims),
        total_distortion=math.fsum([d.D for d in dims] + [tail]),
        total_perception=math.fsum([d.w2 for d in dims] + [tail]),
        tail_distortion=tail,
        tail_perception=tail,
        alpha=plan.alpha,
    )


def solve(spec: EigenSpectrum, P: float, D_target: float) -> AllocationResult:
    """Heuristic perception plan, water level and allocation for one ``(D, P)``."""
    plan = heuristic_perception(spec, P)
    return evaluate(spec, plan, solve_gamma(spec, plan, D_target))


def rdp_curve(spec: EigenSpectrum, P: float, D_grid) -> list[RDPPoint]:
    """Rate upper bound along ``D_grid`` at perception budget ``P``.

    Targets outside the feasible range are dropped with a ``RuntimeWarning``.
    Points come back sorted by distortion.
    """
    D_grid = sorted(float(d) for d in D_grid)
    if not D_grid:
        raise ValueError("empty distortion grid")
    plan = heuristic_perception(spec, P)
    d_min, d_max = feasible_distortion_range(spec, plan)
    points = []
    for d in D_grid:
        if not (d >= d_min and d <= d_max * (1 + TARGET_SLACK)):
            warnings.warn(f"skipping D={d!r}: outside feasible range [{d_min!r}, {d_max!r}]",
                          RuntimeWarning, stacklevel=2)
            continue
        res = evaluate(spec, plan, solve_gamma(spec, plan, d))
        points.append(RDPPoint(res.total_rate, res.total_distortion, res.total_perception,
                               res.gamma, plan.alpha))
    return points


@dataclass(frozen=True)
class MonteCarloReport:
    """Empirical statistics of the Gaussian test channel.

    Totals include the truncated tail at its exact value (it is reconstructed
    as zero, so its distortion and perception are deterministic in
    expectation); standard errors cover the sampled coefficients only.
    """

    empirical_distortion: float
    empirical_perception: float
    distortion_std_error: float
    perception_std_error: float
    per_dim_distortion: np.ndarray
    per_dim_perception: np.ndarray
    per_dim_distortion_se: np.ndarray
    per_dim_perception_se: np.ndarray
    n_samples: int
    seed: int

    @property
    def std_errors(self) -> dict:
        return {"distortion": self.distortion_std_error, "perception": self.perception_std_error}


def channel_parameters(dim: ScalarAllocation) -> tuple[float, float]:
    """Gain ``a`` and noise variance of ``Y = a X + Z`` realising ``dim``.

    The cross-covariance follows from ``E(X - Y)^2 = lam + nu - 2 cov``.
    """
    cov = 0.5 * (dim.lam + dim.nu - dim.D)
    a = cov / dim.lam
    noise = dim.nu - a * cov
    if noise < -NOISE_TOL * dim.lam:
        raise ConsistencyError(
            f"coefficient {dim.index}: test channel needs negative noise variance {noise:.3e}")
    return a, max(noise, 0.0)


def monte_carlo_verify(spec: EigenSpectrum, result: AllocationResult,
                       n_samples: int = 1_000_000, seed: int = 0) -> MonteCarloReport:
    """Sample each coefficient's test channel and measure distortion and W2.

    Deterministic for a given ``seed``. Per coefficient, ``X ~ N(0, lam)`` and
    ``Y = a X + Z`` with ``Z ~ N(0, noise)``; the empirical perception is
    ``(sqrt(lam) - sqrt(mean(Y**2)))**2``.
    """
    if int(n_samples) != n_samples or n_samples < 2:
        raise ValueError("n_samples must be an integer >= 2")
    n = int(n_samples)
    rng = np.random.default_rng(seed)
    k = len(result.per_dim)
    d_emp, d_se = np.zeros(k), np.zeros(k)
    p_emp, p_se = np.zeros(k), np.zeros(k)
    for j, dim in enumerate(result.per_dim):
        a, noise = channel_parameters(dim)
        x = rng.standard_normal(n) * math.sqrt(dim.lam)
        y = a * x
        if noise > 0:
            y += rng.standard_normal(n) * math.sqrt(noise)
        err2 = (x - y) ** 2
        d_emp[j] = err2.mean()
        d_se[j] = err2.std(ddof=1) / math.sqrt(n)
        y2 = y * y
        var_y = y2.mean()
        p_emp[j] = (math.sqrt(dim.lam) - math.sqrt(var_y)) ** 2
        # delta method in sqrt(var_y), keeping the second-order term for nu ~ lam
        if var_y > 0:
            se_var = y2.std(ddof=1) / math.sqrt(n)
            se_root = se_var / (2 * math.sqrt(var_y))
            gap = abs(math.sqrt(dim.lam) - math.sqrt(dim.nu))
            p_se[j] = math.sqrt(4 * gap * gap * se_root ** 2 + 2 * se_root ** 4)
    tail = spec.tail_trace
    return MonteCarloReport(
        empirical_distortion=math.fsum(list(d_emp) + [tail]),
        empirical_perception=math.fsum(list(p_emp) + [tail]),
        distortion_std_error=math.sqrt(math.fsum(d_se ** 2)),
        perception_std_error=math.sqrt(math.fsum(p_se ** 2)),
        per_dim_distortion=d_emp,
        per_dim_perception=p_emp,
        per_dim_distortion_se=d_se,
        per_dim_perception_se=p_se,
        n_samples=n,
        seed=int(seed),
    )
