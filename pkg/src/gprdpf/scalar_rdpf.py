"""Rate-distortion-perception primitives for one Gaussian coefficient.

A coefficient ``X ~ N(0, lam)`` is reconstructed under a perception budget
``P`` on the squared Wasserstein-2 distance and a water level ``gamma``.
Two regimes arise:

* ``RD``: the perception budget is slack; classical reverse water-filling,
  ``D = min(gamma, lam)`` and ``R = max(0.5 * log(lam / gamma), 0)``.
* ``RDP``: the budget binds. With ``u = sqrt(lam) - sqrt(P)`` and
  ``c = lam * u**2``::

      D = P + 2 sqrt(lam) u + gamma - sqrt(4 c + gamma**2)
      R = 0.5 * log(2 c / (gamma * (sqrt(4 c + gamma**2) - gamma)))

The RDP expressions are evaluated in the algebraically identical forms
``D = P + 2 sqrt(lam) u - 4 c / (s + gamma)`` and
``R = 0.5 * log((gamma + s) / (2 gamma))`` with ``s = sqrt(4 c + gamma**2)``,
which do not cancel catastrophically for large ``gamma`` or small ``c``.

All rates are in nats.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import FeasibilityError, NumericalError

GAMMA_RTOL = 1e-12
MAX_BISECTION_ITER = 200
# geometric bracket growth stops after this many doublings (~1e300)
MAX_BRACKET_DOUBLINGS = 1000


class Branch(str, enum.Enum):
    RD = "RD"
    RDP = "RDP"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ScalarAllocation:
    """Solution for one coefficient at water level ``gamma``.

    ``nu`` is the reconstruction variance; ``index`` is the coefficient's
    position in the spectrum it came from.
    """

    lam: float
    P: float
    gamma: float
    branch: Branch
    D: float
    R: float
    nu: float
    index: int = 0

    @property
    def w2(self) -> float:
        return w2_scalar(self.lam, self.nu)


def _check(lam, gamma, P):
    if not (math.isfinite(lam) and lam > 0):
        raise ValueError(f"variance must be positive, got {lam}")
    if not (gamma > 0) or math.isnan(gamma):
        raise ValueError(f"water level must be positive, got {gamma}")
    if not (P >= 0):
        raise ValueError(f"perception budget must be nonnegative, got {P}")


# Vectorised kernels. Inputs are broadcastable float arrays with lam > 0,
# gamma > 0, P >= 0; no validation happens here.

def _rd_mask(lam, gamma, P):
    return np.sqrt(P) >= np.sqrt(lam) - np.sqrt(lam - np.minimum(lam, gamma))


def _rdp_terms(lam, gamma, P):
    u = np.maximum(np.sqrt(lam) - np.sqrt(P), 0.0)
    c = lam * u * u
    s = np.sqrt(4 * c + gamma * gamma)
    return u, c, s


def _distortion(lam, gamma, P):
    rd = _rd_mask(lam, gamma, P)
    u, c, s = _rdp_terms(lam, gamma, P)
    d_rdp = P + 2 * np.sqrt(lam) * u - 4 * c / (s + gamma)
    return np.where(rd, np.minimum(gamma, lam), d_rdp)


def _rate(lam, gamma, P):
    rd = _rd_mask(lam, gamma, P)
    _, _, s = _rdp_terms(lam, gamma, P)
    with np.errstate(divide="ignore"):
        r_rd = np.maximum(0.5 * np.log(lam / gamma), 0.0)
    r_rdp = 0.5 * np.log((gamma + s) / (2 * gamma))
    return np.where(rd, r_rd, r_rdp)


def _recon_variance(lam, gamma, P):
    rd = _rd_mask(lam, gamma, P)
    u = np.maximum(np.sqrt(lam) - np.sqrt(P), 0.0)
    return np.where(rd, np.maximum(lam - np.minimum(gamma, lam), 0.0), u * u)


def _zero_rate_distortion(lam, P):
    u = np.maximum(np.sqrt(lam) - np.sqrt(P), 0.0)
    return lam + u * u


def branch_select(lam: float, gamma: float, P: float) -> Branch:
    """``RD`` iff ``sqrt(P) >= sqrt(lam) - sqrt(lam - min(lam, gamma))``."""
    _check(lam, gamma, P)
    return Branch.RD if bool(_rd_mask(lam, gamma, P)) else Branch.RDP


def distortion_at(lam: float, gamma: float, P: float) -> float:
    _check(lam, gamma, P)
    return float(_distortion(lam, gamma, P))


def rate_at(lam: float, gamma: float, P: float) -> float:
    """Rate in nats of the allocation at water level ``gamma``."""
    _check(lam, gamma, P)
    return float(_rate(lam, gamma, P))


def reconstruction_variance(lam: float, gamma: float, P: float) -> float:
    _check(lam, gamma, P)
    return float(_recon_variance(lam, gamma, P))


def w2_scalar(lam: float, nu: float) -> float:
    """Squared Wasserstein-2 distance between ``N(0, lam)`` and ``N(0, nu)``."""
    if lam < 0 or nu < 0:
        raise ValueError("variances must be nonnegative")
    return (math.sqrt(lam) - math.sqrt(nu)) ** 2


def allocate(lam: float, gamma: float, P: float, index: int = 0) -> ScalarAllocation:
    """Everything about one coefficient at water level ``gamma``."""
    _check(lam, gamma, P)
    return ScalarAllocation(
        lam=float(lam), P=float(P), gamma=float(gamma),
        branch=branch_select(lam, gamma, P),
        D=float(_distortion(lam, gamma, P)),
        R=float(_rate(lam, gamma, P)),
        nu=float(_recon_variance(lam, gamma, P)),
        index=index,
    )


def zero_rate_distortion(lam: float, P: float) -> float:
    """Distortion reached as ``gamma -> inf``: ``lam + max(sqrt(lam) - sqrt(P), 0)**2``."""
    return float(_zero_rate_distortion(lam, P))


def bisect_increasing(func, target, lo, hi, rtol=GAMMA_RTOL, max_iter=MAX_BISECTION_ITER):
    """Solve ``func(x) = target`` for nondecreasing ``func`` on ``x > 0``.

    Bisects in ``log x`` (water levels span many decades). The bracket is
    grown geometrically: ``lo`` halved until ``func(lo) <= target`` and ``hi``
    doubled until ``func(hi) >= target``. Stops when ``hi / lo - 1 <= rtol``
    or ``func`` hits ``target`` exactly.
    """
    if not 0 < lo <= hi:
        raise ValueError("need 0 < lo <= hi")
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if func(lo) <= target:
            break
        lo, hi = lo / 2, lo
    else:
        raise NumericalError("could not bracket the target from below")
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if func(hi) >= target:
            break
        lo, hi = hi, 2 * hi
    else:
        raise NumericalError("could not bracket the target")
    for _ in range(max_iter):
        if hi - lo <= rtol * lo:
            break
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
        val = func(mid)
        if val == target:
            return mid
        if val < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_gamma_scalar(lam: float, D: float, P: float) -> float:
    """Water level at which ``distortion_at(lam, gamma, P) == D``.

    Returns ``inf`` when ``D`` equals the zero-rate distortion and that value
    is only reached asymptotically.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise ValueError(f"variance must be positive, got {lam}")
    if not P >= 0:
        raise ValueError(f"perception budget must be nonnegative, got {P}")
    d_max = zero_rate_distortion(lam, P)
    if not (D > 0 and D <= d_max * (1 + 1e-12)):
        raise FeasibilityError(
            f"distortion {D} outside the feasible range (0, {d_max}]", (0.0, d_max))
    if D >= d_max:
        if P >= lam:
            return lam
        return math.inf
    return bisect_increasing(lambda g: float(_distortion(lam, g, P)), D,
                             min(D, lam) * 1e-3, lam)


def scalar_rate(lam: float, D: float, P: float) -> float:
    """Rate-distortion-perception function of ``N(0, lam)`` in nats.

    Inverts :func:`distortion_at` over the water level numerically; there is
    no explicit closed form in ``(D, P)``.
    """
    gamma = solve_gamma_scalar(lam, D, P)
    if math.isinf(gamma):
        return 0.0
    return rate_at(lam, gamma, P)
