"""Rate, distortion and perception of stationary sources from the spectral density.

For a stationary source with power spectral density ``S`` and perception
levels proportional to the spectrum (``alpha * S(f)``), each frequency behaves
like an independent scalar coefficient of variance ``S(f)``. With
``b = (1 - sqrt(alpha))**2`` the frequency axis splits into

* ``RD`` frequencies, where ``S(f) * (1 - b) >= gamma``: classical
  water-filling, distortion ``min(gamma, S)``, rate ``max(0.5 log(S/gamma), 0)``;
* ``RDP`` frequencies (the rest): distortion
  ``gamma + S (1 + b) - sqrt(4 S**2 b + gamma**2)`` and rate
  ``0.5 log(2 S**2 b / (gamma (sqrt(gamma**2 + 4 S**2 b) - gamma)))``.

Integrating over frequency gives rate per unit time (nats), distortion and
perception ``alpha * int S``. Integrals run over ``[-f_max, f_max]`` with the
grid's quadrature rule and compensated summation in node order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import FeasibilityError
from .kernels import SpectralDensitySpec, eval_spectral_density
from .quadrature import FrequencyGrid
from .scalar_rdpf import Branch, bisect_increasing

__all__ = [
    "FrequencyGrid",
    "StationaryPoint",
    "partition_sets",
    "per_frequency_distortion",
    "per_frequency_rate",
    "stationary_point",
    "sweep",
    "solve_stationary",
]

# spectrum values below this contribute exactly zero (avoids 0 * log 0)
S_FLOOR = 1e-300
# default ranges for the (gamma, alpha) sweep
DEFAULT_GAMMA_RANGE = (0.01, 1.0, 50)
DEFAULT_ALPHA_RANGE = (0.0, 1.0, 11)
THREADS_ENV = "GPRDPF_THREADS"


@dataclass(frozen=True)
class StationaryPoint:
    """One point of the stationary parametric curve. Rate in nats per unit time."""

    alpha: float
    gamma: float
    rate: float
    distortion: float
    perception: float


def _check_alpha_gamma(gamma, alpha):
    if not (gamma > 0 and math.isfinite(gamma)):
        raise ValueError(f"water level must be positive and finite, got {gamma}")
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def _rd_mask(s_val, gamma, alpha):
    b = (1 - math.sqrt(alpha)) ** 2
    return s_val * (1 - b) >= gamma


def per_frequency_distortion(s_val, gamma: float, alpha: float):
    """Distortion density at a frequency where the spectrum equals ``s_val``."""
    _check_alpha_gamma(gamma, alpha)
    s_val = np.asarray(s_val, dtype=float)
    b = (1 - math.sqrt(alpha)) ** 2
    q = 4 * s_val * s_val * b
    # gamma + x(1+b) - sqrt(q + gamma^2), without the cancellation
    d_hat = s_val * (1 + b) - q / (np.sqrt(q + gamma * gamma) + gamma)
    out = np.where(_rd_mask(s_val, gamma, alpha), np.minimum(gamma, s_val), d_hat)
    out = np.where(s_val < S_FLOOR, 0.0, out)
    return float(out) if out.ndim == 0 else out


def per_frequency_rate(s_val, gamma: float, alpha: float):
    """Rate density (nats) at a frequency where the spectrum equals ``s_val``."""
    _check_alpha_gamma(gamma, alpha)
    s_val = np.asarray(s_val, dtype=float)
    b = (1 - math.sqrt(alpha)) ** 2
    q = 4 * s_val * s_val * b
    r_rdp = 0.5 * np.log((gamma + np.sqrt(gamma * gamma + q)) / (2 * gamma))
    with np.errstate(divide="ignore"):
        r_rd = np.maximum(0.5 * np.log(s_val / gamma), 0.0)
    out = np.where(_rd_mask(s_val, gamma, alpha), r_rd, r_rdp)
    out = np.where(s_val < S_FLOOR, 0.0, out)
    return float(out) if out.ndim == 0 else out


def partition_sets(S: SpectralDensitySpec, gamma: float, alpha: float,
                   grid: FrequencyGrid | None = None) -> np.ndarray:
    """Branch label per grid node: ``"RD"`` or ``"RDP"``."""
    _check_alpha_gamma(gamma, alpha)
    grid = S.grid() if grid is None else grid
    mask = _rd_mask(eval_spectral_density(S, grid.nodes), gamma, alpha)
    return np.where(mask, Branch.RD.value, Branch.RDP.value)


def stationary_point(S: SpectralDensitySpec, gamma: float, alpha: float,
                     grid: FrequencyGrid | None = None) -> StationaryPoint:
    grid = S.grid() if grid is None else grid
    s_val = eval_spectral_density(S, grid.nodes)
    return _point(s_val, grid, gamma, alpha, grid.integrate(s_val))


def _point(s_val, grid, gamma, alpha, power):
    return StationaryPoint(
        alpha=float(alpha),
        gamma=float(gamma),
        rate=grid.integrate(per_frequency_rate(s_val, gamma, alpha)),
        distortion=grid.integrate(per_frequency_distortion(s_val, gamma, alpha)),
        perception=alpha * power,
    )


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


def sweep(S: SpectralDensitySpec, gamma_grid, alpha_grid,
          grid: FrequencyGrid | None = None, threads: int | None = None) -> list[StationaryPoint]:
    """Evaluate every ``(alpha, gamma)`` pair, alpha in the outer loop.

    ``threads`` (default: ``$GPRDPF_THREADS`` or 1) only changes how the work
    is scheduled; the output order and values are identical.
    """
    gamma_grid = [float(g) for g in gamma_grid]
    alpha_grid = [float(a) for a in alpha_grid]
    if not gamma_grid or not alpha_grid:
        raise ValueError("empty parameter grid")
    for a in alpha_grid:
        for g in gamma_grid:
            _check_alpha_gamma(g, a)
    grid = S.grid() if grid is None else grid
    s_val = eval_spectral_density(S, grid.nodes)
    power = grid.integrate(s_val)
    pairs = [(a, g) for a in alpha_grid for g in gamma_grid]
    n = _threads(threads)
    if n == 1:
        return [_point(s_val, grid, g, a, power) for a, g in pairs]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda ag: _point(s_val, grid, ag[1], ag[0], power), pairs))


def solve_stationary(S: SpectralDensitySpec, D_target: float, P_target: float,
                     grid: FrequencyGrid | None = None) -> StationaryPoint:
    """Point with perception ``P_target`` and distortion ``D_target``.

    ``alpha = min(P_target / power, 1)`` exactly; ``gamma`` by bisection on the
    (nondecreasing) distortion.
    """
    grid = S.grid() if grid is None else grid
    s_val = eval_spectral_density(S, grid.nodes)
    power = grid.integrate(s_val)
    if not power > 0:
        raise ValueError("spectrum has no power on the grid")
    if not P_target >= 0:
        raise ValueError(f"perception target must be nonnegative, got {P_target}")
    alpha = min(P_target / power, 1.0)
    b = (1 - math.sqrt(alpha)) ** 2
    d_max = (1 + b) * power if alpha < 1 else power
    if not 0 < D_target < d_max:
        raise FeasibilityError(
            f"distortion target {D_target} outside the feasible range (0, {d_max})", (0.0, d_max))

    def dist(g):
        return grid.integrate(per_frequency_distortion(s_val, g, alpha))

    gamma = bisect_increasing(dist, D_target, 1e-3 * D_target / (2 * grid.f_max), float(np.max(s_val)))
    return _point(s_val, grid, gamma, alpha, power)

