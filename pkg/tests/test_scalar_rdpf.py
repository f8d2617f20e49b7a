import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from gprdpf.errors import FeasibilityError
from gprdpf.scalar_rdpf import (
    Branch,
    allocate,
    branch_select,
    distortion_at,
    rate_at,
    reconstruction_variance,
    scalar_rate,
    solve_gamma_scalar,
    w2_scalar,
    zero_rate_distortion,
)

from oracles import gamma_for_distortion, raw_rd_branch, raw_rdp_branch

HALF_LN_4_3 = 0.5 * math.log(4 / 3)

lams = st.floats(1e-3, 1e3)
fractions = st.floats(0.0, 1.0)


@pytest.mark.parametrize("lam, gamma, P, expected", [
    (1.0, 1.0, 1.0, Branch.RD),
    (1.0, 1.5, 0.0, Branch.RDP),
    (1.0, 0.19, 0.01, Branch.RD),
    (1.0, 0.5, 0.0, Branch.RDP),
])
def test_branch_select(lam, gamma, P, expected):
    assert branch_select(lam, gamma, P) is expected


@pytest.mark.parametrize("args", [(0.0, 1.0, 0.0), (-1.0, 1.0, 0.0), (1.0, 0.0, 0.0),
                                  (1.0, -1.0, 0.0), (1.0, 1.0, -0.1), (1.0, math.nan, 0.0)])
@pytest.mark.parametrize("fn", [branch_select, distortion_at, rate_at, reconstruction_variance])
def test_argument_errors(fn, args):
    with pytest.raises(ValueError):
        fn(*args)


def test_perfect_realism_anchor():
    assert distortion_at(1.0, 1.5, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert rate_at(1.0, 1.5, 0.0) == pytest.approx(HALF_LN_4_3, abs=1e-15)
    assert reconstruction_variance(1.0, 1.5, 0.0) == 1.0


@pytest.mark.parametrize("lam, gamma, P, D, R, nu", [
    (1.0, 0.5, 1.0, 0.5, 0.5 * math.log(2), 0.5),
    (1.0, 1.0, 1.0, 1.0, 0.0, 0.0),
    (1.0, 2.0, 1.0, 1.0, 0.0, 0.0),
])
def test_classical_examples(lam, gamma, P, D, R, nu):
    a = allocate(lam, gamma, P)
    assert a.D == pytest.approx(D, abs=1e-15)
    assert a.R == pytest.approx(R, abs=1e-15)
    assert a.nu == pytest.approx(nu, abs=1e-15)


def test_zero_rate_limit():
    assert distortion_at(1.0, 1e12, 0.0) == pytest.approx(2.0, rel=1e-10)
    assert zero_rate_distortion(1.0, 0.0) == 2.0
    assert zero_rate_distortion(1.0, 4.0) == 1.0


@pytest.mark.parametrize("lam, nu, expected", [(0.7, 0.7, 0.0), (4.0, 1.0, 1.0), (1.0, 0.0, 1.0)])
def test_w2_scalar(lam, nu, expected):
    assert w2_scalar(lam, nu) == pytest.approx(expected, abs=1e-15)


def test_w2_rejects_negative():
    with pytest.raises(ValueError):
        w2_scalar(-1.0, 1.0)


@pytest.mark.parametrize("lam, D, P, expected", [
    (1.0, 1.0, 0.0, HALF_LN_4_3),
    (1.0, 0.5, 1.0, 0.5 * math.log(2)),
    (1.0, 2.0, 0.0, 0.0),
])
def test_scalar_rate_examples(lam, D, P, expected):
    assert scalar_rate(lam, D, P) == pytest.approx(expected, abs=1e-6)


def test_solve_gamma_recovers_anchor():
    assert solve_gamma_scalar(1.0, 1.0, 0.0) == pytest.approx(1.5, rel=1e-11)


@pytest.mark.parametrize("D", [0.0, -1.0, 2.1])
def test_scalar_rate_infeasible(D):
    with pytest.raises(FeasibilityError) as info:
        scalar_rate(1.0, D, 0.0)
    assert info.value.valid_range == (0.0, 2.0)


def test_stable_forms_agree_with_raw_formulas():
    rng = np.random.default_rng(5)
    for _ in range(200):
        lam = 10 ** rng.uniform(-2, 2)
        P = lam * rng.uniform(0, 0.9)
        gamma = lam * 10 ** rng.uniform(-1, 1)
        if branch_select(lam, gamma, P) is Branch.RDP:
            D_raw, R_raw = raw_rdp_branch(lam, gamma, P)
        else:
            D_raw, R_raw = raw_rd_branch(lam, gamma)
        assert distortion_at(lam, gamma, P) == pytest.approx(D_raw, rel=1e-9, abs=1e-12 * lam)
        assert rate_at(lam, gamma, P) == pytest.approx(R_raw, rel=1e-9, abs=1e-12)


def test_stable_form_large_gamma_no_cancellation():
    # the raw radical loses every digit here; the stable form still gives the 2 lam limit
    lam, gamma = 1.0, 1e17
    assert distortion_at(lam, gamma, 0.0) == pytest.approx(2.0 - 2 / gamma * 1.0, rel=1e-12)
    assert rate_at(lam, gamma, 0.0) == pytest.approx(1 / gamma ** 2, rel=1e-6)


def _switch(lam, frac):
    """Branch-switch water level for P = frac * lam (P < lam)."""
    u = math.sqrt(lam) - math.sqrt(frac * lam)
    return lam - u * u


@settings(max_examples=100, deadline=None)
@given(lam=lams, frac=st.floats(1e-6, 0.999))
def test_branch_continuity_property(lam, frac):
    P = frac * lam
    g = _switch(lam, frac)
    d_rd, r_rd = raw_rd_branch(lam, g)
    d_rdp, r_rdp = raw_rdp_branch(lam, g, P)
    assert d_rd == pytest.approx(d_rdp, abs=1e-9 * max(lam, 1.0))
    assert r_rd == pytest.approx(r_rdp, abs=1e-9)
    eps = 1e-10
    assert distortion_at(lam, g * (1 - eps), P) == pytest.approx(
        distortion_at(lam, g * (1 + eps), P), abs=1e-8 * lam)
    assert rate_at(lam, g * (1 - eps), P) == pytest.approx(rate_at(lam, g * (1 + eps), P), abs=1e-8)


GRID20 = np.geomspace(1e-2, 1e2, 20)


def test_dominance_and_feasibility_grid():
    for lam in GRID20:
        for gamma in GRID20:
            for P in np.linspace(0, 1.5, 20) * lam:
                r = rate_at(lam, gamma, P)
                assert r >= max(0.5 * math.log(lam / gamma), 0.0) - 1e-15
                nu = reconstruction_variance(lam, gamma, P)
                assert w2_scalar(lam, nu) <= P + 1e-12
                d = distortion_at(lam, gamma, P)
                assert 0 <= d <= zero_rate_distortion(lam, P) * (1 + 1e-15)


@pytest.mark.parametrize("lam", [0.3, 1.0, 7.0])
def test_monotone_inversion_grid(lam):
    Ps = np.linspace(0, lam, 20)
    Ds = np.linspace(0.02, 0.99, 20) * lam
    rates = np.array([[scalar_rate(lam, D, P) for D in Ds] for P in Ps])
    assert np.all(np.diff(rates, axis=1) <= 1e-12)
    assert np.all(np.diff(rates, axis=0) <= 1e-12)


@pytest.mark.parametrize("lam", [0.01, 1.0, 100.0])
@pytest.mark.parametrize("frac", [0.0, 0.2, 0.9, 1.0, 3.0])
def test_zero_rate_bound(lam, frac):
    P = frac * lam
    assert distortion_at(lam, 1e8 * lam, P) == pytest.approx(zero_rate_distortion(lam, P), rel=1e-4)


def test_distortion_increasing_in_gamma():
    gammas = np.geomspace(1e-3, 1e3, 200)
    for P in (0.0, 0.1, 0.5):
        d = [distortion_at(1.0, g, P) for g in gammas]
        assert np.all(np.diff(d) >= 0)


@settings(max_examples=200, deadline=None)
@given(lam=lams, pfrac=st.floats(0.0, 1.2), dfrac=st.floats(1e-4, 0.999))
def test_inversion_matches_closed_form_oracle(lam, pfrac, dfrac):
    P = pfrac * lam
    D = dfrac * zero_rate_distortion(lam, P)
    g_oracle = gamma_for_distortion(lam, D, P)
    assume(g_oracle > 0 and math.isfinite(g_oracle))
    g = solve_gamma_scalar(lam, D, P)
    assert g == pytest.approx(g_oracle, rel=1e-9)
    assert distortion_at(lam, g, P) == pytest.approx(D, rel=1e-10)


def test_saturation_returns_inf_or_lambda():
    assert solve_gamma_scalar(1.0, 2.0, 0.0) == math.inf
    assert solve_gamma_scalar(1.0, 1.0, 1.0) == 1.0


def test_allocation_invariants():
    a = allocate(2.0, 0.4, 0.1, index=3)
    assert a.index == 3
    assert a.w2 <= a.P + 1e-12
    assert a.R >= 0
    assert str(a.branch) in ("RD", "RDP")
