import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from gprdpf.errors import DomainError
from gprdpf.kernels import (
    Domain,
    KernelSpec,
    SpectralDensitySpec,
    eval_kernel,
    eval_spectral_density,
    kernel_from_config,
    spectral_density_from_config,
    total_power,
)
from gprdpf.quadrature import FrequencyGrid

DOM = Domain(1.0, 16)


def all_kernels(domain=DOM):
    rng = np.random.default_rng(3)
    a = rng.standard_normal((domain.grid_size, domain.grid_size))
    return [
        KernelSpec.squared_exponential(2.0, 0.3, domain),
        KernelSpec.exponential_ou(1.0, 0.5, domain),
        KernelSpec.brownian(1.5, domain),
        KernelSpec.tabulated(a @ a.T / domain.grid_size, domain),
    ]


def test_brownian_is_min():
    k = KernelSpec.brownian(1.0, DOM)
    assert eval_kernel(k, 0.3, 0.7) == pytest.approx(0.3)


def test_squared_exponential_diagonal_is_variance():
    k = KernelSpec.squared_exponential(2.0, 1.0, DOM)
    assert eval_kernel(k, 0.5, 0.5) == 2.0


def test_ou_direct_value():
    k = KernelSpec.exponential_ou(1.0, 0.5, DOM)
    assert eval_kernel(k, 0.0, 0.5) == pytest.approx(math.exp(-1.0), abs=1e-15)


def test_out_of_domain_raises():
    k = KernelSpec.brownian(1.0, DOM)
    with pytest.raises(DomainError):
        eval_kernel(k, 1.5, 0.2)
    with pytest.raises(DomainError):
        eval_kernel(k, -0.1, 0.2)


@pytest.mark.parametrize("k", all_kernels(), ids=lambda k: k.family)
def test_symmetry_exact(k):
    rng = np.random.default_rng(11)
    for s, t in rng.uniform(0, 1, size=(10, 2)):
        assert eval_kernel(k, s, t) == eval_kernel(k, t, s)


@pytest.mark.parametrize("k", all_kernels(), ids=lambda k: k.family)
def test_gram_psd(k):
    x = np.linspace(0, 1, 16)
    g = k.gram(x)
    assert np.linalg.eigvalsh(g).min() >= -1e-10 * np.trace(g)


def test_tabulated_bilinear_hits_nodes_and_interpolates():
    dom = Domain(2.0, 3)
    table = np.array([[1.0, 0.5, 0.0], [0.5, 2.0, 1.0], [0.0, 1.0, 3.0]])
    k = KernelSpec.tabulated(table, dom)
    assert eval_kernel(k, 1.0, 2.0) == 1.0
    assert eval_kernel(k, 0.5, 0.0) == pytest.approx(0.75)
    # centre of the top-left cell averages its four corners
    assert eval_kernel(k, 0.5, 0.5) == pytest.approx((1.0 + 0.5 + 0.5 + 2.0) / 4)


def test_tabulated_rejects_asymmetric_and_wrong_shape():
    with pytest.raises(ValueError):
        KernelSpec.tabulated([[1.0, 0.2], [0.0, 1.0]], Domain(1.0, 2))
    with pytest.raises(ValueError):
        KernelSpec.tabulated(np.eye(3), Domain(1.0, 2))


def test_nonzero_mean_rejected():
    with pytest.raises(ValueError, match="zero-mean"):
        KernelSpec("brownian", {"scale": 1.0, "mean": 0.3}, DOM)


@pytest.mark.parametrize("bad", [{"scale": -1.0}, {"scale": 0.0}, {}, {"scale": 1.0, "typo": 2}])
def test_bad_params(bad):
    with pytest.raises(ValueError):
        KernelSpec("brownian", bad, DOM)


@pytest.mark.parametrize("T, n", [(0.0, 10), (-1.0, 10), (1.0, 1)])
def test_domain_invariants(T, n):
    with pytest.raises(ValueError):
        Domain(T, n)


def test_kernel_config_roundtrip():
    cfg = {"family": "exponential_ou", "params": {"variance": 1.0, "lengthscale": 0.5},
           "domain": {"T": 2.0, "grid_size": 64}}
    k = kernel_from_config(cfg)
    assert k.domain == Domain(2.0, 64)
    assert k.to_config() == cfg


# -- spectral densities ------------------------------------------------------

def test_rectangular_inside_and_outside():
    s = SpectralDensitySpec.rectangular(1.0, 0.5)
    assert eval_spectral_density(s, 0.25) == 1.0
    assert eval_spectral_density(s, 0.75) == 0.0


def test_lorentzian_at_zero():
    s = SpectralDensitySpec.lorentzian_ou(1.0, 1.0, f_max=10.0)
    assert eval_spectral_density(s, 0.0) == pytest.approx(2.0)


@pytest.mark.parametrize("f", [0.0, 0.05, 0.2, 1.0])
def test_lorentzian_is_fourier_transform_of_ou_kernel(f):
    var, ell = 1.3, 0.7
    # S(f) = 2 int_0^inf k(tau) cos(2 pi f tau) dtau
    val, _ = integrate.quad(lambda tau: var * math.exp(-tau / ell), 0, np.inf,
                            weight="cos", wvar=2 * math.pi * f) if f > 0 else \
        integrate.quad(lambda tau: var * math.exp(-tau / ell), 0, np.inf)
    s = SpectralDensitySpec.lorentzian_ou(var, ell, f_max=10.0)
    assert eval_spectral_density(s, f) == pytest.approx(2 * val, rel=1e-8)


def test_gaussian_shape_is_fourier_transform_of_se_kernel():
    var, w = 1.0, 0.4
    s = SpectralDensitySpec.gaussian_shape(var, w, f_max=3.0)
    # k(tau) = var exp(-2 pi^2 w^2 tau^2)
    for f in (0.0, 0.3, 0.8):
        val, _ = integrate.quad(lambda tau: var * math.exp(-2 * math.pi ** 2 * w * w * tau * tau)
                                * math.cos(2 * math.pi * f * tau), -np.inf, np.inf)
        assert eval_spectral_density(s, f) == pytest.approx(val, rel=1e-8)


SPECTRA = [
    SpectralDensitySpec.rectangular(1.0, 0.5),
    SpectralDensitySpec.lorentzian_ou(1.0, 1.0, f_max=5.0),
    SpectralDensitySpec.gaussian_shape(2.0, 0.3, f_max=1.5),
    SpectralDensitySpec.tabulated([0.0, 0.5, 1.0], [2.0, 1.0, 0.0]),
]


@pytest.mark.parametrize("s", SPECTRA, ids=lambda s: s.family)
def test_spectrum_even_and_nonnegative(s):
    f = np.linspace(0, 3, 151)
    v = eval_spectral_density(s, f)
    assert np.all(v >= 0)
    np.testing.assert_array_equal(v, eval_spectral_density(s, -f))


def test_tabulated_zero_beyond_fmax():
    s = SpectralDensitySpec.tabulated([0.0, 1.0, 2.0], [1.0, 1.0, 1.0], f_max=1.5)
    assert eval_spectral_density(s, 1.4) == 1.0
    assert eval_spectral_density(s, 1.6) == 0.0


def test_total_power_rectangular_box():
    rep = total_power(SpectralDensitySpec.rectangular(1.0, 0.5))
    assert rep.quadrature == pytest.approx(1.0, abs=1e-14)
    assert rep.analytic == 1.0 and rep.tail_mass == 0.0


def test_total_power_lorentzian_tends_to_variance():
    # arctan(2 pi f_max) -> pi/2 as f_max -> inf
    rep = total_power(SpectralDensitySpec.lorentzian_ou(1.0, 1.0, f_max=1e6))
    assert rep.analytic_full == 1.0
    assert rep.analytic == pytest.approx(1.0, abs=1e-6)
    assert rep.tail_mass == pytest.approx(1 / (math.pi ** 2 * 1e6), rel=1e-3)


def test_total_power_zero_table():
    rep = total_power(SpectralDensitySpec.tabulated([0.0, 1.0], [0.0, 0.0]))
    assert rep.quadrature == 0.0
    assert rep.tail_mass == 0.0


def test_total_power_table_tail_mass():
    s = SpectralDensitySpec.tabulated([0.0, 1.0, 2.0], [1.0, 1.0, 0.0], f_max=1.0)
    rep = total_power(s)
    assert rep.quadrature == pytest.approx(2.0)
    assert rep.tail_mass == pytest.approx(1.0)


@pytest.mark.parametrize("spec, size", [
    # f_max chosen so the band holds at least 99.99% of the analytic mass
    (SpectralDensitySpec.lorentzian_ou(1.0, 1.0, f_max=1100.0), 2 ** 17 + 1),
    (SpectralDensitySpec.gaussian_shape(1.0, 0.5, f_max=2.5), 4096),
    (SpectralDensitySpec.rectangular(3.0, 0.25, f_max=0.25), 4096),
])
def test_quadrature_matches_analytic(spec, size):
    rep = total_power(spec, spec.grid(size))
    assert rep.analytic >= 0.9999 * rep.analytic_full
    assert rep.quadrature == pytest.approx(rep.analytic, rel=1e-6)


def test_spectral_config_roundtrip():
    cfg = {"family": "gaussian_shape", "params": {"variance": 1.0, "width": 0.2},
           "spectrum": {"f_max": 1.0, "grid_size": 512}}
    s = spectral_density_from_config(cfg)
    assert s.to_config() == cfg


def test_spectral_config_needs_fmax_for_unbounded_family():
    with pytest.raises(ValueError, match="f_max"):
        spectral_density_from_config({"family": "lorentzian_ou",
                                      "params": {"variance": 1.0, "lengthscale": 1.0}})


def test_frequency_grid_invariants():
    g = FrequencyGrid.uniform(2.5, 101)
    assert np.all(np.diff(g.nodes) > 0)
    np.testing.assert_array_equal(g.nodes, -g.nodes[::-1])
    assert math.fsum(g.weights) == pytest.approx(5.0, abs=1e-12)
    with pytest.raises(ValueError):
        FrequencyGrid(np.array([0.0, 1.0]), np.array([0.5, 0.5]), 1.0)


@settings(max_examples=50, deadline=None)
@given(s=st.floats(0, 1), t=st.floats(0, 1),
       var=st.floats(0.1, 10), ell=st.floats(0.05, 5))
def test_kernel_symmetry_property(s, t, var, ell):
    for fam in ("squared_exponential", "exponential_ou"):
        k = KernelSpec(fam, {"variance": var, "lengthscale": ell}, DOM)
        assert eval_kernel(k, s, t) == eval_kernel(k, t, s)
        assert eval_kernel(k, s, t) <= var
