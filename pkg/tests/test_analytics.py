"""Closed forms, frozen against independently computed values.

The frozen numbers were produced by direct evaluation of the formulas and
cross-checked against series summation or the circuit simulation.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvdistill import analytics as an
from cvdistill.figures import FIG7_PANELS


MU = 0.32


# -- subtracted state ------------------------------------------------------------------


def test_subtracted_amplitudes_values():
    c = an.subtracted_amplitudes(0.4, 0.8, 3)
    assert c[0] == pytest.approx(math.sqrt(0.84) * 0.4 * 0.2, abs=1e-15)
    assert c[0] == pytest.approx(0.0733212, abs=1e-7)
    assert c[1] / c[0] == pytest.approx(2 * MU)


def test_subtracted_amplitudes_vanish_without_reflection():
    assert np.all(an.subtracted_amplitudes(0.4, 1.0, 5) == 0)


# -- two-copy output -------------------------------------------------------------------


def test_psi_out_prime_polynomials():
    n = np.arange(8)
    c, _ = an.psi_out_prime(0.4, 0.8, 1.0, 7)
    assert np.allclose(c / c[0], (n**2 + 3 * n + 4) * MU**n / 4)
    c0, _ = an.psi_out_prime(0.4, 0.8, 0.0, 7)
    assert np.allclose(c0 / c0[0], (n + 1) * (n + 2) * MU**n / 2)


def test_psi_out_prime_normalization():
    c, norm = an.psi_out_prime(0.4, 0.8, 1.0)
    assert norm == pytest.approx(0.03958, abs=1e-5)
    assert norm == pytest.approx(an.normalization_original(MU), rel=1e-13)
    assert float(c @ c) == pytest.approx(1.0, abs=1e-14)


@given(lam=st.floats(-0.95, 0.95), k2=st.floats(-0.9, 5.0))
@settings(max_examples=50, deadline=None)
def test_psi_out_prime_is_normalized(lam, k2):
    c, _ = an.psi_out_prime(lam, 0.9, k2)
    assert float(c @ c) == pytest.approx(1.0, abs=1e-10)


def test_original_success_probability():
    expected = 0.2**4 * 0.4**4 * 0.84**2 / (16 * 0.0395764796796)
    assert an.p_success_original(0.4, 0.8) == pytest.approx(expected, rel=1e-10)
    assert an.p_success_original(0.4, 0.8) == pytest.approx(4.5641654e-05, rel=1e-7)
    assert an.p_success_original(1e-6, 0.8) < 1e-20


def test_simplified_probability_gains_one_over_p_sigma():
    ratio = an.p_success_simplified(0.4, 0.8) / an.p_success_original(0.4, 0.8)
    assert ratio == pytest.approx(1 / 0.8454106280193237, rel=1e-13)


# -- variances -------------------------------------------------------------------------


def test_v_dist_values():
    assert an.v_dist(MU, 1.0) == pytest.approx(0.27549, abs=1e-5)
    assert an.v_dist(MU, 0.33189) == pytest.approx(0.25501, abs=1e-5)


def test_v_dist_large_kappa_limit():
    assert an.v_dist(MU, 1e8) == pytest.approx((1 - MU) / (1 + MU), abs=1e-7)


def test_v_dist_matches_series_at_unit_kappa():
    c, _ = an.psi_out_prime(0.4, 0.8, 1.0)
    assert an.series_variance(c) == pytest.approx(an.v_dist(MU, 1.0), abs=1e-10)


@pytest.mark.parametrize("k2", [-0.5, 0.0, 0.33, 2.0, 7.0])
def test_v_dist_matches_series(k2):
    c, _ = an.psi_out_prime(0.4, 0.8, k2)
    assert an.series_variance(c) == pytest.approx(an.v_dist(MU, k2), abs=1e-10)


def test_stationary_roots():
    plus, minus = an.kappa_stationary_roots(MU)
    assert plus == pytest.approx(0.33189, abs=1e-5)
    assert minus == pytest.approx(-1.65258, abs=1e-5)
    h = 1e-5
    for r in (plus, minus):
        assert abs((an.v_dist(MU, r + h) - an.v_dist(MU, r - h)) / (2 * h)) < 1e-6


def test_plus_root_is_local_minimum():
    plus, _ = an.kappa_stationary_roots(MU)
    v = an.v_dist(MU, plus)
    for k2 in np.linspace(plus - 0.3, plus + 0.3, 61):
        assert an.v_dist(MU, k2) >= v - 1e-15


def test_stationary_roots_flag_zero_mu():
    with pytest.warns(an.DegenerateParameterWarning):
        an.kappa_stationary_roots(0.0)


def test_reference_variances():
    assert an.v_sub_pure(MU) == pytest.approx(0.31178, abs=1e-5)
    assert an.v_inf_pure(0.4, 0.8) == pytest.approx(0.36 / 1.64)
    assert an.v_tmsv(0.4) == pytest.approx(0.6 / 1.4)
    assert an.v_tmsv(0.0) == an.v_sub_pure(0.0) == an.v_inf_pure(0.0, 0.8) == 1.0


def test_subtracted_variance_matches_series():
    c = an.subtracted_amplitudes(0.4, 0.8, an.series_nmax(MU))
    assert an.series_variance(c) == pytest.approx(an.v_sub_pure(MU), abs=1e-12)


def test_pure_metrics_bundle():
    m = an.pure_metrics(0.4, 0.8, 1.0)
    assert 0 < m.v_inf < m.v_dist < m.v_sub < m.v_in <= 1
    assert 0 < m.p_s < 1


# -- fidelity and omega ----------------------------------------------------------------


def test_fidelity_large_kappa_tends_to_one():
    assert an.fidelity_tmsv(MU, 1e9, MU) == pytest.approx(1.0, abs=1e-8)


def test_fidelity_at_zero_omega():
    k2 = 1.0
    den = MU**4 + 4 * MU**2 + (1 + k2 * (1 - MU**2) ** 2) ** 2
    assert an.fidelity_tmsv(MU, k2, 0.0) == pytest.approx((1 - MU**2) ** 5 * (1 + k2) ** 2 / den)


@pytest.mark.parametrize("k2", [0.0, 0.5, 1.0, 3.0])
def test_fidelity_matches_series_overlap(k2):
    c, _ = an.psi_out_prime(0.4, 0.8, k2)
    w = an.omega_star(MU, k2)
    ref = math.sqrt(1 - w**2) * w ** np.arange(len(c))
    assert float(c @ ref) ** 2 == pytest.approx(an.fidelity_tmsv(MU, k2, w), abs=1e-12)


def test_omega_star_values():
    assert an.omega_star(MU, 1.0) == pytest.approx(0.5765896241, abs=1e-9)
    assert an.omega_star(MU, 1e6) == pytest.approx(MU, abs=1e-5)
    # the cubic loses its leading terms at kappa2 = 0
    assert an.omega_star(MU, 0.0) == pytest.approx(0.6714549124, abs=1e-9)


@pytest.mark.parametrize("k2", [0.0, 0.3, 1.0, 2.5])
def test_omega_star_is_stationary(k2):
    w, h = an.omega_star(MU, k2), 1e-6
    d = (an.fidelity_tmsv(MU, k2, w + h) - an.fidelity_tmsv(MU, k2, w - h)) / (2 * h)
    assert abs(d) < 1e-7
    grid = np.linspace(-0.99, 0.99, 1999)
    assert an.fidelity_tmsv(MU, k2, w) >= max(an.fidelity_tmsv(MU, k2, g) for g in grid) - 1e-12


# -- entropies -------------------------------------------------------------------------


def test_tmsv_entropy():
    assert an.tmsv_entropy(0.4) == pytest.approx(0.52342, abs=1e-5)
    assert an.tmsv_entropy(0.0) == 0.0
    c = math.sqrt(0.84) * 0.4 ** np.arange(60)
    assert an.series_entropy(c) == pytest.approx(an.tmsv_entropy(0.4), abs=1e-12)


def test_entropy_decreases_with_kappa2():
    es = [an.series_entropy(an.psi_out_prime(0.4, 0.8, k2)[0]) for k2 in np.linspace(0, 3, 31)]
    assert np.all(np.diff(es) < 0)


# -- mixed inputs ----------------------------------------------------------------------


def test_mixed_metrics_values():
    m = an.mixed_metrics(0.4, 0.8, 0.8)
    assert m.v_in == pytest.approx(0.54286, abs=1e-5)
    assert m.mu_tilde == pytest.approx(0.336)
    assert m.eta_tilde == pytest.approx(0.76190, abs=1e-5)
    assert m.v_sub == pytest.approx(0.46494, abs=1e-5)
    assert m.v_inf == pytest.approx(0.39238, abs=1e-5)
    assert m.bound == pytest.approx(0.23810, abs=1e-5)


@pytest.mark.parametrize("lam,T", [(0.2, 0.6), (0.4, 0.8), (0.6, 0.7)])
def test_mixed_reduces_to_pure(lam, T):
    m = an.mixed_metrics(lam, 1.0, T)
    assert m.v_in == pytest.approx(an.v_tmsv(lam), abs=1e-15)
    assert m.v_sub == pytest.approx(an.v_sub_pure(T * lam), abs=1e-15)
    assert m.v_inf == pytest.approx(an.v_inf_pure(lam, T), abs=1e-15)
    assert m.eta_tilde == pytest.approx(1.0)


@pytest.mark.parametrize("lam,eta", FIG7_PANELS)
def test_asymptotic_variance_above_bound_on_panels(lam, eta):
    m = an.mixed_metrics(lam, eta, 0.8)
    assert m.v_inf >= m.bound


@given(lam=st.floats(0.01, 0.6), eta=st.floats(0.05, 1.0), T=st.floats(0.05, 0.8))
@settings(max_examples=80, deadline=None)
def test_asymptotic_variance_bound_property(lam, eta, T):
    m = an.mixed_metrics(lam, eta, T)
    assert m.v_inf >= m.bound - 1e-12


# -- generalized subtraction -----------------------------------------------------------


def test_generalized_zero_nu_polynomial():
    d1, d0 = an.generalized_polynomial(0.4, 0.0, 0.8)
    assert d1 == pytest.approx(3.0, abs=1e-12)
    assert d0 == pytest.approx(2.0, abs=1e-12)


def test_generalized_equal_parameters_is_tmsv_shaped():
    c = an.generalized_amplitudes(0.3, 0.3, 0.7, 10)
    assert np.allclose(c[1:] / c[:-1], 0.3)
    with pytest.raises(ValueError):
        an.generalized_polynomial(0.3, 0.3, 0.7)


def test_generalized_amplitudes_follow_polynomial():
    lam, nu, T = 0.4, 0.1, 0.8
    lt = T * lam + (1 - T) * nu
    d1, d0 = an.generalized_polynomial(lam, nu, T)
    c = an.generalized_amplitudes(lam, nu, T, 12)
    n = np.arange(13)
    shape = (n**2 + d1 * n + d0) * lt**n
    assert np.allclose(c / c[3], shape / shape[3], rtol=1e-12)


# -- multicopy -------------------------------------------------------------------------


def test_multicopy_m2_matches_two_copy_pattern():
    c = an.multicopy_amplitudes(0.4, 0.8, 2, 12)
    n = np.arange(13)
    assert np.allclose(c / (c[0] * MU**n), an.multicopy_polynomial_m2(n) / an.multicopy_polynomial_m2(0))
    ref, _ = an.psi_out_prime(0.4, 0.8, 1.0, 12)
    assert np.allclose(c / np.linalg.norm(c), ref, atol=1e-13)


def test_multicopy_requires_two_copies():
    with pytest.raises(ValueError):
        an.multicopy_amplitudes(0.4, 0.8, 1, 4)


def test_multicopy_fidelity_grows_with_copies():
    fids = [an.multicopy_fidelity(0.4, 0.8, M) for M in (2, 3, 4, 8, 16, 50)]
    assert fids == pytest.approx([0.984936, 0.990896, 0.993838, 0.997832, 0.999326, 0.999917], abs=1e-6)
    assert np.all(np.diff(fids) > 0)


def test_series_nmax_tail():
    n = an.series_nmax(MU)
    assert MU ** (2 * n) < 1e-16
    assert an.series_nmax(0.0) == 8
