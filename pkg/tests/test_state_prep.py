import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvdistill.figures import FIG6_LAMBDAS, FIG6_SLICES
from cvdistill.fock_engine import DensityOperator, FockError, FockState, fock_basis_state, to_density, truncate
from cvdistill.measures import covariance_summary
from cvdistill.state_prep import (
    KappaRangeWarning,
    ProtocolParams,
    apply_loss_channel,
    attenuated_channel_params,
    loss_kraus,
    make_lossy_tmsv,
    make_sigma,
    make_squeezed_thermal,
    make_tmsv,
    nbar_approx,
    p_sigma,
    reduced_noise_params,
    thermal_params,
)


def tmsv_cov(lam):
    ch = (1 + lam**2) / (1 - lam**2)
    sh = 2 * lam / (1 - lam**2)
    z = np.diag([1.0, -1.0])
    return np.block([[ch * np.eye(2), sh * z], [sh * z, ch * np.eye(2)]])


# -- parameters ------------------------------------------------------------------------


def test_params_validation():
    with pytest.raises(FockError):
        ProtocolParams(1.0, 0.8)
    with pytest.raises(FockError):
        ProtocolParams(0.4, 1.0)
    with pytest.raises(FockError):
        ProtocolParams(0.4, 0.8, eta=0.0)
    with pytest.raises(FockError):
        ProtocolParams(0.4, 0.8, M=1)


def test_large_kappa_warns_but_is_kept():
    with pytest.warns(KappaRangeWarning):
        p = ProtocolParams(0.4, 0.8, kappa2=30.0)
    assert p.kappa2 == 30.0


def test_negative_kappa2_gives_imaginary_nu():
    p = ProtocolParams(0.4, 0.8, kappa2=-0.25)
    assert p.nu.real == 0
    assert p.nu.imag == pytest.approx(0.5 * 0.2 * 0.4)


def test_derived_params():
    p = ProtocolParams(0.4, 0.8)
    assert p.mu == pytest.approx(0.32)
    assert p.lambda_d == pytest.approx(0.64)
    assert p.convergent
    assert math.cos(p.theta) ** 2 == pytest.approx(0.8)


# -- TMSV ------------------------------------------------------------------------------


def test_tmsv_coefficients():
    st_ = make_tmsv(0.4, 14)
    assert st_.amplitude(0, 0) == pytest.approx(0.916515, abs=1e-6)
    assert st_.amplitude(1, 1) == pytest.approx(0.366606, abs=1e-6)
    assert st_.norm_deficit == pytest.approx(0.16**15, rel=1e-12)
    assert st_.squared_norm + st_.norm_deficit == pytest.approx(1.0, abs=1e-15)


def test_tmsv_zero_is_vacuum():
    st_ = make_tmsv(0.0, 4)
    assert st_.amplitude(0, 0) == 1
    assert st_.squared_norm == 1


def test_tmsv_rejects_unit_squeezing():
    with pytest.raises(FockError):
        make_tmsv(1.0, 4)


@given(lam=st.floats(-0.9, 0.9), cut=st.integers(1, 30))
@settings(max_examples=40, deadline=None)
def test_tmsv_norm_plus_deficit_is_one(lam, cut):
    st_ = make_tmsv(lam, cut)
    assert st_.squared_norm + st_.norm_deficit == pytest.approx(1.0, abs=1e-12)
    off = st_.amplitudes - np.diag(np.diag(st_.amplitudes))
    assert np.all(off == 0)


# -- squeezed thermal and loss ----------------------------------------------------------


def test_squeezed_thermal_zero_noise_is_tmsv():
    s = math.atanh(0.4)
    rho = make_squeezed_thermal(s, 0.0, 10)
    psi = make_tmsv(0.4, 10).amplitudes.reshape(-1)
    assert np.max(np.abs(rho.matrix - np.outer(psi, psi.conj()))) < 1e-12


def test_squeezed_thermal_zero_squeezing_is_product_thermal():
    rho = make_squeezed_thermal(0.0, 0.3, 8)
    assert np.max(np.abs(rho.matrix - np.diag(np.diag(rho.matrix)))) < 1e-15
    q = 0.3 / 1.3
    p = np.real(np.diag(rho.matrix)).reshape(9, 9)
    assert p[1, 2] == pytest.approx(q**3 / 1.3**2, rel=1e-10)


def test_squeezed_thermal_rejects_negative_noise():
    with pytest.raises(FockError):
        make_squeezed_thermal(0.1, -0.1, 4)


@pytest.mark.parametrize("s,nbar", [(0.1, 0.05), (0.3, 0.2), (0.0, 0.1), (0.2, 0.0)])
def test_squeezed_thermal_symplectic_eigenvalues(s, nbar):
    rho = make_squeezed_thermal(s, nbar, 24)
    ev = covariance_summary(rho).symplectic_eigenvalues()
    assert np.allclose(ev, 2 * nbar + 1, atol=1e-8)


def test_loss_identity():
    rho = to_density(make_tmsv(0.4, 5))
    out = apply_loss_channel(rho, 0, 1.0)
    assert np.array_equal(out.matrix, rho.matrix)


def test_loss_on_single_photon():
    out = apply_loss_channel(fock_basis_state([1], [2]), 0, 0.7)
    expected = np.diag([0.3, 0.7, 0.0])
    assert np.max(np.abs(out.matrix - expected)) < 1e-15


def test_loss_kraus_completeness():
    ops = loss_kraus(0.6, 7)
    total = sum(op.T @ op for op in ops)
    assert np.max(np.abs(total - np.eye(8))) < 1e-13


def test_loss_rejects_bad_eta():
    with pytest.raises(FockError):
        loss_kraus(1.2, 3)


def test_lossy_tmsv_covariance():
    rho = make_lossy_tmsv(0.4, 0.8, 30)
    cov = covariance_summary(rho).cov
    assert np.max(np.abs(cov - (0.8 * tmsv_cov(0.4) + 0.2 * np.eye(4)))) < 1e-9


def test_lossy_tmsv_pure_when_lossless():
    assert isinstance(make_lossy_tmsv(0.4, 1.0, 4), FockState)
    assert isinstance(make_lossy_tmsv(0.4, 0.9, 4), DensityOperator)


# -- ancilla state -----------------------------------------------------------------------


def test_sigma_pure_case():
    p = ProtocolParams(0.4, 0.8)
    sig = make_sigma(p, 12)
    assert np.allclose(sig.state.amplitudes, make_tmsv(0.08, 12).amplitudes)
    assert p_sigma(p) == pytest.approx(0.84 / (1 - 0.04 * 0.16))
    assert p_sigma(p) == pytest.approx(0.845411, abs=1e-6)


def test_sigma_attenuation_probability_matches_fock_sum():
    p = ProtocolParams(0.4, 0.8)
    att = make_sigma(p, 40, "attenuation")
    assert att.probability == pytest.approx(p_sigma(p), abs=1e-14)
    assert np.allclose(att.state.amplitudes, make_tmsv(0.08, 40).amplitudes, atol=1e-14)


def test_sigma_mixed_attenuation_probability():
    p = ProtocolParams(0.4, 0.8, 1.0, 0.8)
    att = make_sigma(p, 30, "attenuation")
    assert att.probability == pytest.approx(p_sigma(p), abs=1e-10)


def test_sigma_channel_parameters():
    nu, eta_p = attenuated_channel_params(ProtocolParams(0.4, 0.8, 1.0, 0.8))
    assert nu == pytest.approx(0.144)
    assert eta_p == pytest.approx(4 / 9)


def test_sigma_goes_to_vacuum_as_T_grows():
    sig = make_sigma(ProtocolParams(0.4, 1 - 1e-9), 6).state
    assert abs(sig.amplitude(0, 0)) == pytest.approx(1.0, abs=1e-12)


def test_sigma_attenuation_requires_unit_kappa():
    with pytest.raises(FockError):
        make_sigma(ProtocolParams(0.4, 0.8, 0.5), 6, "attenuation")


def test_sigma_unknown_construction():
    with pytest.raises(FockError):
        make_sigma(ProtocolParams(0.4, 0.8), 6, "magic")


def test_thermal_params_values():
    p = ProtocolParams(0.4, 0.8, 1.0, 0.8)
    d = thermal_params(p)
    assert math.tanh(2 * d.s) == pytest.approx(0.128296, abs=1e-6)
    assert d.nbar == pytest.approx(0.005202, abs=1e-6)
    assert nbar_approx(p) == pytest.approx(0.005228, abs=1e-6)
    assert abs(nbar_approx(p) - d.nbar) / d.nbar < 0.01


def test_thermal_params_lossless():
    assert thermal_params(ProtocolParams(0.4, 0.8)).nbar == 0.0


GRID3 = [(lam, eta, T) for lam in (0.2, 0.4, 0.6) for eta in (0.5, 0.8, 0.95) for T in (0.5, 0.7, 0.9)]


@pytest.mark.parametrize("lam,eta,T", GRID3)
def test_attenuation_and_channel_constructions_agree(lam, eta, T):
    p = ProtocolParams(lam, T, 1.0, eta)
    a = make_sigma(p, 16, "attenuation").state
    b = make_sigma(p, 16, "channel").state
    assert np.max(np.abs(covariance_summary(a).cov - covariance_summary(b).cov)) < 1e-8
    assert np.max(np.abs(truncate(a, (6, 6)).matrix - truncate(b, (6, 6)).matrix)) < 1e-7
    _, eta_p = attenuated_channel_params(p)
    assert eta_p <= eta


@given(lam=st.floats(0.01, 0.95), eta=st.floats(0.01, 1.0), T=st.floats(0.01, 0.99))
@settings(max_examples=60, deadline=None)
def test_eta_prime_never_exceeds_eta(lam, eta, T):
    _, eta_p = attenuated_channel_params(ProtocolParams(lam, T, 1.0, eta))
    assert eta_p <= eta + 1e-15


@pytest.mark.parametrize("lam,eta,T", [(0.4, 0.8, 0.8), (0.2, 0.6, 0.6), (0.6, 0.9, 0.7)])
def test_squeezed_thermal_reproduces_sigma(lam, eta, T):
    p = ProtocolParams(lam, T, 1.0, eta)
    d = thermal_params(p)
    rho = make_squeezed_thermal(d.s, d.nbar, 12)
    sig = make_sigma(p, 12, "channel").state
    assert np.max(np.abs(rho.matrix - sig.matrix)) < 1e-7


def test_reduced_noise_state_matches_sigma_squeezing():
    # TMSV(nu') through eta has the same tanh 2s as sigma but less noise
    p = ProtocolParams(0.4, 0.8, 1.0, 0.8)
    nbar_p, nu_p = reduced_noise_params(p)
    rho = make_lossy_tmsv(nu_p, 0.8, 24)
    ev = covariance_summary(rho).symplectic_eigenvalues()
    assert np.allclose(ev, 2 * nbar_p + 1, atol=1e-8)
    assert nbar_p < thermal_params(p).nbar


def test_reduced_noise_not_above_thermal_noise_on_figure_grid():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KappaRangeWarning)
        for lam in FIG6_LAMBDAS:
            for fixed in FIG6_SLICES:
                for x in np.linspace(0.01, 0.99, 50):
                    for eta, T in ((x, fixed), (fixed, x)):
                        p = ProtocolParams(lam, T, 1.0, eta)
                        assert reduced_noise_params(p)[0] <= thermal_params(p).nbar + 1e-15
