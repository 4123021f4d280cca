import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvdistill.fock_engine import (
    DensityOperator,
    FockError,
    FockState,
    HeraldImpossibleError,
    KindMismatchError,
    apply_annihilation,
    apply_beam_splitter,
    apply_exponential_number,
    apply_phase,
    block_unitary,
    fock_basis_state,
    normalize,
    pad,
    partial_trace,
    permute_modes,
    project_mode,
    select_mode,
    tensor_product,
    to_density,
    truncate,
    vacuum,
)
from cvdistill.state_prep import make_tmsv


def random_state(rng, cutoffs, max_total=None):
    amps = rng.normal(size=[c + 1 for c in cutoffs]) + 1j * rng.normal(size=[c + 1 for c in cutoffs])
    if max_total is not None:
        amps[np.indices(amps.shape).sum(axis=0) > max_total] = 0
    return FockState(amps / np.linalg.norm(amps))


def random_density(rng, cutoffs, rank=3):
    dim = int(np.prod([c + 1 for c in cutoffs]))
    x = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = x @ x.conj().T
    return DensityOperator(rho / np.trace(rho).real, tuple(cutoffs))


# -- construction ----------------------------------------------------------------


def test_shape_matches_cutoffs():
    st_ = fock_basis_state([1, 2, 0], [2, 3, 1])
    assert st_.amplitudes.shape == (3, 4, 2)
    assert st_.cutoffs == (2, 3, 1)
    assert st_.amplitude(1, 2, 0) == 1


def test_basis_state_rejects_photons_above_cutoff():
    with pytest.raises(FockError):
        fock_basis_state([3], [2])


def test_negative_deficit_rejected():
    with pytest.raises(FockError):
        FockState(np.ones(2), -1.0)


def test_density_shape_checked():
    with pytest.raises(FockError):
        DensityOperator(np.eye(3), (1, 1))


def test_amplitudes_are_read_only():
    st_ = vacuum([1, 1])
    with pytest.raises(ValueError):
        st_.amplitudes[0, 0] = 2


# -- tensor product ----------------------------------------------------------------


def test_vacuum_product():
    st_ = tensor_product(vacuum([2]), vacuum([3]))
    assert st_.cutoffs == (2, 3)
    assert st_.amplitude(0, 0) == 1


def test_tmsv_times_vacuum_support():
    st_ = tensor_product(make_tmsv(0.4, 6), vacuum([2, 2]))
    nz = np.argwhere(np.abs(st_.amplitudes) > 0)
    assert all(a == b and c == 0 and d == 0 for a, b, c, d in nz)


def test_product_of_two_tmsv_amplitude():
    st_ = tensor_product(make_tmsv(0.4, 3), make_tmsv(0.144, 3))
    expected = math.sqrt(0.84) * 0.4 * math.sqrt(1 - 0.144**2) * 0.144
    assert st_.amplitude(1, 1, 1, 1) == pytest.approx(expected, abs=1e-15)


def test_product_kind_mismatch():
    with pytest.raises(KindMismatchError):
        tensor_product(vacuum([1]), to_density(vacuum([1])))


def test_product_norm_multiplicative():
    rng = np.random.default_rng(0)
    a = FockState(2 * random_state(rng, [2]).amplitudes)
    b = FockState(3 * random_state(rng, [3]).amplitudes)
    assert tensor_product(a, b).squared_norm == pytest.approx(36.0)


# -- beam splitter ----------------------------------------------------------------------


def test_single_photon_on_balanced_splitter():
    out = apply_beam_splitter(fock_basis_state([1, 0], [1, 1]), 0, 1, math.pi / 4)
    s = 1 / math.sqrt(2)
    assert out.amplitude(1, 0) == pytest.approx(s)
    assert out.amplitude(0, 1) == pytest.approx(-s)


@pytest.mark.parametrize("theta", [0.0, 0.4, math.pi / 4, -1.3, 2.0])
def test_vacuum_is_stable(theta):
    out = apply_beam_splitter(vacuum([3, 3]), 0, 1, theta)
    assert out.amplitude(0, 0) == pytest.approx(1.0)
    assert out.norm_deficit == 0


def test_hong_ou_mandel():
    out = apply_beam_splitter(fock_basis_state([1, 1], [2, 2]), 0, 1, math.pi / 4)
    assert abs(out.amplitude(1, 1)) < 1e-15
    assert abs(out.amplitude(2, 0)) == pytest.approx(1 / math.sqrt(2))


def test_equal_modes_rejected():
    with pytest.raises(FockError):
        apply_beam_splitter(vacuum([1, 1]), 1, 1, 0.3)


def test_out_of_range_mode_rejected():
    with pytest.raises(FockError):
        apply_beam_splitter(vacuum([1, 1]), 0, 2, 0.3)


@given(total=st.integers(0, 12), theta=st.floats(-3.2, 3.2))
@settings(max_examples=40, deadline=None)
def test_block_unitary_is_orthogonal(total, theta):
    u = block_unitary(total, theta)
    assert np.max(np.abs(u @ u.T - np.eye(total + 1))) < 1e-12


def test_block_unitary_composes():
    assert np.allclose(block_unitary(5, 0.3) @ block_unitary(5, 0.5), block_unitary(5, 0.8), atol=1e-13)


def test_splitter_preserves_norm_when_support_is_low():
    rng = np.random.default_rng(1)
    st_ = random_state(rng, [8, 8], max_total=4)
    out = apply_beam_splitter(st_, 0, 1, 0.7)
    assert out.squared_norm == pytest.approx(1.0, abs=1e-12)
    assert out.norm_deficit < 1e-15


def test_splitter_never_mixes_photon_sectors():
    rng = np.random.default_rng(2)
    st_ = random_state(rng, [5, 5])
    out = apply_beam_splitter(st_, 0, 1, 0.9, count_loss=True)
    total = np.indices(st_.amplitudes.shape).sum(axis=0)
    for n in range(11):
        mask = total == n
        before = np.sum(np.abs(st_.amplitudes[mask]) ** 2)
        after = np.sum(np.abs(out.amplitudes[mask]) ** 2)
        if n <= 5:
            assert after == pytest.approx(before, abs=1e-12)
        else:
            assert after <= before + 1e-12


def test_truncation_loss_goes_into_deficit():
    st_ = fock_basis_state([3, 0], [3, 3])
    out = apply_beam_splitter(truncate(st_, [3, 1]), 0, 1, math.pi / 4)
    assert out.squared_norm + out.norm_deficit == pytest.approx(1.0, abs=1e-12)
    assert out.norm_deficit > 0


def test_density_splitter_matches_ket():
    rng = np.random.default_rng(3)
    psi = random_state(rng, [3, 3], max_total=3)
    via_ket = to_density(apply_beam_splitter(psi, 0, 1, 0.6))
    via_rho = apply_beam_splitter(to_density(psi), 0, 1, 0.6)
    assert np.max(np.abs(via_ket.matrix - via_rho.matrix)) < 1e-13


def test_reordering_identity_random_states():
    # balanced splitter on the signals commutes past the subtraction splitters
    # when it is moved to the ancillas (with the inverse angle)
    theta = -math.acos(math.sqrt(0.7))
    rng = np.random.default_rng(4)
    for _ in range(3):
        st_ = random_state(rng, [5, 5, 5, 5], max_total=5)
        lhs = apply_beam_splitter(st_, 2, 3, -math.pi / 4, count_loss=False)
        lhs = apply_beam_splitter(lhs, 0, 2, theta, count_loss=False)
        lhs = apply_beam_splitter(lhs, 1, 3, theta, count_loss=False)
        lhs = apply_beam_splitter(lhs, 0, 1, math.pi / 4, count_loss=False)
        rhs = apply_beam_splitter(st_, 0, 1, math.pi / 4, count_loss=False)
        rhs = apply_beam_splitter(rhs, 0, 2, theta, count_loss=False)
        rhs = apply_beam_splitter(rhs, 1, 3, theta, count_loss=False)
        rhs = apply_beam_splitter(rhs, 2, 3, -math.pi / 4, count_loss=False)
        assert np.max(np.abs(lhs.amplitudes - rhs.amplitudes)) < 1e-9


def test_two_tmsv_copies_invariant_under_balanced_splitters():
    lam, cut = 0.4, 10
    pair = permute_modes(tensor_product(make_tmsv(lam, cut), make_tmsv(lam, cut)), [0, 2, 1, 3])
    out = apply_beam_splitter(apply_beam_splitter(pair, 0, 1, math.pi / 4), 2, 3, math.pi / 4)
    k = cut // 2 + 1
    idx = (slice(0, k),) * 4
    assert np.max(np.abs(out.amplitudes[idx] - pair.amplitudes[idx])) < 1e-12


# -- mode operators ---------------------------------------------------------------------


def test_annihilation_on_one_photon():
    out = apply_annihilation(fock_basis_state([1], [2]), 0)
    assert out.amplitude(0) == pytest.approx(1.0)


def test_annihilation_on_vacuum_is_zero():
    assert apply_annihilation(vacuum([3]), 0).squared_norm == 0


def test_annihilation_on_tmsv():
    lam = 0.4
    out = apply_annihilation(make_tmsv(lam, 8), 0)
    for n in range(7):
        assert out.amplitude(n, n + 1) == pytest.approx(math.sqrt(0.84) * lam ** (n + 1) * math.sqrt(n + 1))
    assert abs(out.amplitude(8, 8)) == 0


def test_exponential_number_identity_and_scaling():
    st_ = make_tmsv(0.4, 5)
    assert np.allclose(apply_exponential_number(st_, 0, 1.0).amplitudes, st_.amplitudes)
    out = apply_exponential_number(fock_basis_state([2], [3]), 0, 0.64)
    assert out.amplitude(2) == pytest.approx(0.64)


def test_exponential_number_rejects_nonpositive_base():
    with pytest.raises(FockError):
        apply_exponential_number(vacuum([2]), 0, 0.0)


def test_attenuation_of_tmsv_gives_smaller_tmsv():
    lam, T = 0.4, 0.8
    st_ = make_tmsv(lam, 40)
    for mode in (0, 1):
        st_ = apply_exponential_number(st_, mode, 1 - T)
    p_sigma = (1 - lam**2) / (1 - (1 - T) ** 2 * lam**2)
    assert st_.squared_norm == pytest.approx(p_sigma, abs=1e-14)
    assert p_sigma == pytest.approx(0.845411, abs=1e-6)
    out, _ = normalize(st_)
    assert np.allclose(out.amplitudes, make_tmsv((1 - T) * lam, 40).amplitudes, atol=1e-14)


def test_phase_is_diagonal():
    out = apply_phase(fock_basis_state([2], [3]), 0, 0.5)
    assert out.amplitude(2) == pytest.approx(np.exp(1j * 1.0))


# -- projection, normalization, traces --------------------------------------------------


def test_project_tmsv_on_vacuum():
    res = project_mode(make_tmsv(0.4, 30), 1, 0)
    assert res.probability == pytest.approx(0.84)
    assert res.state.amplitude(0) == pytest.approx(1.0)


@pytest.mark.parametrize("k", [0, 1, 3])
def test_project_tmsv_correlation(k):
    res = project_mode(make_tmsv(0.4, 40), 1, k)
    assert abs(res.state.amplitude(k)) == pytest.approx(1.0)
    assert res.probability == pytest.approx(0.84 * 0.16**k, rel=1e-9)


def test_project_impossible_outcome():
    with pytest.raises(HeraldImpossibleError):
        project_mode(fock_basis_state([0, 0], [2, 2]), 1, 2)


def test_project_outcome_beyond_cutoff():
    with pytest.raises(FockError):
        select_mode(vacuum([1, 1]), 0, 2)


def test_projection_commutes_with_global_phase():
    rng = np.random.default_rng(5)
    st_ = random_state(rng, [3, 3])
    rotated = FockState(np.exp(0.7j) * st_.amplitudes)
    a = to_density(project_mode(st_, 1, 1).state).matrix
    b = to_density(project_mode(rotated, 1, 1).state).matrix
    assert np.allclose(a, b, atol=1e-14)


def test_normalize():
    st_, norm = normalize(FockState(2 * vacuum([1]).amplitudes))
    assert norm == pytest.approx(2.0)
    assert st_.amplitude(0) == pytest.approx(1.0)
    again, norm1 = normalize(st_)
    assert norm1 == pytest.approx(1.0)
    with pytest.raises(FockError):
        normalize(FockState(np.zeros(3)))


def test_normalize_density_returns_trace():
    rho = DensityOperator(0.5 * np.eye(2) * 0.5, (1,))
    out, tr = normalize(rho)
    assert tr == pytest.approx(0.5)
    assert out.trace == pytest.approx(1.0)


def test_partial_trace_of_vacuum():
    red = partial_trace(to_density(vacuum([2, 2])), [0])
    assert red.matrix[0, 0] == pytest.approx(1.0)
    assert red.trace == pytest.approx(1.0)


def test_partial_trace_of_tmsv_is_thermal():
    red = partial_trace(make_tmsv(0.4, 20), [0])
    p = np.real(np.diag(red.matrix))
    assert np.allclose(p[:10], 0.84 * 0.16 ** np.arange(10), atol=1e-15)
    assert np.max(np.abs(red.matrix - np.diag(np.diag(red.matrix)))) < 1e-15


def test_partial_trace_of_product():
    rng = np.random.default_rng(6)
    rho, sigma = random_density(rng, [2]), random_density(rng, [3])
    red = partial_trace(tensor_product(rho, sigma), [0])
    assert np.max(np.abs(red.matrix - rho.matrix)) < 1e-12
    red = partial_trace(tensor_product(rho, sigma), [1])
    assert np.max(np.abs(red.matrix - sigma.matrix)) < 1e-12


def test_partial_trace_preserves_trace_and_hermiticity():
    rng = np.random.default_rng(7)
    rho = random_density(rng, [2, 2, 1])
    red = partial_trace(rho, [2, 0])
    assert red.trace == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(red.matrix - red.matrix.conj().T)) < 1e-12
    assert np.linalg.eigvalsh(red.matrix).min() > -1e-9


def test_partial_trace_errors():
    with pytest.raises(FockError):
        partial_trace(to_density(vacuum([1, 1])), [])


def test_truncate_and_pad_roundtrip():
    st_ = make_tmsv(0.4, 6)
    cut = truncate(st_, [3, 3])
    dropped = st_.squared_norm - float(np.sum(np.abs(st_.amplitudes[:4, :4]) ** 2))
    assert cut.norm_deficit == pytest.approx(st_.norm_deficit + dropped, rel=1e-9)
    back = pad(cut, [6, 6])
    assert back.cutoffs == (6, 6)
    assert np.allclose(back.amplitudes[:4, :4], st_.amplitudes[:4, :4])


def test_deficit_nondecreasing_along_a_circuit():
    st_ = tensor_product(make_tmsv(0.6, 6), vacuum([3, 3]))
    deficits = [st_.norm_deficit]
    for i, j in ((0, 2), (1, 3), (0, 1)):
        st_ = apply_beam_splitter(st_, i, j, 0.5)
        deficits.append(st_.norm_deficit)
    assert all(b >= a for a, b in zip(deficits, deficits[1:]))


def test_density_flattening_is_row_major():
    psi = fock_basis_state([1, 0], [1, 2])
    rho = to_density(psi)
    assert rho.matrix[3, 3] == 1  # index 1*3 + 0


def test_permute_modes():
    st_ = fock_basis_state([1, 2, 0], [1, 2, 3])
    out = permute_modes(st_, [2, 0, 1])
    assert out.cutoffs == (3, 1, 2)
    assert out.amplitude(0, 1, 2) == 1
