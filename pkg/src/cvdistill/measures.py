"""Figures of merit for two-mode states.

Quadratures follow ``x = (a + a^+)/sqrt(2)``, ``p = i(a^+ - a)/sqrt(2)``, and
covariance matrices are normalized so that the vacuum gives the identity.
Entropies are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock_engine import (
    DensityOperator,
    FockError,
    FockState,
    State,
    lowering_matrix,
    normalize,
    partial_trace,
    to_density,
)
from .state_prep import make_squeezed_thermal, make_tmsv

EIGEN_FLOOR = 1e-14


@dataclass(frozen=True)
class CovarianceSummary:
    """First and second quadrature moments, ordered ``(x_A, p_A, x_B, p_B)``."""

    mean_vector: np.ndarray
    cov: np.ndarray

    def symplectic_eigenvalues(self) -> np.ndarray:
        k = len(self.mean_vector) // 2
        omega = np.kron(np.eye(k), np.array([[0.0, 1.0], [-1.0, 0.0]]))
        ev = np.abs(np.linalg.eigvals(1j * omega @ self.cov))
        return np.sort(ev)[::2]


def _two_mode(state: State) -> None:
    if state.n_modes != 2:
        raise FockError(f"expected a two-mode state, got {state.n_modes} modes")


def _lower(data: np.ndarray, axis: int) -> np.ndarray:
    a = lowering_matrix(data.shape[axis] - 1)
    return np.moveaxis(np.tensordot(a, data, axes=(1, axis)), 0, axis)


class _Moments:
    """Ladder-operator expectation values using lowering operators only, so the
    results are exact on the truncated support."""

    def __init__(self, state: State):
        state, _ = normalize(state)
        self.pure = isinstance(state, FockState)
        if self.pure:
            self.psi = state.amplitudes
        else:
            self.rho = state.tensor
            self.k = state.n_modes

    def _trace(self, t: np.ndarray) -> complex:
        dim = int(np.prod(t.shape[: self.k]))
        return complex(np.trace(t.reshape(dim, dim)))

    def a(self, i: int) -> complex:
        if self.pure:
            return complex(np.vdot(self.psi, _lower(self.psi, i)))
        return self._trace(_lower(self.rho, i))

    def aa(self, i: int, j: int) -> complex:
        """``<a_i a_j>``."""
        if self.pure:
            return complex(np.vdot(self.psi, _lower(_lower(self.psi, j), i)))
        return self._trace(_lower(_lower(self.rho, j), i))

    def ad_a(self, i: int, j: int) -> complex:
        """``<a_i^+ a_j>``."""
        if self.pure:
            return complex(np.vdot(_lower(self.psi, i), _lower(self.psi, j)))
        # Tr[a_j rho a_i^+]: lowering on the ket axis of j and the bra axis of i
        return self._trace(_lower(_lower(self.rho, j), self.k + i))


def ladder_moments(state: State, modes=(0, 1)) -> dict:
    """Selected first and second ladder moments: ``n_i``, ``a_i``, ``aa_ij``."""
    m = _Moments(state)
    i, j = modes
    return {
        "a": (m.a(i), m.a(j)),
        "n": (m.ad_a(i, i).real, m.ad_a(j, j).real),
        "ab": m.aa(i, j),
        "aa": (m.aa(i, i), m.aa(j, j)),
        "adb": m.ad_a(i, j),
    }


def covariance_summary(state: State, modes=(0, 1)) -> CovarianceSummary:
    """Quadrature means and the vacuum-normalized covariance matrix of two modes.

    Means are ``<x>``, ``<p>`` with ``x = (a + a^+)/sqrt(2)``; the covariance is
    ``<{dx_i, dx_j}>`` so that the vacuum gives the identity.
    """
    if state.n_modes < 2:
        raise FockError("covariance_summary needs at least two modes")
    m = _Moments(state)
    idx = list(modes)
    # ladder vector b = (a_A, a_A^+, a_B, a_B^+)
    mean_b = []
    for i in idx:
        ai = m.a(i)
        mean_b += [ai, np.conj(ai)]
    mean_b = np.array(mean_b)
    second = np.zeros((4, 4), dtype=complex)
    for p, i in enumerate(idx):
        for q, j in enumerate(idx):
            aa = m.aa(i, j)
            ad_a = m.ad_a(i, j)  # <a_i^+ a_j>
            delta = 1.0 if i == j else 0.0
            second[2 * p, 2 * q] = aa
            second[2 * p + 1, 2 * q + 1] = np.conj(m.aa(j, i))
            second[2 * p + 1, 2 * q] = ad_a
            second[2 * p, 2 * q + 1] = m.ad_a(j, i) + delta
    centered = second - np.outer(mean_b, mean_b)
    s = 1.0 / np.sqrt(2.0)
    blk = np.array([[s, s], [-1j * s, 1j * s]])
    L = np.kron(np.eye(2), blk)
    rr = L @ centered @ L.T
    cov = (rr + rr.T).real
    means = (L @ mean_b).real
    return CovarianceSummary(means, 0.5 * (cov + cov.T))


def quadrature_variances(state: State) -> tuple[float, float]:
    """``(<(dx_A - dx_B)^2>, <(dp_A + dp_B)^2>)`` with vacuum value 1 for each."""
    _two_mode(state)
    g = covariance_summary(state).cov
    vx = 0.5 * (g[0, 0] + g[2, 2] - 2 * g[0, 2])
    vp = 0.5 * (g[1, 1] + g[3, 3] + 2 * g[1, 3])
    return float(vx), float(vp)


def squeezing_variance(state: State) -> float:
    """Two-mode squeezing variance ``<(dx_A - dx_B)^2>``; 1 for the vacuum."""
    return quadrature_variances(state)[0]


def mean_photon_number(state: State) -> float:
    m = _Moments(state)
    return float(sum(m.ad_a(i, i).real for i in range(state.n_modes)))


def _entropy_from_probs(p: np.ndarray) -> float:
    p = p[p > EIGEN_FLOOR]
    return float(-(p * np.log(p)).sum())


def entanglement_entropy(state: State) -> float:
    """Von Neumann entropy of mode A, in nats.

    For mixed inputs this is the reduced-state entropy, not an entanglement
    measure.
    """
    _two_mode(state)
    state, _ = normalize(state)
    if isinstance(state, FockState):
        sv = np.linalg.svd(state.amplitudes, compute_uv=False)
        return _entropy_from_probs(sv**2)
    rho_a = partial_trace(state, [0]).matrix
    return _entropy_from_probs(np.linalg.eigvalsh(0.5 * (rho_a + rho_a.conj().T)))


def fidelity_with_tmsv(state: State, omega: complex) -> float:
    """Overlap ``<TMSV(omega)| rho |TMSV(omega)>`` (squared overlap for kets)."""
    _two_mode(state)
    state, _ = normalize(state)
    ref = make_tmsv(omega, state.cutoffs).amplitudes
    if isinstance(state, FockState):
        return float(abs(np.vdot(ref, state.amplitudes)) ** 2)
    v = ref.reshape(-1)
    return float(np.vdot(v, state.matrix @ v).real)


def fidelity(a: State, b: State) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))^2`` of normalized states."""
    a, _ = normalize(a)
    b, _ = normalize(b)
    if a.cutoffs != b.cutoffs:
        raise FockError(f"cutoff mismatch {a.cutoffs} vs {b.cutoffs}")
    if isinstance(a, FockState) and isinstance(b, FockState):
        return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    if isinstance(a, FockState):
        a, b = b, a
    if isinstance(b, FockState):
        v = b.amplitudes.reshape(-1)
        return float(np.vdot(v, a.matrix @ v).real)
    # restrict to the support of a so that roundoff outside it does not enter
    # the square roots
    w, v = np.linalg.eigh(0.5 * (a.matrix + a.matrix.conj().T))
    keep = w > EIGEN_FLOOR
    half = v[:, keep] * np.sqrt(w[keep])
    inner = half.conj().T @ b.matrix @ half
    mu = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    mu = np.clip(mu, 0.0, None)
    return float(np.sqrt(mu).sum() ** 2)


def trace_distance(a: State, b: State) -> float:
    """``||a - b||_1 / 2`` of the normalized states."""
    a, _ = normalize(a)
    b, _ = normalize(b)
    if a.cutoffs != b.cutoffs:
        raise FockError(f"cutoff mismatch {a.cutoffs} vs {b.cutoffs}")
    if isinstance(a, FockState) and isinstance(b, FockState):
        ov = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
        return float(np.sqrt(max(1.0 - ov, 0.0)))
    diff = to_density(a).matrix - to_density(b).matrix
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def _squeezed_thermal_from_moments(na: float, nb: float, ab: complex, cutoffs) -> DensityOperator:
    a_ = 2 * na + 1
    b_ = 2 * nb + 1
    c_ = 2 * abs(ab)
    # a = v1 cosh^2 + v2 sinh^2, b = v1 sinh^2 + v2 cosh^2, c = (v1+v2) sinh cosh
    tot = np.sqrt(max((a_ + b_) ** 2 - 4 * c_**2, 0.0))
    r = 0.5 * np.arctanh(min(2 * c_ / (a_ + b_), 1 - 1e-16))
    v1 = 0.5 * (tot + (a_ - b_))
    v2 = 0.5 * (tot - (a_ - b_))
    nbar = (max((v1 - 1) / 2, 0.0), max((v2 - 1) / 2, 0.0))
    s = r * np.exp(1j * np.angle(ab)) if abs(ab) > 0 else 0.0
    return make_squeezed_thermal(s, nbar, cutoffs)


def gaussian_reference(state: State, passes: int = 3) -> DensityOperator:
    """Squeezed thermal state whose truncated, renormalized form has the same
    second moments as ``state``.

    Moments of a truncated state are biased low, so the parameters are corrected
    for ``passes`` rounds until the truncated reference reproduces them.  Only
    phase-insensitive two-mode states are supported: vanishing means and vanishing
    ``<a^2>``, ``<b^2>``, ``<a^+ b>``.
    """
    _two_mode(state)
    mom = ladder_moments(state)
    scale = 1.0 + sum(mom["n"])
    junk = max(abs(mom["a"][0]), abs(mom["a"][1]), abs(mom["aa"][0]), abs(mom["aa"][1]), abs(mom["adb"]))
    if junk > 1e-8 * scale:
        raise FockError("gaussian_reference supports phase-insensitive two-mode states only")
    target = np.array([mom["n"][0], mom["n"][1], mom["ab"]], dtype=complex)
    guess = target.copy()
    ref = _squeezed_thermal_from_moments(guess[0].real, guess[1].real, guess[2], state.cutoffs)
    for _ in range(passes):
        got = ladder_moments(ref)
        now = np.array([got["n"][0], got["n"][1], got["ab"]], dtype=complex)
        if np.abs(now - target).max() < 1e-14 * scale:
            break
        guess = guess + (target - now)
        ref = _squeezed_thermal_from_moments(guess[0].real, guess[1].real, guess[2], state.cutoffs)
    return ref


def gaussianity_residual(state: State) -> float:
    """``1 - F(state, Gaussian with the same covariance matrix)``."""
    ref = gaussian_reference(state)
    f = fidelity(ref, state)
    return max(1.0 - f, 0.0)
