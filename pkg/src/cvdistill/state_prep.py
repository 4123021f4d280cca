"""Gaussian input states in the truncated Fock basis.

Covers the two-mode squeezed vacuum, squeezed thermal states, the symmetric
pure-loss channel and the weakly squeezed ancilla state fed into the
simplified distillation circuits.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fock_engine import (
    DensityOperator,
    FockError,
    FockState,
    HeraldedResult,
    State,
    apply_exponential_number,
    apply_mode_operator,
    normalize,
    to_density,
    transmittance_angle,
)


class KappaRangeWarning(UserWarning):
    """Ancilla squeezing exceeds the squeezing of the input state."""


@dataclass(frozen=True)
class ProtocolParams:
    """Scalar parameters of the distillation protocol.

    Args:
        lam: TMSV squeezing parameter, ``tanh r``.
        T: intensity transmittance of the photon-subtraction splitters.
        kappa2: signed ancilla scaling; negative values mean an imaginary ``nu``.
        eta: transmittance of the distribution channels (1 means pure inputs).
        M: number of copies for the multicopy scheme.
    """

    lam: float
    T: float
    kappa2: float = 1.0
    eta: float = 1.0
    M: int = 2

    def __post_init__(self):
        if not abs(self.lam) < 1:
            raise FockError(f"|lambda| must be < 1, got {self.lam}")
        if not 0 < self.T < 1:
            raise FockError(f"T must lie in (0, 1), got {self.T}")
        if not 0 < self.eta <= 1:
            raise FockError(f"eta must lie in (0, 1], got {self.eta}")
        if int(self.M) != self.M or self.M < 2:
            raise FockError(f"M must be an integer >= 2, got {self.M}")
        if abs(self.kappa2) > 1.0 / (1.0 - self.T) ** 2:
            warnings.warn(
                f"|kappa| = {math.sqrt(abs(self.kappa2)):.4g} exceeds 1/(1-T) = "
                f"{1 / (1 - self.T):.4g}; the ancilla is more squeezed than the input",
                KappaRangeWarning,
                stacklevel=3,
            )

    @property
    def mu(self) -> float:
        return self.T * self.lam

    @property
    def kappa(self) -> complex:
        """Principal square root of ``kappa2`` (imaginary when ``kappa2 < 0``)."""
        return complex(np.sqrt(complex(self.kappa2)))

    @property
    def nu(self) -> complex:
        return self.kappa * (1.0 - self.T) * self.lam

    @property
    def theta(self) -> float:
        return transmittance_angle(self.T)

    @property
    def lambda_d(self) -> float:
        return 2.0 * self.T * self.lam

    @property
    def convergent(self) -> bool:
        return abs(self.lambda_d) < 1.0

    @property
    def is_pure(self) -> bool:
        return self.eta == 1.0


@dataclass(frozen=True)
class ThermalDecomposition:
    """``S(s) (tau x tau) S^+(s)`` with thermal occupation ``nbar`` per mode."""

    s: float
    nbar: float


def _two_cutoffs(cutoffs: int | Sequence[int]) -> tuple[int, int]:
    if isinstance(cutoffs, (int, np.integer)):
        return int(cutoffs), int(cutoffs)
    a, b = cutoffs
    return int(a), int(b)


def make_tmsv(lam: complex, cutoffs: int | Sequence[int]) -> FockState:
    """``sqrt(1 - |lam|^2) sum_n lam^n |n, n>`` truncated at the smaller cutoff."""
    if not abs(lam) < 1:
        raise FockError(f"|lambda| must be < 1, got {lam}")
    ca, cb = _two_cutoffs(cutoffs)
    c = min(ca, cb)
    amps = np.zeros((ca + 1, cb + 1), dtype=np.complex128)
    n = np.arange(c + 1)
    amps[n, n] = np.sqrt(1 - abs(lam) ** 2) * complex(lam) ** n
    return FockState(amps, abs(lam) ** (2 * (c + 1)))


def thermal_probabilities(nbar: float, n_max: int) -> np.ndarray:
    if nbar == 0:
        p = np.zeros(n_max + 1)
        p[0] = 1.0
        return p
    q = nbar / (nbar + 1.0)
    return q ** np.arange(n_max + 1) / (nbar + 1.0)


def _log_factorial(n: np.ndarray | int) -> np.ndarray:
    from scipy.special import gammaln

    return gammaln(np.asarray(n, dtype=float) + 1.0)


def squeezed_number_state(s: complex, j: int, k: int, cutoffs: tuple[int, int]) -> np.ndarray:
    """Amplitudes of ``S(s)|j, k>`` on the truncated grid.

    Uses the normal-ordered form
    ``S = exp(e^{i phi} t a^+ b^+) cosh(r)^{-(n_a + n_b + 1)} exp(-e^{-i phi} t a b)``
    with ``s = r e^{i phi}`` and ``t = tanh r``; only the line ``n_a - n_b = j - k``
    is populated.
    """
    r, phi = abs(s), float(np.angle(s)) if s != 0 else 0.0
    ca, cb = cutoffs
    out = np.zeros((ca + 1, cb + 1), dtype=np.complex128)
    if r == 0:
        if j <= ca and k <= cb:
            out[j, k] = 1.0
        return out
    t, ch = math.tanh(r), math.cosh(r)
    for d in range(-min(j, k), min(ca - j, cb - k) + 1):
        total = 0.0 + 0.0j
        for p in range(0, min(j, k) + 1):
            q = p + d
            if q < 0:
                continue
            lj, lk = j - p, k - p
            log_mag = (
                0.5 * (_log_factorial(j) + _log_factorial(k) - _log_factorial(lj) - _log_factorial(lk))
                - _log_factorial(p)
                + 0.5 * (_log_factorial(lj + q) + _log_factorial(lk + q) - _log_factorial(lj) - _log_factorial(lk))
                - _log_factorial(q)
                + (p + q) * math.log(t)
                - (lj + lk + 1) * math.log(ch)
            )
            total += (-1) ** p * np.exp(1j * phi * (q - p)) * math.exp(float(log_mag))
        out[j + d, k + d] = total
    return out


def make_squeezed_thermal(
    s: complex,
    nbar: float | Sequence[float],
    cutoffs: int | Sequence[int],
    weight_floor: float = 1e-18,
) -> DensityOperator:
    """Two-mode squeezed thermal state ``S(s) (tau_a x tau_b) S^+(s)``.

    ``nbar`` is a scalar or an ``(nbar_a, nbar_b)`` pair.  Thermal terms with
    joint weight below ``weight_floor`` are skipped; the trace missing from the
    truncated grid is reported as ``trace_deficit``.
    """
    na, nb = (nbar, nbar) if np.isscalar(nbar) else tuple(nbar)
    if na < 0 or nb < 0:
        raise FockError("thermal occupations must be nonnegative")
    cut = _two_cutoffs(cutoffs)
    dim = (cut[0] + 1) * (cut[1] + 1)
    rho = np.zeros((dim, dim), dtype=np.complex128)

    def _levels(nbar_):
        if nbar_ == 0:
            return thermal_probabilities(0.0, 0)
        q = nbar_ / (nbar_ + 1.0)
        n_max = int(math.ceil(math.log(weight_floor) / math.log(q))) if q > 0 else 0
        return thermal_probabilities(nbar_, max(n_max, 0))

    pa, pb = _levels(na), _levels(nb)
    for j, wj in enumerate(pa):
        for k, wk in enumerate(pb):
            w = wj * wk
            if w < weight_floor:
                continue
            psi = squeezed_number_state(s, j, k, cut).reshape(-1)
            rho += w * np.outer(psi, psi.conj())
    deficit = max(1.0 - float(np.trace(rho).real), 0.0)
    return DensityOperator(rho, cut, deficit)


def loss_kraus(eta: float, cutoff: int) -> list[np.ndarray]:
    """Kraus operators ``L_k`` of the pure-loss channel, ``k = 0..cutoff``."""
    if not 0 < eta <= 1:
        raise FockError(f"eta must lie in (0, 1], got {eta}")
    n = np.arange(cutoff + 1)
    ops = []
    for k in range(cutoff + 1):
        op = np.zeros((cutoff + 1, cutoff + 1))
        m = n[k:]
        log_binom = _log_factorial(m) - _log_factorial(k) - _log_factorial(m - k)
        with np.errstate(divide="ignore"):
            coeff = np.exp(0.5 * log_binom) * eta ** ((m - k) / 2.0) * (1 - eta) ** (k / 2.0)
        op[m - k, m] = coeff
        ops.append(op)
    return ops


def apply_loss_channel(state: State, mode: int, eta: float) -> DensityOperator:
    """Pass ``mode`` through a pure-loss channel of transmittance ``eta``."""
    rho = to_density(state)
    if eta == 1:
        return rho
    out = None
    for op in loss_kraus(eta, rho.cutoffs[mode]):
        term = apply_mode_operator(rho, mode, op).matrix
        out = term if out is None else out + term
    return DensityOperator(out, rho.cutoffs, rho.trace_deficit)


def make_lossy_tmsv(lam: complex, eta: float, cutoffs: int | Sequence[int]) -> State:
    """TMSV whose two modes both pass a loss channel ``eta`` (pure when ``eta == 1``)."""
    psi = make_tmsv(lam, cutoffs)
    if eta == 1:
        return psi
    return apply_loss_channel(apply_loss_channel(psi, 0, eta), 1, eta)


# -- ancilla state --------------------------------------------------------------


def attenuated_channel_params(params: ProtocolParams) -> tuple[float, float]:
    """``(nu, eta')`` such that noiseless attenuation of the lossy input equals
    a TMSV(``nu``) sent through loss ``eta'``."""
    lam, eta, T = params.lam, params.eta, params.T
    return lam * (1 - eta * T), eta * (1 - T) / (1 - eta * T)


def p_sigma(params: ProtocolParams) -> float:
    """Success probability of the two-mode noiseless attenuation by ``(1-T)^(n/2)``."""
    lam, eta, T = params.lam, params.eta, params.T
    if eta == 1:
        return (1 - lam**2) / (1 - (1 - T) ** 2 * lam**2)
    # lossy TMSV has geometric photon statistics in the sum basis; use the
    # generating function of (1-T)^(n_a + n_b) for a squeezed thermal state
    g = (1 - T)
    cov = _lossy_tmsv_cov(lam, eta)
    return _gaussian_attenuation_probability(cov, g)


def _lossy_tmsv_cov(lam: float, eta: float) -> np.ndarray:
    ch = (1 + lam**2) / (1 - lam**2)
    sh = 2 * lam / (1 - lam**2)
    z = np.diag([1.0, -1.0])
    g = np.block([[ch * np.eye(2), sh * z], [sh * z, ch * np.eye(2)]])
    return eta * g + (1 - eta) * np.eye(4)


def _gaussian_attenuation_probability(cov: np.ndarray, g: float) -> float:
    """``Tr[g^(n_a+n_b) rho]`` for a zero-mean Gaussian ``rho`` with covariance ``cov``.

    ``g^n`` is proportional to a thermal operator; the trace of two Gaussians is
    ``2^K / sqrt(det(cov + cov_g))`` scaled by the thermal normalization.
    """
    k = cov.shape[0] // 2
    if g == 0:
        # projection onto vacuum
        return float(2**k / np.sqrt(np.linalg.det(cov + np.eye(2 * k))))
    nb = g / (1 - g)
    cov_g = (2 * nb + 1) * np.eye(2 * k)
    return float((nb + 1) ** k * 2**k / np.sqrt(np.linalg.det(cov + cov_g)))


def thermal_params(params: ProtocolParams) -> ThermalDecomposition:
    """Squeezing and thermal occupation of the attenuated ancilla state."""
    lam, eta, T = params.lam, params.eta, params.T
    tanh2s = 2 * eta * lam * (1 - T) / (1 - lam**2 * (1 - 2 * eta + eta**2 * (2 - T) * T))
    nbar = 0.5 * (
        math.sqrt((1 - lam**2 * (1 - eta * (2 - T)) ** 2) / (1 - lam**2 * (1 - eta * T) ** 2)) - 1
    )
    return ThermalDecomposition(0.5 * math.atanh(tanh2s), max(nbar, 0.0))


def nbar_approx(params: ProtocolParams) -> float:
    """Leading-order thermal occupation, valid when it is much smaller than one."""
    lam, eta, T = params.lam, params.eta, params.T
    return eta * (1 - eta) * lam**2 * (1 - T) / (1 - lam**2 * (1 - eta * T) ** 2)


def reduced_noise_params(params: ProtocolParams) -> tuple[float, float]:
    """``(nbar', nu')``: a TMSV(``nu'``) sent through loss ``eta`` has the same
    squeezing as the attenuated ancilla but thermal occupation ``nbar'``."""
    eta = params.eta
    s = thermal_params(params).s
    t = math.tanh(2 * s)
    if t == 0:
        return 0.0, 0.0
    if eta == 1:
        return 0.0, t / (1 + math.sqrt(1 - t**2))
    if abs(1 - 2 * eta) < 1e-12:
        nu_p = t / (2 * eta)
    else:
        nu_p = (math.sqrt(eta**2 + (1 - 2 * eta) * t**2) - eta) / (t * (1 - 2 * eta))
    nbar_p = 0.5 * (2 * eta * nu_p / ((1 - nu_p**2) * math.sinh(2 * s)) - 1)
    return max(nbar_p, 0.0), nu_p


def make_sigma(
    params: ProtocolParams,
    cutoffs: int | Sequence[int],
    construction: str = "source",
) -> HeraldedResult:
    """Ancilla state for the simplified circuits.

    ``construction``:

    * ``"source"`` -- prepared directly: TMSV(``kappa (1-T) lambda``) for pure
      inputs, or TMSV(``kappa nu'``) sent through the loss ``eta`` for mixed inputs.
      Probability 1.
    * ``"channel"`` -- TMSV(``kappa nu``) with ``nu = lambda (1 - eta T)`` sent
      through loss ``eta' = eta (1-T)/(1 - eta T)``.  For ``kappa2 == 1`` this is
      the same state as ``"attenuation"``, prepared without heralding.
    * ``"attenuation"`` -- noiseless attenuation ``(1-T)^(n/2)`` of both modes of
      the (lossy) input state, as produced inside the original scheme.  Requires
      ``kappa2 == 1``; probability is ``P_sigma``.

    For pure inputs with ``kappa2 == 1`` both constructions give the same state.
    """
    if construction == "attenuation":
        if params.kappa2 != 1:
            raise FockError("the attenuation construction fixes kappa2 = 1")
        rho = make_lossy_tmsv(params.lam, params.eta, cutoffs)
        for mode in (0, 1):
            rho = apply_exponential_number(rho, mode, 1 - params.T)
        out, norm = normalize(rho)
        prob = norm**2 if isinstance(rho, FockState) else norm
        return HeraldedResult(out, prob, out.norm_deficit, ((0, 0), (1, 0)))
    if construction == "channel":
        nu, eta_p = attenuated_channel_params(params)
        state = make_lossy_tmsv(params.kappa * nu, eta_p, cutoffs)
        return HeraldedResult(state, 1.0, state.norm_deficit, ())
    if construction != "source":
        raise FockError(f"unknown construction {construction!r}")
    if params.is_pure:
        amp = params.nu
        state = make_tmsv(amp, cutoffs)
    else:
        _, nu_p = reduced_noise_params(params)
        state = make_lossy_tmsv(params.kappa * nu_p, params.eta, cutoffs)
    return HeraldedResult(state, 1.0, state.norm_deficit, ())
