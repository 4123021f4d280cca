"""Closed-form expressions for the distillation protocol.

All functions are scalar or return coefficient arrays over ``|n, n>``.  They
serve as oracles for the circuit simulations in :mod:`cvdistill.schemes`, and
the circuits serve as oracles for them.  Expressions are kept in the form they
are usually quoted in; no algebraic rearrangement.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

SERIES_TAIL = 1e-16


class DegenerateParameterWarning(UserWarning):
    """The stationarity condition in kappa^2 is degenerate at mu = 0."""


@dataclass(frozen=True)
class PureMetrics:
    v_in: float
    v_sub: float
    v_dist: float
    v_inf: float
    p_s: float
    normalization: float


@dataclass(frozen=True)
class MixedMetrics:
    v_in: float
    v_sub: float
    v_inf: float
    mu_tilde: float
    eta_tilde: float

    @property
    def bound(self) -> float:
        return 1.0 - self.eta_tilde


def series_nmax(x: float, floor: int = 8) -> int:
    """Smallest ``n`` with ``|x|^(2n) < 1e-16``, padded for polynomial prefactors."""
    x = abs(x)
    if x == 0:
        return floor
    n = math.ceil(math.log(SERIES_TAIL) / (2 * math.log(x)))
    return max(floor, n + 10)


# -- pure states ----------------------------------------------------------------


def subtracted_amplitudes(lam: float, T: float, n_max: int) -> np.ndarray:
    """Unnormalized amplitudes of the TMSV after one photon is subtracted from each mode."""
    n = np.arange(n_max + 1)
    return math.sqrt(1 - lam**2) * lam * (1 - T) * (n + 1) * (T * lam) ** n


def normalization_kappa(mu: float, kappa2: float) -> float:
    """Normalization factor of the kappa-dependent two-copy output."""
    return 0.25 * (1 - mu**2) ** 5 / ((1 + kappa2 * (1 - mu**2) ** 2) ** 2 + 4 * mu**2 + mu**4)


def normalization_original(mu: float) -> float:
    return (1 - mu**2) ** 5 / (4 * (4 - 4 * mu**2 + 9 * mu**4 - 4 * mu**6 + mu**8))


def psi_out_prime(lam: float, T: float, kappa2: float, n_max: int | None = None):
    """Normalized output of the simplified two-copy circuit.

    Returns ``(coefficients, N)`` where coefficient ``n`` is
    ``sqrt(N) (n^2 + 3n + 2 + 2 kappa^2) mu^n``.
    """
    mu = T * lam
    if not abs(mu) < 1:
        raise ValueError(f"|mu| must be < 1, got {mu}")
    if n_max is None:
        n_max = series_nmax(mu)
    n = np.arange(n_max + 1)
    norm = normalization_kappa(mu, kappa2)
    return math.sqrt(norm) * (n**2 + 3 * n + 2 + 2 * kappa2) * mu**n, norm


def p_success_original(lam: float, T: float) -> float:
    """Herald probability of the original two-copy scheme (four subtractions, two vacuum heralds)."""
    mu = T * lam
    return (1 - T) ** 4 * lam**4 * (1 - lam**2) ** 2 / (16 * normalization_original(mu))


def p_sigma_pure(lam: float, T: float) -> float:
    return (1 - lam**2) / (1 - (1 - T) ** 2 * lam**2)


def p_success_simplified(lam: float, T: float) -> float:
    return p_success_original(lam, T) / p_sigma_pure(lam, T)


def v_tmsv(lam: float) -> float:
    return (1 - lam) / (1 + lam)


def v_sub_pure(mu: float) -> float:
    return (1 - mu) / (1 + mu) * (1 - 2 * mu + 3 * mu**2) / (1 + mu**2)


def v_inf_pure(lam: float, T: float) -> float:
    return (1 - 2 * T * lam) / (1 + 2 * T * lam)


def v_dist(mu: float, kappa2: float) -> float:
    """Squeezing variance of the simplified two-copy output."""
    num = (
        1
        - 4 * mu
        + 12 * mu**2
        - 8 * mu**3
        + 5 * mu**4
        + 2 * kappa2 * (1 - 2 * mu) * (1 - mu**2) ** 2
        + kappa2**2 * (1 - mu**2) ** 4
    )
    den = mu**4 + 4 * mu**2 + (1 + kappa2 * (1 - mu**2) ** 2) ** 2
    return (1 - mu) / (1 + mu) * num / den


def kappa_stationary_roots(mu: float) -> tuple[float, float]:
    """Both roots ``(kappa2_plus, kappa2_minus)`` of ``dV_dist / dkappa = 0``.

    At ``mu = 0`` the variance no longer depends on kappa; a
    :class:`DegenerateParameterWarning` is emitted and the formula values returned.
    """
    if abs(mu) < 1e-12:
        warnings.warn("mu = 0: V_dist does not depend on kappa2", DegenerateParameterWarning, stacklevel=2)
    base = -1 + 2 * mu - 3 * mu**3 + 3 * mu**4 - 2 * mu**6 + mu**7
    disc = 8 - 8 * mu + 9 * mu**2 - 4 * mu**3 + mu**4
    root = mu * (1 - mu**2) ** 2 * math.sqrt(disc)
    scale = (1 - mu**2) ** 4
    return (base + root) / scale, (base - root) / scale


def fidelity_tmsv(mu: float, kappa2: float, omega: float) -> float:
    """Fidelity of the simplified two-copy output with TMSV(``omega``)."""
    return (
        (1 - mu**2) ** 5
        * (1 - omega**2)
        * (1 + kappa2 * (1 - mu * omega) ** 2) ** 2
        / ((1 - mu * omega) ** 6 * (mu**4 + 4 * mu**2 + (1 + kappa2 * (1 - mu**2) ** 2) ** 2))
    )


def omega_cubic(mu: float, kappa2: float) -> np.ndarray:
    """Coefficients (highest power first) of the stationarity cubic for omega."""
    return np.array(
        [
            -kappa2 * mu**2,
            kappa2 * mu * (mu**2 + 2) - 2 * mu,
            -(1 + kappa2 + 2 * kappa2 * mu**2),
            3 * mu + kappa2 * mu,
        ]
    )


def _polish(coeffs: np.ndarray, x: float, steps: int = 8) -> float:
    d = np.polyder(coeffs)
    for _ in range(steps):
        fx, dx = np.polyval(coeffs, x), np.polyval(d, x)
        if dx == 0:
            break
        step = fx / dx
        x -= step
        if abs(step) < 1e-16:
            break
    return x


def omega_star(mu: float, kappa2: float) -> float:
    """Squeezing parameter of the TMSV closest (in fidelity) to the two-copy output.

    Real roots of the cubic in (-1, 1) are polished by Newton steps and the one
    with the largest fidelity is returned.
    """
    coeffs = omega_cubic(mu, kappa2)
    nz = np.flatnonzero(np.abs(coeffs) > 0)
    coeffs = coeffs[nz[0]:] if nz.size else coeffs
    roots = np.roots(coeffs)
    cands = []
    for r in roots:
        if abs(r.imag) > 1e-7 * max(1.0, abs(r)):
            continue
        x = _polish(coeffs, float(r.real))
        if -1 < x < 1:
            cands.append(x)
    if not cands:
        raise ValueError(f"no admissible omega for mu={mu}, kappa2={kappa2}")
    return max(cands, key=lambda w: fidelity_tmsv(mu, kappa2, w))


def pure_metrics(lam: float, T: float, kappa2: float) -> PureMetrics:
    mu = T * lam
    return PureMetrics(
        v_in=v_tmsv(lam),
        v_sub=v_sub_pure(mu),
        v_dist=v_dist(mu, kappa2),
        v_inf=v_inf_pure(lam, T),
        p_s=p_success_original(lam, T),
        normalization=normalization_kappa(mu, kappa2),
    )


def tmsv_entropy(lam: float) -> float:
    """Entanglement entropy of TMSV(``lam``) in nats."""
    if lam == 0:
        return 0.0
    sh2 = lam**2 / (1 - lam**2)
    ch2 = 1 + sh2
    return ch2 * math.log(ch2) - sh2 * math.log(sh2)


def series_entropy(coefficients: np.ndarray) -> float:
    """Entropy of ``sum_n c_n |n, n>`` (Schmidt form)."""
    p = np.abs(np.asarray(coefficients)) ** 2
    p = p / p.sum()
    p = p[p > 1e-300]
    return float(-(p * np.log(p)).sum())


def series_variance(coefficients: np.ndarray) -> float:
    """Squeezing variance of ``sum_n c_n |n, n>`` with real coefficients."""
    c = np.asarray(coefficients, dtype=float)
    c = c / np.linalg.norm(c)
    n = np.arange(len(c))
    mean_n = float((c**2 * n).sum())
    ab = float((c[1:] * c[:-1] * (n[:-1] + 1)).sum())
    return 1 + 2 * mean_n - 2 * ab


# -- mixed states ---------------------------------------------------------------


def v_in_mixed(lam: float, eta: float) -> float:
    return (1 - lam) / (1 + lam) * eta + 1 - eta


def mu_eta_tilde(lam: float, eta: float, T: float) -> tuple[float, float]:
    return (1 - eta + eta * T) * lam, eta * T / (1 - eta * (1 - T))


def v_sub_mixed(lam: float, eta: float, T: float) -> float:
    mt, et = mu_eta_tilde(lam, eta, T)
    return (1 - mt) / (1 + mt) * (1 - 2 * mt + 3 * mt**2) / (1 + mt**2) * et + 1 - et


def v_inf_mixed(lam: float, eta: float, T: float) -> float:
    """Variance of the Gaussian state reached by iterating the Gaussification map
    on the lossy photon-subtracted state (valid when the iteration converges)."""
    e = 1 - eta
    common = 1 + e * lam * (1 + e * lam * (1 + e * lam))
    gain = 2 * eta * T * lam * (1 + lam * (-1 + eta + e**2 * lam))
    return (common - gain) / (common + gain)


def mixed_metrics(lam: float, eta: float, T: float) -> MixedMetrics:
    mt, et = mu_eta_tilde(lam, eta, T)
    return MixedMetrics(
        v_in=v_in_mixed(lam, eta),
        v_sub=v_sub_mixed(lam, eta, T),
        v_inf=v_inf_mixed(lam, eta, T),
        mu_tilde=mt,
        eta_tilde=et,
    )


# -- generalized subtraction ----------------------------------------------------


def generalized_amplitudes(lam: float, nu: float, T: float, n_max: int) -> np.ndarray:
    """Unnormalized ``<2,2|_CD V_AC V_BD |TMSV(lam)>_AB |TMSV(nu)>_CD`` over ``|n, n>``."""
    lt = T * lam + (1 - T) * nu
    nt = T * nu + (1 - T) * lam
    g = T * (1 - T) * (lam - nu) ** 2
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        # poly(n) lt^(n-2) with the negative powers cancelled by hand
        if n == 0:
            out[n] = nt**2
        elif n == 1:
            out[n] = nt**2 * lt + 2 * nt * g
        else:
            poly = nt**2 * lt**2 + 2 * nt * lt * g * n + 0.5 * g**2 * n * (n - 1)
            out[n] = poly * lt ** (n - 2)
    return math.sqrt((1 - lam**2) * (1 - nu**2)) * out


def generalized_polynomial(lam: float, nu: float, T: float) -> tuple[float, float]:
    """``(d1, d0)`` of the monic polynomial ``n^2 + d1 n + d0`` modulating the
    generalized-subtraction output (relative to ``lt^n``)."""
    lt = T * lam + (1 - T) * nu
    nt = T * nu + (1 - T) * lam
    g = T * (1 - T) * (lam - nu) ** 2
    if g == 0 or lt == 0:
        raise ValueError("degenerate parameters: no quadratic modulation")
    a2 = 0.5 * g**2
    return (2 * nt * lt * g - 0.5 * g**2) / a2, nt**2 * lt**2 / a2


# -- multicopy ------------------------------------------------------------------


def multicopy_amplitudes(lam: float, T: float, M: int, n_max: int) -> np.ndarray:
    """Unnormalized M-copy output over ``|n, n>``.

    The heralded state is ``sqrt(calM) nu^M (1 + mu x / M)^M e^(mu x)|vac>`` with
    ``x = a^+ b^+``, ``mu = T lam``, ``nu = (1 - T) lam`` and
    ``calM = (1 - lam^2)(1 - nu^2)^(M - 1)``.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    mu = T * lam
    nu = (1 - T) * lam
    pref = math.sqrt((1 - lam**2) * (1 - nu**2) ** (M - 1)) * nu**M
    out = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        # x^k e^(mu x)|vac> contributes mu^(n-k) n!/(n-k)! to |n, n>
        total = 0.0
        falling = 1.0
        for k in range(min(M, n) + 1):
            if k > 0:
                falling *= n - k + 1
            total += math.comb(M, k) * M ** (-k) * falling
        out[n] = pref * total * mu**n
    return out


def multicopy_polynomial_m2(n: np.ndarray) -> np.ndarray:
    """For M = 2 the modulating polynomial is ``(n^2 + 3n + 4)/4``."""
    n = np.asarray(n, dtype=float)
    return (n**2 + 3 * n + 4) / 4


def multicopy_fidelity(lam: float, T: float, M: int, omega: float | None = None) -> float:
    """Overlap of the normalized M-copy output with TMSV(``omega``), default ``2 T lam``."""
    mu = T * lam
    omega = 2 * mu if omega is None else omega
    if not abs(omega) < 1:
        raise ValueError(f"|omega| must be < 1, got {omega}")
    n_max = series_nmax(max(abs(mu), abs(omega))) + 4 * M
    c = multicopy_amplitudes(lam, T, M, n_max)
    c = c / np.linalg.norm(c)
    ref = math.sqrt(1 - omega**2) * omega ** np.arange(n_max + 1)
    return float(np.dot(c, ref) ** 2)
