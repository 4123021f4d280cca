"""Heralded distillation circuits run end to end on the Fock engine.

Cutoff convention: the ``cutoff`` argument of every scheme is the cutoff of the
returned two-mode state.  Pure signal inputs are prepared with twice as many
extra levels as photons heralded per side, so every retained output amplitude
and the first levels above the cutoff are exact.  ``norm_deficit`` is then the heralded mass found above the
output cutoff, relative to the normalized output: the truncation error of the
normalization.  Their own Fock tails only feed output levels above the cutoff,
so they are not counted a second time.  Mixed inputs keep the deficit of their
construction, since a loss channel moves high levels down.

Probabilities are absolute: inputs are exact unit-norm states, so the squared
norm of the unnormalized heralded branch is the success probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .fock_engine import (
    HERALD_FLOOR,
    DensityOperator,
    FockError,
    FockState,
    HeraldedResult,
    HeraldImpossibleError,
    State,
    apply_annihilation,
    apply_beam_splitter,
    apply_exponential_number,
    apply_mode_operator,
    block_unitary,
    deficit,
    fock_basis_state,
    normalize,
    pad,
    permute_modes,
    select_mode,
    tensor_product,
    to_density,
    transmittance_angle,
    truncate,
    vacuum,
)
from .measures import (
    fidelity_with_tmsv,
    gaussianity_residual,
    mean_photon_number,
    squeezing_variance,
    trace_distance,
)
from .state_prep import ProtocolParams, make_lossy_tmsv, make_sigma, make_tmsv

BALANCED = math.pi / 4
DIVERGENCE_DEFICIT = 1e-3
EIGEN_CUT = 1e-14

__all__ = [
    "HeraldedResult",
    "CutoffTooSmallError",
    "photon_subtract",
    "subtracted_state",
    "run_original_two_copy",
    "run_simplified_two_copy",
    "gaussification_step",
    "iterate_gaussification",
    "GaussificationRecord",
    "GaussificationTrace",
    "rho_dist_formula",
    "run_generalized_subtraction",
    "ladder_angles",
    "ladder_matrix",
    "run_multicopy",
]


class CutoffTooSmallError(FockError):
    """The truncation error of a run exceeds the requested threshold."""


# -- helpers ----------------------------------------------------------------------


def _scaled(state: State, c: float) -> State:
    if isinstance(state, FockState):
        return FockState(state.amplitudes * c, state.norm_deficit * abs(c) ** 2)
    return DensityOperator(state.matrix * abs(c) ** 2, state.cutoffs, state.trace_deficit * abs(c) ** 2)


def _exact(state: State) -> State:
    """Same amplitudes with zero deficit.

    Used for ancillas whose truncated levels cannot reach the heralded branch.
    """
    return _with_deficit(state, 0.0)


def _with_deficit(state: State, value: float) -> State:
    if isinstance(state, FockState):
        return FockState(state.amplitudes, value)
    return DensityOperator(state.matrix, state.cutoffs, value)


def _like(state: State, other: State) -> State:
    return to_density(other) if isinstance(state, DensityOperator) else other


def _select_all(state: State, outcomes: Sequence[tuple[int, int]]) -> State:
    """Apply ``<n|`` on several modes (indices refer to the unreduced state)."""
    for mode, n in sorted(outcomes, key=lambda t: -t[0]):
        state = select_mode(state, mode, n)
    return state


def _finish(raw: State, cutoff: int, pattern, norm: float = 1.0, floor: float = HERALD_FLOOR) -> HeraldedResult:
    """Normalize a heralded branch whose inputs had total squared norm ``norm``."""
    mass = raw.squared_norm if isinstance(raw, FockState) else raw.trace
    p = mass / norm
    if not p > floor:
        raise HeraldImpossibleError(f"herald pattern {pattern} has probability {p:.3g}")
    cut = tuple(min(cutoff, c) for c in raw.cutoffs)
    out, _ = normalize(truncate(raw, cut))
    return HeraldedResult(out, float(p), deficit(out), tuple(pattern))


# -- photon subtraction -----------------------------------------------------------


def photon_subtract(
    state: State, mode: int, T: float, m: int = 1, method: str = "circuit", floor: float = HERALD_FLOOR
) -> HeraldedResult:
    """Heralded subtraction of ``m`` photons from ``mode``.

    ``method="circuit"`` mixes the mode with a vacuum ancilla on a splitter of
    transmittance ``T`` and projects the ancilla on ``|m>``;
    ``method="operator"`` applies ``(1-T)^(m/2)/sqrt(m!) T^(n/2) a^m``.  The
    splitter angle is ``-arccos(sqrt(T))`` so that the ancilla amplitude is
    ``+sin``, which makes both methods agree including the sign.  The output
    keeps the input cutoffs; the top ``m`` levels of ``mode`` are zero.
    """
    if m < 0:
        raise FockError(f"m must be >= 0, got {m}")
    if method == "circuit":
        k = state.n_modes
        joint = tensor_product(state, _like(state, vacuum([m])))
        # the ancilla only ever gains photons from the signal, so components
        # pushed above |m> are never heralded
        joint = apply_beam_splitter(joint, mode, k, -transmittance_angle(T), count_loss=False)
        raw = select_mode(joint, k, m)
    elif method == "operator":
        raw = state
        for _ in range(m):
            raw = apply_annihilation(raw, mode)
        raw = apply_exponential_number(raw, mode, T) if T > 0 else _zero_above_vacuum(raw, mode)
        raw = _scaled(raw, (1 - T) ** (m / 2) / math.sqrt(math.factorial(m)))
    else:
        raise FockError(f"unknown method {method!r}")
    norm = state.squared_norm if isinstance(state, FockState) else state.trace
    mass = raw.squared_norm if isinstance(raw, FockState) else raw.trace
    p = mass / norm
    if not p > floor:
        raise HeraldImpossibleError(f"subtracting {m} photons from mode {mode} has probability {p:.3g}")
    out, _ = normalize(raw)
    return HeraldedResult(out, float(p), deficit(out), ((mode, m),))


def _zero_above_vacuum(state: State, mode: int) -> State:
    op = np.zeros((state.cutoffs[mode] + 1,) * 2)
    op[0, 0] = 1.0
    return apply_mode_operator(state, mode, op)


def subtracted_state(params: ProtocolParams, cutoff: int) -> HeraldedResult:
    """(Lossy) TMSV with one photon subtracted from each mode."""
    rho = make_lossy_tmsv(params.lam, params.eta, cutoff + 1)
    first = photon_subtract(rho, 0, params.T, 1)
    second = photon_subtract(first.state, 1, params.T, 1)
    p = first.probability * second.probability
    out, _ = normalize(truncate(second.state, (cutoff, cutoff)))
    return HeraldedResult(out, p, deficit(out), (("A", 1), ("B", 1)))


# -- two-copy schemes -------------------------------------------------------------


def run_original_two_copy(params: ProtocolParams, cutoff: int = 14) -> HeraldedResult:
    """Two TMSV copies, one photon subtracted from each of the four modes, balanced
    splitters between the copies, and vacuum heralds on the second copy."""
    if not params.is_pure:
        raise FockError("the original two-copy circuit is simulated for pure inputs only")
    if params.lam == 0:
        raise HeraldImpossibleError("no photons to subtract from the vacuum")
    work = cutoff + 3
    theta = -params.theta
    copies = []
    for _ in range(2):
        # modes A, B, C, D with single-photon ancillas C, D
        st = tensor_product(_exact(make_tmsv(params.lam, work)), vacuum([1, 1]))
        st = apply_beam_splitter(st, 0, 2, theta, count_loss=False)
        st = apply_beam_splitter(st, 1, 3, theta, count_loss=False)
        copies.append(_select_all(st, [(2, 1), (3, 1)]))
    # modes A1, B1, A2, B2
    st = tensor_product(*copies)
    st = apply_beam_splitter(st, 0, 2, BALANCED)
    st = apply_beam_splitter(st, 1, 3, BALANCED)
    raw = _select_all(st, [(2, 0), (3, 0)])
    pattern = [("C1", 1), ("D1", 1), ("C2", 1), ("D2", 1), ("A2", 0), ("B2", 0)]
    return _finish(raw, cutoff, pattern)


def _simplified_local_circuit(st: FockState, theta: float) -> FockState:
    """Signal mode 0, vacuum ancilla 1, sigma mode 2; herald ancillas on |1>,|1>."""
    st = apply_beam_splitter(st, 0, 1, theta, count_loss=False)
    st = apply_beam_splitter(st, 1, 2, BALANCED, count_loss=False)
    return st


def _local_transfer(signal_cut: int, anc_cuts: Sequence[int], circuit, heralds, out_cut: int) -> np.ndarray:
    """Transfer tensor ``E[n, a, x...]`` of a local heralded circuit.

    Runs ``circuit`` on every basis input ``|a>|x...>`` of (signal, ancillas)
    and keeps ``<n|`` of the signal after ``<heralds|`` on the ancillas.
    """
    cuts = (signal_cut,) + tuple(anc_cuts)
    shape = tuple(c + 1 for c in cuts)
    tensor = np.zeros((out_cut + 1,) + shape, dtype=np.complex128)
    for idx in np.ndindex(*shape):
        st = circuit(fock_basis_state(idx, cuts))
        vec = _select_all(st, heralds).amplitudes
        k = min(out_cut, signal_cut) + 1
        tensor[(slice(0, k),) + idx] = vec[:k]
    return tensor


def run_simplified_two_copy(
    params: ProtocolParams,
    cutoff: int = 14,
    sigma: State | None = None,
    sigma_construction: str = "source",
) -> HeraldedResult:
    """Single copy of the input plus the ancilla state ``sigma``.

    Alice's mode A1 meets a vacuum ancilla C1 on the subtraction splitter; C1 and
    sigma's mode C2 then meet on a balanced splitter and both are heralded on
    ``|1>``.  Bob does the same with B1, D1 and D2.  ``sigma`` defaults to
    :func:`cvdistill.state_prep.make_sigma` with ``sigma_construction``.
    """
    work = cutoff + 4
    theta = -params.theta
    pattern = [("C1", 1), ("C2", 1), ("D1", 1), ("D2", 1)]
    if sigma is None:
        sigma = make_sigma(params, max(cutoff, 2), sigma_construction).state
    # sigma enters only through two-photon heralds per side
    sigma = _exact(truncate(sigma, (2, 2)))
    if params.is_pure and isinstance(sigma, FockState):
        # modes A1, B1, C1, D1, C2, D2
        st = tensor_product(_exact(make_tmsv(params.lam, work)), vacuum([2, 2]))
        st = tensor_product(st, sigma)
        st = apply_beam_splitter(st, 0, 2, theta, count_loss=False)
        st = apply_beam_splitter(st, 1, 3, theta, count_loss=False)
        st = apply_beam_splitter(st, 2, 4, BALANCED, count_loss=False)
        st = apply_beam_splitter(st, 3, 5, BALANCED, count_loss=False)
        raw = _select_all(st, [(2, 1), (3, 1), (4, 1), (5, 1)])
        return _finish(raw, cutoff, pattern)
    rho = to_density(make_lossy_tmsv(params.lam, params.eta, work))
    return _simplified_mixed(rho, to_density(sigma), params.T, cutoff, pattern)


@lru_cache(maxsize=32)
def _simplified_transfer(T: float, signal_cut: int, cutoff: int) -> np.ndarray:
    theta = -transmittance_angle(T)
    circuit = lambda st: _simplified_local_circuit(st, theta)  # noqa: E731
    # the subtraction ancilla starts in vacuum
    ea = _local_transfer(signal_cut, (2, 2), circuit, [(1, 1), (2, 1)], cutoff)[:, :, 0]
    ea.setflags(write=False)
    return ea


def _simplified_mixed(rho: DensityOperator, sigma: DensityOperator, T: float, cutoff: int, pattern) -> HeraldedResult:
    ca, cb = rho.cutoffs
    ea = _simplified_transfer(float(T), ca, cutoff)
    eb = _simplified_transfer(float(T), cb, cutoff)
    # out[n,m,N,M] = sum E_A[n,a,x] E_B[m,b,y] rho[a,b,A,B] sigma[x,y,X,Y] E_A*[N,A,X] E_B*[M,B,Y]
    t = np.einsum("nax,abAB->nxbAB", ea, rho.tensor)
    t = np.einsum("mby,nxbAB->nxmyAB", eb, t)
    t = np.einsum("NAX,nxmyAB->nxmyNXB", ea.conj(), t)
    t = np.einsum("MBY,nxmyNXB->nxmyNXMY", eb.conj(), t)
    out = np.einsum("nxmyNXMY,xyXY->nmNM", t, sigma.tensor)
    raw = DensityOperator.from_tensor(out, rho.trace_deficit)
    return _finish(raw, cutoff, pattern)


def rho_dist_formula(rho: DensityOperator, sigma: DensityOperator, T: float) -> DensityOperator:
    """Double Kraus sum for the simplified two-copy circuit, normalized.

    ``(1/4) sum (-1)^(j+k+l+m) K_2j,A K_2k,B rho K_2l,A^+ K_2m,B^+ sigma_{(2-2j)(2-2k),(2-2l)(2-2m)}``
    with ``K_m = (1-T)^(m/2)/sqrt(m!) T^(n/2) a^m``.  The output cutoff is two
    below the input one, where every level is exact.
    """
    rho = to_density(rho)
    sigma = to_density(sigma)
    if rho.n_modes != 2 or sigma.n_modes != 2:
        raise FockError("rho and sigma must be two-mode operators")
    if min(rho.cutoffs) < 2 or min(sigma.cutoffs) < 2:
        raise FockError("rho_dist_formula needs cutoffs >= 2")
    ca, cb = rho.cutoffs
    kraus_a = [_kraus(2 * j, T, ca) for j in (0, 1)]
    kraus_b = [_kraus(2 * j, T, cb) for j in (0, 1)]
    s = sigma.tensor
    r = rho.tensor
    out = np.zeros_like(r)
    for j in (0, 1):
        for k in (0, 1):
            for l in (0, 1):
                for m in (0, 1):
                    w = s[2 - 2 * j, 2 - 2 * k, 2 - 2 * l, 2 - 2 * m]
                    if w == 0:
                        continue
                    term = np.einsum(
                        "na,mb,abAB,NA,MB->nmNM",
                        kraus_a[j], kraus_b[k], r, kraus_a[l].conj(), kraus_b[m].conj(),
                        optimize=True,
                    )
                    out += 0.25 * (-1) ** (j + k + l + m) * w * term
    out = out[: ca - 1, : cb - 1, : ca - 1, : cb - 1]
    raw = DensityOperator.from_tensor(out, rho.trace_deficit)
    res, _ = normalize(raw)
    return res


def _kraus(m: int, T: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    low = np.linalg.matrix_power(np.diag(np.sqrt(n[1:].astype(float)), k=1), m)
    return (1 - T) ** (m / 2) / math.sqrt(math.factorial(m)) * np.diag(T ** (n / 2.0)) @ low


# -- Gaussification -----------------------------------------------------------------


def _gaussify_pure(psi: FockState) -> FockState:
    # modes A1, B1, A2, B2
    st = tensor_product(psi, psi)
    st = apply_beam_splitter(st, 0, 2, BALANCED)
    st = apply_beam_splitter(st, 1, 3, BALANCED)
    return _select_all(st, [(2, 0), (3, 0)])


def _merge_table(cutoff: int) -> np.ndarray:
    """``g[a1, a2] = <a1 + a2, 0| U |a1, a2>`` for the balanced splitter."""
    g = np.zeros((cutoff + 1, cutoff + 1))
    for a1 in range(cutoff + 1):
        for a2 in range(cutoff + 1):
            g[a1, a2] = block_unitary(a1 + a2, BALANCED)[a1 + a2, a1]
    return g


def _merge_all(phis: np.ndarray, g: np.ndarray, out_cut: int) -> np.ndarray:
    """Heralded outputs for every ordered pair of two-mode vectors.

    ``out[k, l, n, m] = sum g[a1, n-a1] g[b1, m-b1] phi_k[a1, b1] phi_l[n-a1, m-b1]``
    for ``n, m <= out_cut``.
    """
    r, dim, _ = phis.shape
    c = dim - 1
    out = np.zeros((r, r, out_cut + 1, out_cut + 1), dtype=np.complex128)
    for n in range(out_cut + 1):
        a1 = np.arange(max(0, n - c), min(c, n) + 1)
        if a1.size == 0:
            continue
        left = phis[:, a1, :] * g[a1, n - a1][None, :, None]
        # y[k, b1, l, b2]: Alice's two copies merged into output level n
        y = np.tensordot(left, phis[:, n - a1, :], axes=(1, 1))
        for m in range(out_cut + 1):
            b1 = np.arange(max(0, m - c), min(c, m) + 1)
            if b1.size == 0:
                continue
            out[:, :, n, m] = np.tensordot(g[b1, m - b1], y[:, b1, :, m - b1], axes=(0, 0))
    return out


def _gaussify_mixed(rho: DensityOperator) -> DensityOperator:
    """Heralded two-copy map on a density operator, via its eigendecomposition.

    ``rho = sum p_k |phi_k><phi_k|``; each pair of eigenvectors is merged on the
    balanced splitters and heralded on vacuum.  Eigenvalues below ``EIGEN_CUT``
    times the largest are dropped and their weight is added to the deficit.
    """
    c = max(rho.cutoffs)
    if rho.cutoffs != (c, c):
        raise FockError("mixed Gaussification expects equal cutoffs")
    herm = 0.5 * (rho.matrix + rho.matrix.conj().T)
    w, v = np.linalg.eigh(herm)
    keep = w > EIGEN_CUT * w.max()
    dropped = float(np.clip(w[~keep], 0, None).sum())
    w, v = w[keep], v[:, keep]
    phis = (v * np.sqrt(w)).T.reshape(-1, c + 1, c + 1)
    g = _merge_table(c)
    full = min(2 * c, c + 6)
    x = _merge_all(phis, g, full)
    r = len(phis)
    kept = x[:, :, : c + 1, : c + 1].reshape(r * r, -1)
    lost = float(np.vdot(x, x).real - np.vdot(kept, kept).real)
    acc = kept.T @ kept.conj()
    # both copies miss the dropped eigenvalue weight
    return DensityOperator(acc, rho.cutoffs, lost + 2 * (rho.trace_deficit + dropped))


def gaussification_step(rho: State, floor: float = HERALD_FLOOR) -> HeraldedResult:
    """One round of the two-copy map: balanced splitters between two copies,
    vacuum heralds on the second copy.  Works on kets and density operators."""
    if rho.n_modes != 2:
        raise FockError("gaussification_step expects a two-mode state")
    rho, _ = normalize(rho)
    # the input's own truncation error is carried over additively; the
    # high-photon components it stands for are rarely heralded on vacuum, so
    # propagating it through the nonlinear map would only inflate the estimate
    clean = _exact(rho)
    raw = _gaussify_pure(clean) if isinstance(rho, FockState) else _gaussify_mixed(clean)
    res = _finish(raw, max(rho.cutoffs), [("A2", 0), ("B2", 0)], floor=floor)
    total = res.norm_deficit + deficit(rho)
    return HeraldedResult(_with_deficit(res.state, total), res.probability, total, res.herald_pattern)


def gaussification_step_dense(rho: State) -> HeraldedResult:
    """Reference implementation: the full four-mode density operator through
    the engine.  Cost grows as ``(cutoff + 1)^8``; meant for small cutoffs."""
    rho, _ = normalize(to_density(rho))
    st = tensor_product(rho, rho)
    st = apply_beam_splitter(st, 0, 2, BALANCED)
    st = apply_beam_splitter(st, 1, 3, BALANCED)
    raw = _select_all(st, [(2, 0), (3, 0)])
    return _finish(raw, max(rho.cutoffs), [("A2", 0), ("B2", 0)])


@dataclass(frozen=True)
class GaussificationRecord:
    iteration: int
    probability: float
    trace_distance: float
    gaussianity_residual: float
    variance: float
    mean_photons: float
    norm_deficit: float
    fidelity: float | None = None


@dataclass
class GaussificationTrace:
    records: list[GaussificationRecord] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    reason: str = ""

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def _record(i, state, p, dist, deficit_, target, residual=True):
    fid = fidelity_with_tmsv(state, target) if target is not None else None
    return GaussificationRecord(
        iteration=i,
        probability=p,
        trace_distance=dist,
        gaussianity_residual=gaussianity_residual(state) if residual else float("nan"),
        variance=squeezing_variance(state),
        mean_photons=mean_photon_number(state),
        norm_deficit=deficit_,
        fidelity=fid,
    )


def iterate_gaussification(
    rho0: State,
    max_iters: int = 12,
    tol: float = 1e-8,
    target_lambda: float | None = None,
    residuals: bool = True,
) -> tuple[State, GaussificationTrace]:
    """Iterate :func:`gaussification_step` until successive states are within
    ``tol`` in trace distance.

    Record 0 describes the input.  ``trace_distance`` is measured to the previous
    iterate.  Divergence (deficit above 1e-3 or mean photon number above half the
    cutoff) stops the loop with ``diverged=True``; the last state is returned.
    ``residuals=False`` skips the Gaussianity residual (recorded as NaN).
    """
    state, _ = normalize(rho0)
    cutoff = max(state.cutoffs)
    trace = GaussificationTrace()
    total_deficit = deficit(state)
    trace.records.append(_record(0, state, 1.0, float("nan"), total_deficit, target_lambda, residuals))
    for i in range(1, max_iters + 1):
        try:
            res = gaussification_step(state)
        except HeraldImpossibleError as exc:
            trace.diverged = True
            trace.reason = str(exc)
            break
        dist = trace_distance(res.state, state)
        state = res.state
        total_deficit = res.norm_deficit
        photons = mean_photon_number(state)
        escaped = total_deficit > DIVERGENCE_DEFICIT or photons > cutoff / 2
        rec = _record(i, state, res.probability, dist, total_deficit, target_lambda, residual=residuals and not escaped)
        trace.records.append(rec)
        if escaped:
            trace.diverged = True
            trace.reason = f"iteration {i}: norm_deficit {total_deficit:.3g}, mean photons {photons:.3g}"
            break
        if dist < tol:
            trace.converged = True
            break
    return state, trace


# -- generalized subtraction ------------------------------------------------------


def run_generalized_subtraction(lam: float, nu: float, T: float, cutoff: int = 14) -> HeraldedResult:
    """TMSV(``lam``) on A, B and TMSV(``nu``) on C, D; splitters V_AC, V_BD;
    heralds ``|2>`` on C and D."""
    if not (abs(lam) < 1 and abs(nu) < 1):
        raise FockError("|lambda| and |nu| must be < 1")
    work = cutoff + 4
    theta = -transmittance_angle(T)
    # modes A, B, C, D
    st = tensor_product(_exact(make_tmsv(lam, work)), _exact(make_tmsv(nu, work)))
    st = apply_beam_splitter(st, 0, 2, theta)
    st = apply_beam_splitter(st, 1, 3, theta)
    raw = _select_all(st, [(2, 2), (3, 2)])
    return _finish(raw, cutoff, [("C", 2), ("D", 2)])


# -- multicopy ----------------------------------------------------------------------


def ladder_angles(M: int) -> list[float]:
    """Angles of the splitters BS_j on (C_j, C_j+1), transmittance ``(M-j)/(M-j+1)``.

    The sign makes every output amplitude of a photon entering C1 equal to
    ``+1/sqrt(M)``.
    """
    if M < 2:
        raise FockError("M must be >= 2")
    return [-math.asin(math.sqrt((M - j) / (M - j + 1))) for j in range(1, M)]


def _apply_ladder(st: State, first: int, M: int, count_loss: bool = False) -> State:
    for j, ang in enumerate(ladder_angles(M)):
        st = apply_beam_splitter(st, first + j, first + j + 1, ang, count_loss=count_loss)
    return st


def ladder_matrix(M: int) -> np.ndarray:
    """Single-photon transfer matrix of the ladder: row ``j`` holds the output
    amplitudes of a photon entering ``C_(j+1)``."""
    mat = np.zeros((M, M))
    for j in range(M):
        photons = [0] * M
        photons[j] = 1
        st = _apply_ladder(fock_basis_state(photons, [1] * M), 0, M)
        for k in range(M):
            idx = [0] * M
            idx[k] = 1
            mat[j, k] = st.amplitudes[tuple(idx)].real
    return mat


def run_multicopy(
    params: ProtocolParams,
    M: int | None = None,
    cutoff: int = 8,
    method: str = "local",
    max_deficit: float = 1e-4,
) -> HeraldedResult:
    """Simplified M-copy circuit.

    A, B carry TMSV(``lam``); C1, D1 start in vacuum; each pair (C_j, D_j), j >= 2,
    carries TMSV(``(1-T) lam``).  A couples to C1 and B to D1 on splitters of
    transmittance ``T``, the C and D blocks each pass the splitter ladder, and all
    2M ancillas are heralded on ``|1>``.

    ``method="full"`` builds the whole (2M+2)-mode ket; ``"local"`` computes
    Alice's and Bob's heralded transfer tensors separately and contracts them with
    the inputs, which is the only practical route beyond M = 3.
    """
    M = params.M if M is None else int(M)
    if M < 2:
        raise FockError("M must be >= 2")
    if not params.is_pure:
        raise FockError("the multicopy circuit is simulated for pure inputs")
    work = cutoff + 2 * M
    theta = -params.theta
    nu = (1 - params.T) * params.lam
    pattern = [(f"C{j}", 1) for j in range(1, M + 1)] + [(f"D{j}", 1) for j in range(1, M + 1)]
    if method == "full":
        # modes A, B, C1..CM, D1..DM
        anc = [_exact(make_tmsv(nu, (M, M))) for _ in range(M - 1)]
        st = tensor_product(_exact(make_tmsv(params.lam, work)), vacuum([M, M]))
        for pair in anc:
            st = tensor_product(st, pair)
        # reorder pairs (C_j, D_j) into blocks C1..CM, D1..DM
        order = [0, 1] + [2 + 2 * j for j in range(M)] + [3 + 2 * j for j in range(M)]
        st = permute_modes(st, order)
        st = apply_beam_splitter(st, 0, 2, theta, count_loss=False)
        st = apply_beam_splitter(st, 1, 2 + M, theta, count_loss=False)
        st = _apply_ladder(st, 2, M)
        st = _apply_ladder(st, 2 + M, M)
        raw = _select_all(st, [(2 + j, 1) for j in range(2 * M)])
    elif method == "local":
        raw = _multicopy_local(params.lam, nu, theta, M, work, cutoff)
    else:
        raise FockError(f"unknown method {method!r}")
    res = _finish(raw, cutoff, pattern)
    if res.norm_deficit > max_deficit:
        raise CutoffTooSmallError(
            f"norm_deficit {res.norm_deficit:.3g} exceeds {max_deficit:g}; raise the cutoff above {cutoff}"
        )
    return res


def _multicopy_local(lam: float, nu: float, theta: float, M: int, work: int, cutoff: int) -> FockState:
    def circuit(st):
        st = apply_beam_splitter(st, 0, 1, theta, count_loss=False)
        return _apply_ladder(st, 1, M)

    heralds = [(1 + j, 1) for j in range(M)]
    # ancilla inputs: C1 vacuum (cutoff 0 suffices for the input), C2..CM up to M photons
    anc_cuts = (0,) + (M,) * (M - 1)

    def padded(st):
        # widen C1 so it can receive photons from the signal
        return circuit(pad(st, (st.cutoffs[0], M) + st.cutoffs[2:]))

    ea = _local_transfer(work, anc_cuts, padded, heralds, cutoff + M)
    ea = ea[:, :, 0]  # C1 input is vacuum
    c_sig = math.sqrt(1 - lam**2) * lam ** np.arange(work + 1)
    c_anc = math.sqrt(1 - nu**2) * nu ** np.arange(M + 1)
    # contract: out[n, m] = sum_a,x E[n, a, x] E[m, a, x] c_a prod c_x
    weight = c_sig
    for _ in range(M - 1):
        weight = np.multiply.outer(weight, c_anc)
    flat = ea.reshape(ea.shape[0], -1)
    out = (flat * weight.reshape(-1)) @ flat.T
    return FockState(out, 0.0)
