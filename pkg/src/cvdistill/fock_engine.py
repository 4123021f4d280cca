"""Truncated Fock-space states and the linear-optics operations acting on them.

A :class:`FockState` holds a complex amplitude tensor with one axis per mode,
axis ``k`` spanning photon numbers ``0..cutoffs[k]``.  A
:class:`DensityOperator` holds a matrix over the row-major flattening of the
same index tuples (mode 0 slowest).

Every state carries a deficit: probability mass that truncation has removed,
in the same units as the squared norm (or trace) of the stored data.  Unitary
and lowering operations never decrease it; :func:`normalize` rescales it
together with the data, so after normalization it reads as a relative error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

HERALD_FLOOR = 1e-300


class FockError(ValueError):
    """Base class for invalid Fock-space operations."""


class KindMismatchError(FockError, TypeError):
    """A pure state and a density operator were combined."""


class HeraldImpossibleError(FockError):
    """The requested measurement outcome has (numerically) zero probability."""


@dataclass(frozen=True, eq=False)
class FockState:
    """Pure multimode state over truncated photon numbers.

    Args:
        amplitudes: complex tensor, one axis per mode.
        norm_deficit: squared-norm mass lost to truncation so far.
    """

    amplitudes: np.ndarray
    norm_deficit: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.ndim == 0:
            raise FockError("a FockState needs at least one mode")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if not self.norm_deficit >= 0.0:
            raise FockError(f"norm_deficit must be nonnegative, got {self.norm_deficit}")
        object.__setattr__(self, "norm_deficit", float(self.norm_deficit))

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return tuple(d - 1 for d in self.amplitudes.shape)

    @property
    def n_modes(self) -> int:
        return self.amplitudes.ndim

    @property
    def squared_norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def amplitude(self, *photons: int) -> complex:
        return complex(self.amplitudes[photons])


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Mixed multimode state over truncated photon numbers.

    Args:
        matrix: square matrix over the flattened multimode basis.
        cutoffs: per-mode maximum photon number (inclusive).
        trace_deficit: trace lost to truncation so far.
    """

    matrix: np.ndarray
    cutoffs: tuple[int, ...]
    trace_deficit: float = 0.0
    _dims: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        cutoffs = tuple(int(c) for c in self.cutoffs)
        if not cutoffs or min(cutoffs) < 0:
            raise FockError(f"invalid cutoffs {cutoffs}")
        dims = tuple(c + 1 for c in cutoffs)
        dim = int(np.prod(dims))
        mat = np.array(self.matrix, dtype=np.complex128)
        if mat.shape != (dim, dim):
            raise FockError(f"matrix shape {mat.shape} does not match cutoffs {cutoffs}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "cutoffs", cutoffs)
        object.__setattr__(self, "_dims", dims)
        if not self.trace_deficit >= 0.0:
            raise FockError(f"trace_deficit must be nonnegative, got {self.trace_deficit}")
        object.__setattr__(self, "trace_deficit", float(self.trace_deficit))

    @classmethod
    def from_tensor(cls, tensor: np.ndarray, trace_deficit: float = 0.0) -> "DensityOperator":
        k = tensor.ndim // 2
        dims = tensor.shape[:k]
        dim = int(np.prod(dims))
        return cls(tensor.reshape(dim, dim), tuple(d - 1 for d in dims), trace_deficit)

    @property
    def tensor(self) -> np.ndarray:
        """Read-only view with axes (ket_0..ket_{K-1}, bra_0..bra_{K-1})."""
        return self.matrix.reshape(self._dims + self._dims)

    @property
    def n_modes(self) -> int:
        return len(self.cutoffs)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def squared_norm(self) -> float:
        return self.trace

    @property
    def norm_deficit(self) -> float:
        return self.trace_deficit


State = Union[FockState, DensityOperator]


def deficit(state: State) -> float:
    return state.norm_deficit if isinstance(state, FockState) else state.trace_deficit


def _rebuild(state: State, data: np.ndarray, lost: float = 0.0) -> State:
    """New state of the same kind from a pure tensor / density tensor."""
    if isinstance(state, FockState):
        return FockState(data, state.norm_deficit + lost)
    return DensityOperator.from_tensor(data, state.trace_deficit + lost)


def _mass(state: State, data: np.ndarray) -> float:
    if isinstance(state, FockState):
        return float(np.vdot(data, data).real)
    k = data.ndim // 2
    dim = int(np.prod(data.shape[:k]))
    return float(np.trace(data.reshape(dim, dim)).real)


def _check_mode(state: State, mode: int) -> int:
    if not 0 <= mode < state.n_modes:
        raise FockError(f"mode {mode} out of range for a {state.n_modes}-mode state")
    return mode


# -- construction ----------------------------------------------------------------


def _as_cutoffs(cutoffs: int | Sequence[int], n_modes: int) -> tuple[int, ...]:
    if isinstance(cutoffs, (int, np.integer)):
        return (int(cutoffs),) * n_modes
    cutoffs = tuple(int(c) for c in cutoffs)
    if len(cutoffs) != n_modes:
        raise FockError(f"expected {n_modes} cutoffs, got {len(cutoffs)}")
    return cutoffs


def fock_basis_state(photons: Sequence[int], cutoffs: int | Sequence[int]) -> FockState:
    """Product of number states ``|n_1, ..., n_K>``."""
    photons = tuple(int(n) for n in photons)
    cutoffs = _as_cutoffs(cutoffs, len(photons))
    if any(n < 0 or n > c for n, c in zip(photons, cutoffs)):
        raise FockError(f"photon numbers {photons} exceed cutoffs {cutoffs}")
    amps = np.zeros(tuple(c + 1 for c in cutoffs), dtype=np.complex128)
    amps[photons] = 1.0
    return FockState(amps)


def vacuum(cutoffs: Sequence[int]) -> FockState:
    return fock_basis_state([0] * len(cutoffs), cutoffs)


def to_density(state: State) -> DensityOperator:
    if isinstance(state, DensityOperator):
        return state
    psi = state.amplitudes.reshape(-1)
    return DensityOperator(np.outer(psi, psi.conj()), state.cutoffs, state.norm_deficit)


# -- composition -----------------------------------------------------------------


def tensor_product(a: State, b: State) -> State:
    """Joint state over the concatenated mode list ``a`` then ``b``."""
    if type(a) is not type(b):
        raise KindMismatchError(f"cannot combine {type(a).__name__} with {type(b).__name__}")
    na, nb = a.squared_norm, b.squared_norm
    da, db = deficit(a), deficit(b)
    lost = na * db + da * nb + da * db
    if isinstance(a, FockState):
        return FockState(np.multiply.outer(a.amplitudes, b.amplitudes), lost)
    ka, kb = a.n_modes, b.n_modes
    joint = np.multiply.outer(a.tensor, b.tensor)
    # (ket_a, bra_a, ket_b, bra_b) -> (ket_a, ket_b, bra_a, bra_b)
    order = (
        list(range(ka))
        + list(range(2 * ka, 2 * ka + kb))
        + list(range(ka, 2 * ka))
        + list(range(2 * ka + kb, 2 * ka + 2 * kb))
    )
    return DensityOperator.from_tensor(joint.transpose(order), lost)


# -- single-mode operators -------------------------------------------------------


def _ket_bra_axes(state: State, mode: int) -> tuple[int, ...]:
    if isinstance(state, FockState):
        return (mode,)
    return (mode, state.n_modes + mode)


def apply_mode_operator(state: State, mode: int, op: np.ndarray) -> State:
    """Apply a square matrix ``op`` (acting on ``mode``) as ``op|psi>`` or ``op rho op^+``.

    The matrix must be ``(cutoff + 1)``-dimensional; nothing is added to the deficit.
    """
    _check_mode(state, mode)
    dim = state.cutoffs[mode] + 1
    op = np.asarray(op)
    if op.shape != (dim, dim):
        raise FockError(f"operator shape {op.shape} does not match mode dimension {dim}")
    data = state.amplitudes if isinstance(state, FockState) else state.tensor
    for ax, mat in zip(_ket_bra_axes(state, mode), (op, op.conj())):
        data = np.moveaxis(np.tensordot(mat, data, axes=(1, ax)), 0, ax)
    return _rebuild(state, data)


def lowering_matrix(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1)


def apply_annihilation(state: State, mode: int) -> State:
    """Unnormalized ``a|psi>``; the top level is zero-filled."""
    _check_mode(state, mode)
    return apply_mode_operator(state, mode, lowering_matrix(state.cutoffs[mode]))


def apply_exponential_number(state: State, mode: int, base: float) -> State:
    """Unnormalized ``base**(n/2)`` on ``mode``: amplitude(n) <- base^(n/2) amplitude(n)."""
    if not base > 0:
        raise FockError(f"base must be positive, got {base}")
    _check_mode(state, mode)
    n = np.arange(state.cutoffs[mode] + 1)
    return apply_mode_operator(state, mode, np.diag(float(base) ** (n / 2.0)))


def apply_phase(state: State, mode: int, phi: float) -> State:
    """``exp(i phi n)`` on ``mode``."""
    _check_mode(state, mode)
    n = np.arange(state.cutoffs[mode] + 1)
    return apply_mode_operator(state, mode, np.diag(np.exp(1j * phi * n)))


# -- beam splitter ---------------------------------------------------------------


@lru_cache(maxsize=8192)
def block_unitary(total: int, theta: float) -> np.ndarray:
    """``exp[theta (a^+ b - a b^+)]`` on the span of ``|n, total - n>``, indexed by n.

    The generator is real antisymmetric and tridiagonal; ``-i G`` is Hermitian, so
    the exponential comes from its eigendecomposition and is real.
    """
    n = np.arange(total)
    hop = np.sqrt((n + 1.0) * (total - n))
    gen = np.zeros((total + 1, total + 1))
    gen[n + 1, n] = hop
    gen[n, n + 1] = -hop
    w, v = np.linalg.eigh(-1j * gen)
    u = (v * np.exp(1j * theta * w)) @ v.conj().T
    u = u.real.copy()
    u.setflags(write=False)
    return u


def _apply_blocks(data: np.ndarray, ax_i: int, ax_j: int, theta: float) -> np.ndarray:
    data = np.moveaxis(data, (ax_i, ax_j), (0, 1))
    di, dj = data.shape[:2]
    out = np.zeros_like(data)
    for total in range(di + dj - 1):
        ni = np.arange(max(0, total - dj + 1), min(di - 1, total) + 1)
        u = block_unitary(total, float(theta))[np.ix_(ni, ni)]
        out[ni, total - ni] = np.tensordot(u, data[ni, total - ni], axes=(1, 0))
    return np.moveaxis(out, (0, 1), (ax_i, ax_j))


def apply_beam_splitter(
    state: State, mode_i: int, mode_j: int, theta: float, count_loss: bool = True
) -> State:
    """Apply ``exp[theta (a_i^+ a_j - a_i a_j^+)]``.

    ``|1, 0>`` goes to ``cos(theta)|1, 0> - sin(theta)|0, 1>``.  Each total-photon
    block ``n_i + n_j = N`` is transformed exactly; output components beyond a
    cutoff are dropped and their mass is added to the deficit.  Pass
    ``count_loss=False`` only when the dropped components provably cannot reach a
    later herald (e.g. an ancilla sized to its heralded photon number).
    """
    _check_mode(state, mode_i)
    _check_mode(state, mode_j)
    if mode_i == mode_j:
        raise FockError("beam splitter needs two distinct modes")
    if isinstance(state, FockState):
        data = _apply_blocks(state.amplitudes, mode_i, mode_j, theta)
    else:
        k = state.n_modes
        data = _apply_blocks(state.tensor, mode_i, mode_j, theta)
        data = _apply_blocks(data, k + mode_i, k + mode_j, theta)
    lost = max(state.squared_norm - _mass(state, data), 0.0) if count_loss else 0.0
    return _rebuild(state, data, lost)


def transmittance_angle(T: float) -> float:
    """Mixing angle ``arccos(sqrt(T))`` of a splitter with intensity transmittance ``T``."""
    if not 0.0 <= T <= 1.0:
        raise FockError(f"transmittance must lie in [0, 1], got {T}")
    return float(np.arccos(np.sqrt(T)))


# -- measurement and reduction ---------------------------------------------------


def select_mode(state: State, mode: int, fock_n: int) -> State:
    """Unnormalized ``<n|_mode`` applied to the state; the mode is removed."""
    _check_mode(state, mode)
    if not 0 <= fock_n <= state.cutoffs[mode]:
        raise FockError(f"outcome {fock_n} outside cutoff {state.cutoffs[mode]} of mode {mode}")
    if isinstance(state, FockState):
        if state.n_modes == 1:
            raise FockError("cannot project the only mode of a state")
        return FockState(np.take(state.amplitudes, fock_n, axis=mode), state.norm_deficit)
    k = state.n_modes
    if k == 1:
        raise FockError("cannot project the only mode of a state")
    t = np.take(state.tensor, fock_n, axis=k + mode)
    t = np.take(t, fock_n, axis=mode)
    return DensityOperator.from_tensor(t, state.trace_deficit)


@dataclass(frozen=True)
class HeraldedResult:
    """Normalized conditional state with its success probability.

    ``norm_deficit`` is relative to the normalized output.  ``herald_pattern``
    lists ``(mode label, Fock outcome)`` pairs in the order they were applied.
    """

    state: State
    probability: float
    norm_deficit: float
    herald_pattern: tuple = ()


def project_mode(
    state: State, mode: int, fock_n: int, floor: float = HERALD_FLOOR
) -> HeraldedResult:
    """Project ``mode`` onto ``|fock_n>`` and renormalize the remaining modes."""
    reduced = select_mode(state, mode, fock_n)
    p = reduced.squared_norm / state.squared_norm
    if not p > floor:
        raise HeraldImpossibleError(f"outcome |{fock_n}> on mode {mode} has probability {p:.3g}")
    out, _ = normalize(reduced)
    return HeraldedResult(out, p, deficit(out), ((mode, fock_n),))


def normalize(state: State) -> tuple[State, float]:
    """Return the unit-norm (unit-trace) state and the prior norm.

    For density operators the returned "norm" is the prior trace.
    """
    if isinstance(state, FockState):
        norm = float(np.sqrt(state.squared_norm))
        if not norm > 0:
            raise FockError("cannot normalize a zero state")
        return FockState(state.amplitudes / norm, state.norm_deficit / norm**2), norm
    tr = state.trace
    if not tr > 0:
        raise FockError("cannot normalize a zero-trace operator")
    return DensityOperator(state.matrix / tr, state.cutoffs, state.trace_deficit / tr), tr


def partial_trace(rho: State, keep_modes: Sequence[int]) -> DensityOperator:
    """Reduced density operator on ``keep_modes`` (kept in the given order)."""
    keep = [int(m) for m in keep_modes]
    if not keep:
        raise FockError("keep_modes must be nonempty")
    if len(set(keep)) != len(keep):
        raise FockError(f"duplicate modes in {keep}")
    for m in keep:
        _check_mode(rho, m)
    if isinstance(rho, FockState):
        rest = [m for m in range(rho.n_modes) if m not in keep]
        psi = np.transpose(rho.amplitudes, keep + rest)
        dk = int(np.prod([rho.cutoffs[m] + 1 for m in keep]))
        psi = psi.reshape(dk, -1)
        cut = tuple(rho.cutoffs[m] for m in keep)
        return DensityOperator(psi @ psi.conj().T, cut, rho.norm_deficit)
    k = rho.n_modes
    letters = [chr(ord("a") + i) for i in range(2 * k)]
    bra = letters[k:]
    for m in range(k):
        if m not in keep:
            bra[m] = letters[m]
    out = "".join(letters[m] for m in keep) + "".join(bra[m] for m in keep)
    t = np.einsum("".join(letters[:k]) + "".join(bra) + "->" + out, rho.tensor)
    return DensityOperator.from_tensor(t, rho.trace_deficit)


def truncate(state: State, cutoffs: Sequence[int]) -> State:
    """Drop photon numbers above ``cutoffs``; the dropped mass joins the deficit."""
    cutoffs = _as_cutoffs(cutoffs, state.n_modes)
    if any(c < 0 or c > old for c, old in zip(cutoffs, state.cutoffs)):
        raise FockError(f"cannot truncate cutoffs {state.cutoffs} to {cutoffs}")
    idx = tuple(slice(0, c + 1) for c in cutoffs)
    if isinstance(state, FockState):
        data = state.amplitudes[idx]
    else:
        data = state.tensor[idx + idx]
    lost = max(state.squared_norm - _mass(state, data), 0.0)
    return _rebuild(state, np.array(data), lost)


def pad(state: State, cutoffs: Sequence[int]) -> State:
    """Zero-extend to larger cutoffs."""
    cutoffs = _as_cutoffs(cutoffs, state.n_modes)
    widths = [(0, c - old) for c, old in zip(cutoffs, state.cutoffs)]
    if any(w[1] < 0 for w in widths):
        raise FockError(f"cannot pad cutoffs {state.cutoffs} to {cutoffs}")
    if isinstance(state, FockState):
        return FockState(np.pad(state.amplitudes, widths), state.norm_deficit)
    return DensityOperator.from_tensor(np.pad(state.tensor, widths + widths), state.trace_deficit)


def permute_modes(state: State, order: Sequence[int]) -> State:
    order = list(order)
    if sorted(order) != list(range(state.n_modes)):
        raise FockError(f"{order} is not a permutation of {state.n_modes} modes")
    if isinstance(state, FockState):
        return FockState(np.transpose(state.amplitudes, order), state.norm_deficit)
    k = state.n_modes
    return DensityOperator.from_tensor(
        np.transpose(state.tensor, order + [k + m for m in order]), state.trace_deficit
    )
