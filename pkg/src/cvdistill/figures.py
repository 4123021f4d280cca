"""Data behind the figures: two-copy performance, ancilla thermal noise, mixed inputs.

Every builder returns a :class:`~cvdistill.report.Table`.  Grid points are
evaluated concurrently and assembled in grid order.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from . import analytics
from .fock_engine import FockError
from .measures import entanglement_entropy, squeezing_variance
from .report import Table
from .schemes import run_simplified_two_copy
from .state_prep import KappaRangeWarning, ProtocolParams, reduced_noise_params, thermal_params

# the entropy of the output has a local maximum near kappa2 = -0.4, so the
# default grid starts at 0 where all four curves are monotone or unimodal
FIG3_KAPPA2 = tuple(np.round(np.linspace(0.0, 3.0, 31), 12))
FIG6_LAMBDAS = (0.4, 0.8)
FIG6_SLICES = (0.2, 0.5, 0.8)
FIG7_PANELS = ((0.4, 0.8), (0.4, 0.9), (0.6, 0.8), (0.6, 0.9))
FIG7_KAPPA2 = tuple(np.round(np.linspace(0.0, 3.0, 31), 12))


def thread_count(requested: int | None = None) -> int:
    """Worker count: ``requested``, capped by ``CVDISTILL_THREADS`` when set."""
    n = requested or os.cpu_count() or 1
    env = os.environ.get("CVDISTILL_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ValueError(f"CVDISTILL_THREADS must be an integer, got {env!r}") from exc
        if cap < 1:
            raise ValueError("CVDISTILL_THREADS must be >= 1")
        n = min(n, cap)
    return max(1, n)


def evaluate(fn: Callable, points: Iterable, threads: int | None = None) -> list:
    """``[fn(p) for p in points]``, run on a thread pool; results keep grid order.

    :class:`KappaRangeWarning` is silenced for the whole batch; scans cover
    ``kappa2`` ranges on purpose.
    """
    points = list(points)
    workers = min(thread_count(threads), max(len(points), 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KappaRangeWarning)
        if workers == 1:
            return [fn(p) for p in points]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, points))


def _series_tail(coeffs: np.ndarray) -> float:
    return max(0.0, 1.0 - float(np.sum(np.abs(coeffs) ** 2)))


# -- two-copy performance versus kappa^2 ------------------------------------------


def fig3(
    lam: float = 0.4,
    T: float = 0.8,
    kappa2: Sequence[float] = FIG3_KAPPA2,
    circuit: bool = False,
    cutoff: int = 14,
    threads: int | None = None,
) -> Table:
    """Variance, entropy, best TMSV fidelity and its parameter versus ``kappa^2``.

    The reference levels of the input, the subtracted state and the asymptotic
    Gaussian state are constant columns.  With ``circuit=True`` the simplified
    circuit is run at each point and ``V_circuit``/``E_circuit`` are added.
    """
    mu = T * lam
    ref = {
        "V_in": analytics.v_tmsv(lam),
        "V_sub": analytics.v_sub_pure(mu),
        "V_inf": analytics.v_inf_pure(lam, T),
        "E_in": analytics.tmsv_entropy(lam),
        "E_sub": analytics.series_entropy(analytics.subtracted_amplitudes(lam, T, analytics.series_nmax(mu))),
        "E_inf": analytics.tmsv_entropy(2 * mu) if abs(2 * mu) < 1 else math.nan,
    }
    columns = ["kappa2", "V_dist", "E", "F_max", "omega_star"]
    if circuit:
        columns += ["V_circuit", "E_circuit", "probability"]
    columns += ["norm_deficit"] + list(ref)

    def point(k2: float) -> tuple:
        coeffs, _ = analytics.psi_out_prime(lam, T, k2)
        w = analytics.omega_star(mu, k2)
        row = [k2, analytics.v_dist(mu, k2), analytics.series_entropy(coeffs), analytics.fidelity_tmsv(mu, k2, w), w]
        tail = _series_tail(coeffs)
        if circuit:
            res = run_simplified_two_copy(ProtocolParams(lam, T, k2), cutoff=cutoff)
            row += [squeezing_variance(res.state), entanglement_entropy(res.state), res.probability]
            tail = max(tail, res.norm_deficit)
        return tuple(row + [tail] + list(ref.values()))

    table = Table(columns, provenance={"figure": "fig3", "lambda": lam, "T": T, "cutoff": cutoff if circuit else "analytic"})
    for row in evaluate(point, [float(k) for k in kappa2], threads):
        table.append(row)
    return table


# -- thermal noise of the ancilla state --------------------------------------------


def fig6(
    lambdas: Sequence[float] = FIG6_LAMBDAS,
    axis: str = "eta",
    slices: Sequence[float] = FIG6_SLICES,
    points: int = 99,
) -> Table:
    """``nbar`` and ``nbar'`` versus ``eta`` (``axis="eta"``, slices fix ``T``) or
    versus ``T`` (``axis="T"``, slices fix ``eta``)."""
    if axis not in ("eta", "T"):
        raise FockError(f"axis must be 'eta' or 'T', got {axis!r}")
    grid = np.linspace(0.01, 1.0, points) if axis == "eta" else np.linspace(0.01, 0.99, points)
    slice_name = "T" if axis == "eta" else "eta"
    table = Table(
        ["lambda", slice_name, "x", "nbar", "nbar_prime"],
        provenance={"figure": "fig6", "axis": axis},
    )
    for lam in lambdas:
        for fixed in slices:
            for x in grid:
                eta, T = (x, fixed) if axis == "eta" else (fixed, x)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", KappaRangeWarning)
                    params = ProtocolParams(float(lam), float(T), 1.0, float(eta))
                nbar = thermal_params(params).nbar
                nbar_p, _ = reduced_noise_params(params)
                table.append((float(lam), float(fixed), float(x), nbar, nbar_p))
    return table


# -- mixed inputs ----------------------------------------------------------------------


def fig7(
    panels: Sequence[tuple[float, float]] = FIG7_PANELS,
    T: float = 0.8,
    kappa2: Sequence[float] = FIG7_KAPPA2,
    cutoff: int = 14,
    threads: int | None = None,
) -> Table:
    """Simplified two-copy variance for lossy inputs versus ``kappa^2``, per
    ``(lambda, eta)`` panel, with the input, subtracted, asymptotic and bound levels."""
    grid = [(float(lam), float(eta), float(k2)) for lam, eta in panels for k2 in kappa2]

    def point(p):
        lam, eta, k2 = p
        res = run_simplified_two_copy(ProtocolParams(lam, T, k2, eta), cutoff=cutoff)
        m = analytics.mixed_metrics(lam, eta, T)
        return (lam, eta, k2, squeezing_variance(res.state), m.v_in, m.v_sub, m.v_inf, m.bound,
                res.probability, res.norm_deficit)

    table = Table(
        ["lambda", "eta", "kappa2", "V", "V_in", "V_sub", "V_inf", "bound", "probability", "norm_deficit"],
        provenance={"figure": "fig7", "T": T, "cutoff": cutoff},
    )
    for row in evaluate(point, grid, threads):
        table.append(row)
    return table


FIGURES = {"fig3": fig3, "fig6": fig6, "fig7": fig7}
