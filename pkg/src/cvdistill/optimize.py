"""One-dimensional optimization of the distillation figures of merit."""

from __future__ import annotations

import math
import warnings
from typing import Callable

import numpy as np
from scipy import optimize as _opt

from . import analytics
from .analytics import DegenerateParameterWarning
from .state_prep import KappaRangeWarning

ROOT_TOL = 1e-10
SEARCH_TOL = 1e-8


class InvalidBracketError(ValueError):
    """The bracket does not enclose a minimum."""


class DegenerateError(ValueError):
    """The objective does not depend on the optimization variable."""


def minimize_scalar(f: Callable[[float], float], bracket: tuple, tol: float = SEARCH_TOL) -> tuple[float, float]:
    """Bounded minimization of ``f`` on ``bracket``.

    ``bracket`` is ``(lo, hi)`` or ``(lo, mid, hi)``; with three points the middle
    value must not exceed either end, so a minimum is enclosed.  Brent's
    golden-section / parabolic method is used.  For a function with several
    local minima in the bracket, one of them is returned.
    """
    if len(bracket) == 3:
        lo, mid, hi = map(float, bracket)
        if not lo < mid < hi:
            raise InvalidBracketError(f"bracket points must be increasing, got {bracket}")
        fm = f(mid)
        if fm > f(lo) or fm > f(hi):
            raise InvalidBracketError(f"f(mid) = {fm:g} exceeds an end value; no enclosed minimum")
    elif len(bracket) == 2:
        lo, hi = map(float, bracket)
        if not lo < hi:
            raise InvalidBracketError(f"empty bracket {bracket}")
    else:
        raise InvalidBracketError("bracket needs two or three points")
    res = _opt.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol, "maxiter": 500})
    if not res.success:
        raise RuntimeError(f"minimization did not converge: {res.message}")
    return float(res.x), float(res.fun)


def _stationary(mu: float, k2: float, h: float = 1e-5) -> float:
    return (analytics.v_dist(mu, k2 + h) - analytics.v_dist(mu, k2 - h)) / (2 * h)


def optimal_kappa2(mu: float, T: float | None = None, bracket: tuple = (-0.9, 10.0)) -> float:
    """``kappa^2`` minimizing the two-copy output variance at ``mu``.

    Both stationary points are evaluated and the one with the smaller variance
    wins.  If they are not real, a bounded numeric search over ``bracket`` is used.
    At ``mu = 0`` the variance is flat in ``kappa^2`` and :class:`DegenerateError`
    is raised.  When ``T`` is given, a :class:`KappaRangeWarning` flags
    ``|kappa| > 1/(1-T)``.
    """
    if abs(mu) < 1e-12:
        raise DegenerateError("mu = 0: the variance does not depend on kappa2")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateParameterWarning)
        try:
            roots = analytics.kappa_stationary_roots(mu)
        except ValueError:
            roots = ()
    cands = [r for r in roots if math.isfinite(r)]
    if cands:
        best = min(cands, key=lambda k2: analytics.v_dist(mu, k2))
    else:
        best, _ = minimize_scalar(lambda k2: analytics.v_dist(mu, k2), bracket)
    if T is not None and abs(best) > 1.0 / (1.0 - T) ** 2:
        warnings.warn(
            f"optimal |kappa| = {math.sqrt(abs(best)):.4g} exceeds 1/(1-T) = {1 / (1 - T):.4g}",
            KappaRangeWarning,
            stacklevel=2,
        )
    return float(best)


def optimal_omega(mu: float, kappa2: float) -> float:
    """TMSV parameter with the largest fidelity to the two-copy output."""
    return analytics.omega_star(mu, kappa2)


def omega_by_grid(mu: float, kappa2: float, points: int = 2001) -> float:
    """Grid search followed by a bounded refinement; used to cross-check :func:`optimal_omega`."""
    grid = np.linspace(-0.999, 0.999, points)
    vals = np.array([-analytics.fidelity_tmsv(mu, kappa2, w) for w in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    x, _ = minimize_scalar(lambda w: -analytics.fidelity_tmsv(mu, kappa2, w), (lo, hi), tol=1e-10)
    return x
