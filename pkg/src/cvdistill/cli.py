"""Command-line front end.

Subcommands: ``verify``, ``figure``, ``scan``, ``gaussify``, ``multicopy``.
Exit codes: 0 success, 1 verification failure, 2 usage error, 3 herald
impossible or divergence in the requested run.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
import warnings
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, analytics, figures, verify
from .fock_engine import FockError, HeraldImpossibleError
from .measures import entanglement_entropy, fidelity_with_tmsv, squeezing_variance
from .report import Table, render, to_svg
from .schemes import (
    CutoffTooSmallError,
    iterate_gaussification,
    run_multicopy,
    run_simplified_two_copy,
    subtracted_state,
)
from .state_prep import KappaRangeWarning, ProtocolParams

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_HERALD = 0, 1, 2, 3
DEFICIT_WARN = 1e-6

DEFAULTS: dict[str, Any] = {
    "lam": 0.4,
    "T": 0.8,
    "kappa2": 1.0,
    "eta": 1.0,
    "M": 2,
    "format": "csv",
}

AXES = {"lambda": "lam", "T": "T", "kappa2": "kappa2", "eta": "eta", "M": "M"}

ANALYTIC_METRICS = ("V_dist", "E", "F_max", "omega_star", "p_success", "V_in", "V_sub", "V_inf", "multicopy_fidelity")
CIRCUIT_METRICS = ("V_circuit", "E_circuit", "probability", "multicopy_fidelity_circuit")
# analytic column each circuit column is compared with
PAIRED = {"V_circuit": "V_dist", "E_circuit": "E", "multicopy_fidelity_circuit": "multicopy_fidelity"}


class UsageError(Exception):
    pass


# -- parsing helpers -------------------------------------------------------------


def parse_grid(text: str, integer: bool = False) -> list:
    """``start:stop:count`` (inclusive linspace), ``start:stop`` (integer step 1),
    a comma list, or a single value."""
    conv = int if integer else float
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) == 3:
                start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
                if count < 1:
                    raise UsageError(f"grid count must be >= 1 in {text!r}")
                values = np.linspace(start, stop, count) if count > 1 else np.array([start])
                if integer:
                    out = [int(round(v)) for v in values]
                    if any(abs(v - o) > 1e-9 for v, o in zip(values, out)):
                        raise UsageError(f"grid {text!r} does not land on integers")
                    return out
                return [float(np.round(v, 12)) for v in values]
            if len(parts) == 2 and integer:
                start, stop = int(parts[0]), int(parts[1])
                if stop < start:
                    raise UsageError(f"empty grid {text!r}")
                return list(range(start, stop + 1))
            raise UsageError(f"bad grid {text!r}; use start:stop:count")
        return [conv(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from exc


def read_config(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected key = value")
        out[key.strip()] = val.strip()
    return out


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill unset options from the config file, then from :data:`DEFAULTS`."""
    actions = {a.dest: a for a in parser._actions}
    if args.config:
        for key, val in read_config(args.config).items():
            dest = AXES.get(key, key.replace("-", "_"))
            if dest not in actions or dest in ("config", "command", "help"):
                raise UsageError(f"unknown config key {key!r} for '{args.command}'")
            if getattr(args, dest, None) is not None:
                continue  # command line wins
            action = actions[dest]
            if isinstance(action, argparse._StoreTrueAction):
                setattr(args, dest, val.lower() in ("1", "true", "yes", "on"))
            elif isinstance(action, argparse._AppendAction):
                setattr(args, dest, [v.strip() for v in val.split(";") if v.strip()])
            else:
                conv = action.type or str
                try:
                    setattr(args, dest, conv(val))
                except (TypeError, ValueError) as exc:
                    raise UsageError(f"config key {key!r}: {exc}") from exc
    for dest, val in DEFAULTS.items():
        if getattr(args, dest, None) is None and dest in actions:
            setattr(args, dest, val)


def _params(args, **override) -> ProtocolParams:
    vals = {k: getattr(args, k) for k in ("lam", "T", "kappa2", "eta", "M")}
    vals.update(override)
    try:
        return ProtocolParams(float(vals["lam"]), float(vals["T"]), float(vals["kappa2"]), float(vals["eta"]), int(vals["M"]))
    except FockError as exc:
        raise UsageError(str(exc)) from exc


def _emit(table: Table, args) -> None:
    text = render(table, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_plot(table: Table, args, x: str, ys: Sequence[str], title: str) -> None:
    if not args.plot:
        return
    if args.plot == "auto":
        if not args.out:
            raise UsageError("--plot without a path needs --out")
        path = Path(args.out).with_suffix(".svg")
    else:
        path = Path(args.plot)
    path.write_text(to_svg(table, x, ys, title))


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common options")
    g.add_argument("--lambda", dest="lam", type=float, help="input squeezing parameter (default 0.4)")
    g.add_argument("--T", type=float, help="subtraction splitter transmittance (default 0.8)")
    g.add_argument("--kappa2", type=float, help="ancilla scaling kappa^2 (default 1)")
    g.add_argument("--eta", type=float, help="channel transmittance (default 1, pure inputs)")
    g.add_argument("--M", type=int, help="number of copies (default 2)")
    g.add_argument("--cutoff", type=int, help="Fock cutoff of the output state")
    g.add_argument("--tol", type=float, help="tolerance (verify: overrides every check)")
    g.add_argument("--out", help="output file (default stdout)")
    g.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    g.add_argument("--plot", nargs="?", const="auto", help="also write an SVG plot (default: OUT with .svg)")
    g.add_argument("--config", help="key = value file; command-line flags win")
    g.add_argument("--threads", type=int, help="worker threads (capped by CVDISTILL_THREADS)")


# -- subcommands ----------------------------------------------------------------------


def cmd_verify(args) -> int:
    only = []
    for item in args.only or []:
        only += [s.strip() for s in item.split(",") if s.strip()]
    try:
        checks, timing = verify.run_suites(args.cutoff or 14, args.tol, only or None)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    width = max(len(c.name) for c in checks) if checks else 10
    lines = []
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"{status}  {c.suite:<18} {c.name:<{width}}  err={c.error:.3e}  tol={c.tolerance:.1e}")
    failed = sum(not c.passed for c in checks)
    for suite, sec in timing.items():
        lines.append(f"# {suite}: {sec:.2f} s")
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    print("\n".join(lines))
    if args.out:
        table = Table(["suite", "check", "error", "tolerance", "passed"], provenance={"command": "verify"})
        for c in checks:
            table.append((c.suite, c.name, c.error, c.tolerance, c.passed))
        Path(args.out).write_text(render(table, args.format))
    return EXIT_OK if failed == 0 else EXIT_FAIL


def cmd_figure(args) -> int:
    name = args.name
    if name == "fig3":
        grid = parse_grid(args.kappa2_grid) if args.kappa2_grid else figures.FIG3_KAPPA2
        _params(args)  # validate
        table = figures.fig3(args.lam, args.T, grid, circuit=args.circuit, cutoff=args.cutoff or 14, threads=args.threads)
        ys = ["V_dist", "V_in", "V_sub", "V_inf"]
    elif name == "fig6":
        lambdas = parse_grid(args.lambdas) if args.lambdas else figures.FIG6_LAMBDAS
        slices = parse_grid(args.slices) if args.slices else figures.FIG6_SLICES
        try:
            table = figures.fig6(lambdas, args.axis, slices, args.points)
        except FockError as exc:
            raise UsageError(str(exc)) from exc
        ys = ["nbar", "nbar_prime"]
    else:
        grid = parse_grid(args.kappa2_grid) if args.kappa2_grid else figures.FIG7_KAPPA2
        panels = figures.FIG7_PANELS
        if args.panel:
            try:
                panels = [tuple(float(v) for v in p.split(",")) for p in args.panel]
            except ValueError as exc:
                raise UsageError(f"--panel takes LAMBDA,ETA: {exc}") from exc
            if any(len(p) != 2 for p in panels):
                raise UsageError("--panel takes LAMBDA,ETA")
        for lam, eta in panels:
            _params(args, lam=lam, eta=eta)
        table = figures.fig7(panels, args.T, grid, cutoff=args.cutoff or 14, threads=args.threads)
        ys = ["V", "V_in", "V_sub", "V_inf", "bound"]
    _warn_deficit(table)
    _emit(table, args)
    x = "x" if name == "fig6" else "kappa2"
    _emit_plot(table, args, x, ys, name)
    return EXIT_OK


def _warn_deficit(table: Table) -> int:
    if "norm_deficit" not in table.columns:
        return 0
    high = sum(1 for d in table.column("norm_deficit") if not d <= DEFICIT_WARN)
    if high:
        print(f"warning: {high} of {len(table)} records have norm_deficit above {DEFICIT_WARN:g}; raise --cutoff",
              file=sys.stderr)
    return high


def _scan_point(base: dict, axis: str, value, metrics: Sequence[str], cutoff: int) -> tuple:
    vals = dict(base)
    vals[AXES[axis]] = value
    out: dict[str, float] = {}
    flags = []
    try:
        params = ProtocolParams(vals["lam"], vals["T"], vals["kappa2"], vals["eta"], int(vals["M"]))
    except FockError as exc:
        return tuple([value] + [math.nan] * len(metrics) + [math.nan, f"invalid: {exc}"])
    lam, T, k2, eta, M = params.lam, params.T, params.kappa2, params.eta, params.M
    mu = params.mu
    tail = 0.0
    pure = params.is_pure
    for m in metrics:
        v = math.nan
        try:
            if m == "V_dist" and pure:
                v = analytics.v_dist(mu, k2)
            elif m == "E" and pure:
                coeffs, _ = analytics.psi_out_prime(lam, T, k2)
                v = analytics.series_entropy(coeffs)
                tail = max(tail, figures._series_tail(coeffs))
            elif m == "F_max" and pure:
                v = analytics.fidelity_tmsv(mu, k2, analytics.omega_star(mu, k2))
            elif m == "omega_star" and pure:
                v = analytics.omega_star(mu, k2)
            elif m == "p_success" and pure:
                v = analytics.p_success_original(lam, T)
            elif m == "V_in":
                v = analytics.v_in_mixed(lam, eta)
            elif m == "V_sub":
                v = analytics.v_sub_mixed(lam, eta, T)
            elif m == "V_inf":
                v = analytics.v_inf_mixed(lam, eta, T) if params.convergent else math.nan
            elif m == "multicopy_fidelity" and pure:
                v = analytics.multicopy_fidelity(lam, T, M) if abs(2 * mu) < 1 else math.nan
        except (ValueError, ZeroDivisionError):
            v = math.nan
        out[m] = v
    circuit = [m for m in metrics if m in ("V_circuit", "E_circuit", "probability")]
    try:
        if circuit:
            res = run_simplified_two_copy(params, cutoff=cutoff)
            tail = max(tail, res.norm_deficit)
            out["V_circuit"] = squeezing_variance(res.state)
            out["E_circuit"] = entanglement_entropy(res.state) if pure else math.nan
            out["probability"] = res.probability
        if "multicopy_fidelity_circuit" in metrics:
            res = run_multicopy(params, M, cutoff=cutoff, max_deficit=math.inf)
            tail = max(tail, res.norm_deficit)
            out["multicopy_fidelity_circuit"] = fidelity_with_tmsv(res.state, 2 * mu) if abs(2 * mu) < 1 else math.nan
    except HeraldImpossibleError as exc:
        flags.append(f"herald_impossible: {exc}")
    except FockError as exc:
        flags.append(f"error: {exc}")
    if not tail <= DEFICIT_WARN:
        flags.append("high_deficit")
    for c_name, a_name in PAIRED.items():
        if c_name in metrics and a_name in metrics:
            a, c = out.get(a_name, math.nan), out.get(c_name, math.nan)
            if math.isfinite(a) and math.isfinite(c) and abs(a - c) >= max(1e-6, 10 * tail):
                flags.append(f"mismatch_{a_name}")
    return tuple([value] + [out.get(m, math.nan) for m in metrics] + [tail, ";".join(flags) or "ok"])


def cmd_scan(args) -> int:
    if args.axis not in AXES:
        raise UsageError(f"unknown axis {args.axis!r}; choose from {', '.join(AXES)}")
    grid = parse_grid(args.range, integer=args.axis == "M")
    if not grid:
        raise UsageError("empty grid")
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = [m for m in metrics if m not in ANALYTIC_METRICS + CIRCUIT_METRICS]
    if unknown:
        raise UsageError(f"unknown metric(s) {', '.join(unknown)}; choose from {', '.join(ANALYTIC_METRICS + CIRCUIT_METRICS)}")
    base = {k: getattr(args, k) for k in ("lam", "T", "kappa2", "eta", "M")}
    cutoff = args.cutoff or 14
    rows = figures.evaluate(lambda v: _scan_point(base, args.axis, v, metrics, cutoff), grid, args.threads)
    prov = {"command": "scan", "axis": args.axis, "range": args.range, "cutoff": cutoff}
    prov.update({"lambda": base["lam"], "T": base["T"], "kappa2": base["kappa2"], "eta": base["eta"], "M": base["M"]})
    prov.pop({"lam": "lambda"}.get(AXES[args.axis], args.axis))
    table = Table([args.axis] + metrics + ["norm_deficit", "flag"], provenance=prov)
    for row in rows:
        table.append(row)
    _warn_deficit(table)
    flags = table.column("flag")
    mismatches = sum("mismatch" in f for f in flags)
    if mismatches:
        print(f"warning: {mismatches} records with analytic/circuit disagreement", file=sys.stderr)
    _emit(table, args)
    numeric = [m for m in metrics]
    _emit_plot(table, args, args.axis, numeric, f"scan {args.axis}")
    if any(f.startswith("invalid") or "error:" in f for f in flags):
        print("warning: some grid points have invalid parameters", file=sys.stderr)
    return EXIT_HERALD if any("herald_impossible" in f for f in flags) else EXIT_OK


def cmd_gaussify(args) -> int:
    params = _params(args)
    cutoff = args.cutoff or (20 if params.is_pure else 14)
    if args.iters < 0:
        raise UsageError("--iters must be >= 0")
    try:
        start = subtracted_state(params, cutoff).state
    except HeraldImpossibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HERALD
    target = params.lambda_d if params.is_pure and params.convergent else None
    _, trace = iterate_gaussification(
        start, max_iters=args.iters, tol=args.tol if args.tol is not None else 1e-8,
        target_lambda=target, residuals=not args.no_residual,
    )
    cols = ["iteration", "probability", "trace_distance", "gaussianity_residual", "variance", "mean_photons",
            "norm_deficit", "fidelity"]
    v_inf = analytics.v_inf_mixed(params.lam, params.eta, params.T) if params.convergent else math.nan
    prov = {
        "command": "gaussify", "lambda": params.lam, "T": params.T, "eta": params.eta, "cutoff": cutoff,
        "iters": args.iters, "converged": trace.converged, "diverged": trace.diverged,
        "target_lambda": target if target is not None else math.nan, "V_inf": v_inf,
    }
    if trace.reason:
        prov["reason"] = trace.reason
    table = Table(cols, provenance=prov)
    for r in trace.records:
        table.append(tuple(getattr(r, c) if getattr(r, c) is not None else math.nan for c in cols))
    _emit(table, args)
    _emit_plot(table, args, "iteration", ["variance"], "gaussification")
    last = trace.records[-1]
    print(
        f"converged={str(trace.converged).lower()} diverged={str(trace.diverged).lower()} "
        f"iterations={last.iteration} variance={last.variance:.10g}"
        + (f" fidelity={last.fidelity:.10f}" if last.fidelity is not None else ""),
        file=sys.stderr,
    )
    return EXIT_HERALD if trace.diverged else EXIT_OK


def cmd_multicopy(args) -> int:
    params = _params(args)
    cutoff = args.cutoff or 8
    try:
        res = run_multicopy(params, params.M, cutoff=cutoff, method=args.method, max_deficit=math.inf)
    except HeraldImpossibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HERALD
    except FockError as exc:
        raise UsageError(str(exc)) from exc
    amps = analytics.multicopy_amplitudes(params.lam, params.T, params.M, cutoff)
    closed = amps / np.linalg.norm(amps)
    diag = np.real_if_close(np.array([res.state.amplitudes[n, n] for n in range(cutoff + 1)]))
    omega = params.lambda_d
    prov = {
        "command": "multicopy", "lambda": params.lam, "T": params.T, "M": params.M, "cutoff": cutoff,
        "method": args.method, "probability": res.probability, "probability_closed_form": float(amps @ amps),
        "norm_deficit": res.norm_deficit,
        "fidelity_tmsv_2mu": fidelity_with_tmsv(res.state, omega) if abs(omega) < 1 else math.nan,
        "fidelity_tmsv_2mu_closed_form": analytics.multicopy_fidelity(params.lam, params.T, params.M)
        if abs(omega) < 1 else math.nan,
    }
    table = Table(["n", "circuit", "closed_form", "abs_diff"], provenance=prov)
    for n in range(cutoff + 1):
        table.append((n, float(np.real(diag[n])), float(closed[n]), float(abs(diag[n] - closed[n]))))
    _warn_deficit_value(res.norm_deficit)
    _emit(table, args)
    _emit_plot(table, args, "n", ["circuit", "closed_form"], f"multicopy M={params.M}")
    return EXIT_OK


def _warn_deficit_value(d: float) -> None:
    if not d <= DEFICIT_WARN:
        print(f"warning: norm_deficit {d:.3g} above {DEFICIT_WARN:g}; raise --cutoff", file=sys.stderr)


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvdistill", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the verification suites")
    p.add_argument("--only", action="append", metavar="SUITE",
                   help=f"run only these suites (repeat or comma-separate): {', '.join(verify.SUITES)}")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("figure", help="write the data behind a figure")
    p.add_argument("name", choices=sorted(figures.FIGURES))
    p.add_argument("--kappa2-grid", help="kappa^2 grid for fig3/fig7 (start:stop:count or list)")
    p.add_argument("--circuit", action="store_true", help="fig3: also run the circuit at every point")
    p.add_argument("--lambdas", help="fig6: lambda values (list)")
    p.add_argument("--axis", choices=("eta", "T"), default="eta", help="fig6: horizontal axis")
    p.add_argument("--slices", help="fig6: fixed values of the other parameter (list)")
    p.add_argument("--points", type=int, default=99, help="fig6: points per curve")
    p.add_argument("--panel", action="append", metavar="LAMBDA,ETA", help="fig7: panel (repeatable)")
    _common(p)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("scan", help="evaluate metrics over a one-dimensional grid")
    p.add_argument("axis", help=f"one of {', '.join(AXES)}")
    p.add_argument("range", help="start:stop:count, start:stop (integer axes) or a comma list")
    p.add_argument("--metrics", default="V_dist,E,F_max,omega_star,p_success",
                   help=f"comma list from {', '.join(ANALYTIC_METRICS + CIRCUIT_METRICS)}")
    _common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("gaussify", help="iterate the Gaussification map on the photon-subtracted state")
    # successive iterates approach each other only geometrically (ratio ~1/2),
    # so reaching the default 1e-8 takes about 25 steps at lambda_D = 0.64
    p.add_argument("--iters", type=int, default=40, help="maximum number of iterations (default 40)")
    p.add_argument("--no-residual", action="store_true", help="skip the Gaussianity residual (faster)")
    _common(p)
    p.set_defaults(func=cmd_gaussify)

    p = sub.add_parser("multicopy", help="simplified M-copy circuit against its closed form")
    p.add_argument("--method", choices=("local", "full"), default="local")
    _common(p)
    p.set_defaults(func=cmd_multicopy)
    return parser


_NEGATIVE_GRID = re.compile(r"^-[0-9.]+[:,]")


def _protect_negative_grids(argv: Sequence[str]) -> list[str]:
    # argparse reads "-0.5:3:200" as an option; a leading space keeps it
    # positional and parse_grid strips it again
    return [" " + a if _NEGATIVE_GRID.match(a) else a for a in argv]


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_protect_negative_grids(sys.argv[1:] if argv is None else argv))
    sub = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
    try:
        _apply_config(args, sub)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KappaRangeWarning)
            return args.func(args)
    except UsageError as exc:
        print(f"cvdistill {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CutoffTooSmallError as exc:
        print(f"cvdistill {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HeraldImpossibleError as exc:
        print(f"cvdistill {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_HERALD
    except BrokenPipeError:
        # reader closed early (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
