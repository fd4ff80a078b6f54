"""Command-line front end: gain synthesis, scenario simulation, model
validation against flight data, and flight-envelope statistics.

Exit codes are a stable scripting contract: 0 success, 1 input/usage
error, 2 numerical failure (synthesis breakdown or a diverged run). All
output files are written atomically.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources

import numpy as np

from .errors import ConfigError, DivergenceError, SynthesisError
from .harness import RUNLOG_COLUMNS, load_scenario, metrics, run_scenario
from .ioutil import atomic_write_text
from .lqr import (
    INPUT_LABELS,
    SIGMA_LABELS,
    LqrWeights,
    default_weights,
    lqr_gain,
    read_gain_csv,
    write_gain_csv,
)
from .pipeline import (
    FilterConfig,
    ValidationReport,
    flight_envelope,
    load_command_csv,
    load_mocap_csv,
    load_runlog_csv,
    reconstruct,
    reconstruct_runlog,
    validate_model,
)
from .vehicle import BUILTIN_PROFILE, load_params

__all__ = ["main"]

BUNDLED_SCENARIOS = ("hover", "circle", "disturbance")


class _UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse calls sys.exit(2) on bad input; remap to the exit-1 contract
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--params",
        default=BUILTIN_PROFILE,
        help=f"vehicle parameter YAML, or the built-in profile {BUILTIN_PROFILE!r}",
    )
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--quiet", action="store_true", help="suppress stdout reports")

    ap = _Parser(prog="flapsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gains", parents=[common], help="synthesize the hover LQR gain")
    g.add_argument("--q", help="comma-separated 10-entry state weight diagonal")
    g.add_argument("--r", help="comma-separated 3-entry input weight diagonal")
    g.add_argument("--gain-file", default="gains.csv", help="gain CSV filename inside --out")

    s = sub.add_parser("simulate", parents=[common], help="run a closed-loop scenario")
    s.add_argument("scenario", help=f"scenario file path or bundled name {BUNDLED_SCENARIOS}")
    s.add_argument("--gains", help="gain CSV (default: synthesize with default weights)")
    s.add_argument("--seed", type=int, help="override the scenario seed")
    s.add_argument("--noise", choices=("on", "off"), help="override the scenario noise flag")

    v = sub.add_parser("validate", parents=[common], help="compare flight data with the model")
    v.add_argument("data", nargs="+", help="run-log CSVs and/or mocap pose CSVs")
    v.add_argument(
        "--commands",
        action="append",
        default=[],
        help="command CSV (t,A,dA,Vo) for each mocap input, in order",
    )
    v.add_argument("--cutoff", type=float, default=20.0, help="filter cutoff Hz (default 20)")
    v.add_argument("--legacy-coriolis", action="store_true", help=argparse.SUPPRESS)

    e = sub.add_parser("envelope", parents=[common], help="tilt/speed visit histogram")
    e.add_argument("data", nargs="+", help="run-log CSVs and/or mocap pose CSVs")
    e.add_argument("--cutoff", type=float, default=20.0, help="filter cutoff Hz (default 20)")
    e.add_argument("--tilt-max", type=float, default=60.0, help="max tilt edge, deg")
    e.add_argument("--tilt-bins", type=int, default=12)
    e.add_argument("--speed-max", type=float, default=0.8, help="max speed edge, m/s")
    e.add_argument("--speed-bins", type=int, default=16)
    e.add_argument(
        "--horizontal", action="store_true", help="bin |(u,v)| instead of |V_b|"
    )
    return ap


def _ensure_outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _parse_diag(text: str, n: int, what: str) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise _UsageError(f"--{what}: {exc}") from None
    if vals.shape != (n,):
        raise _UsageError(f"--{what}: expected {n} comma-separated entries, got {len(vals)}")
    return vals


def _weights_from_args(args) -> LqrWeights:
    defaults = default_weights()
    q = np.diag(defaults.Q).copy() if args.q is None else _parse_diag(args.q, 10, "q")
    r = np.diag(defaults.R).copy() if args.r is None else _parse_diag(args.r, 3, "r")
    if np.any(r <= 0.0):
        raise _UsageError("--r: R must be positive definite (all diagonal entries > 0)")
    if np.any(q < 0.0):
        raise _UsageError("--q: Q diagonal entries must be >= 0")
    return LqrWeights.from_diagonals(q, r)


def _cmd_gains(args) -> int:
    p = load_params(args.params)
    sol = lqr_gain(p, _weights_from_args(args))
    out = _ensure_outdir(args.out)
    gain_path = os.path.join(out, args.gain_file)
    stem = os.path.splitext(gain_path)[0]
    write_gain_csv(gain_path, sol.K)
    write_gain_csv(stem + "_P.csv", sol.P)

    eigs = sorted(sol.closed_loop_eigs, key=lambda z: z.real)
    lines = [
        "hover LQR synthesis",
        f"params: {args.params}",
        f"states: {', '.join(SIGMA_LABELS)}",
        f"inputs: {', '.join(INPUT_LABELS)}",
        f"care residual (relative): {sol.care_residual:.3e}",
        "closed-loop eigenvalues:",
    ]
    lines += [f"  {z.real:+.6e} {z.imag:+.6e}j" for z in eigs]
    atomic_write_text(stem + "_report.txt", "\n".join(lines) + "\n")
    if not args.quiet:
        print(f"gain written to {gain_path}")
        print(f"care residual: {sol.care_residual:.3e}")
        print(f"slowest closed-loop pole: {max(z.real for z in eigs):+.4f}")
    return 0


def _resolve_scenario(name: str):
    if os.path.exists(name):
        return load_scenario(name)
    base = name[: -len(".scenario")] if name.endswith(".scenario") else name
    if os.sep not in name and base in BUNDLED_SCENARIOS:
        ref = resources.files("flapsim") / "scenarios" / f"{base}.scenario"
        with resources.as_file(ref) as path:
            return load_scenario(path)
    raise FileNotFoundError(
        f"scenario {name!r} is neither a file nor one of the bundled "
        f"scenarios {BUNDLED_SCENARIOS}"
    )


def _cmd_simulate(args) -> int:
    import dataclasses

    p = load_params(args.params)
    sc = _resolve_scenario(args.scenario)
    if args.seed is not None:
        sc = dataclasses.replace(sc, seed=args.seed)
    if args.noise is not None:
        sc = dataclasses.replace(
            sc, noise=dataclasses.replace(sc.noise, enabled=(args.noise == "on"))
        )
    K = read_gain_csv(args.gains) if args.gains else lqr_gain(p).K
    out = _ensure_outdir(args.out)
    try:
        log = run_scenario(sc, p, K)
    except DivergenceError as exc:
        if exc.partial_log is not None:
            partial = os.path.join(out, f"{sc.name}_runlog_partial.csv")
            exc.partial_log.write_csv(partial)
            print(f"run diverged; partial log written to {partial}", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    path = os.path.join(out, f"{sc.name}_runlog.csv")
    log.write_csv(path)
    if not args.quiet:
        print(f"run log written to {path}  ({len(log)} ticks, seed {sc.seed})")
        print(metrics(log).to_text())
    return 0


def _is_runlog_file(path: str) -> bool:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    return header == ",".join(RUNLOG_COLUMNS)


def _reconstruct_any(path: str, commands, cfg: FilterConfig, p):
    """Reconstruct one input file; mocap files consume one command CSV."""
    if _is_runlog_file(path):
        return reconstruct_runlog(load_runlog_csv(path), cfg)
    tr = load_mocap_csv(path)
    rs = reconstruct(tr, cfg)
    if commands:
        t_c, cmds = load_command_csv(commands.pop(0))
        rs = rs.attach_commands(t_c, cmds, p)
    return rs


def _stack_reports(reports) -> ValidationReport:
    if len(reports) == 1:
        return reports[0]
    ts, offset = [], 0.0
    for r in reports:
        ts.append(r.t - r.t[0] + offset)
        span = r.t[-1] - r.t[0]
        offset += span + (span / max(len(r.t) - 1, 1))  # one nominal gap sample
    meas = np.vstack([r.measured for r in reports])
    pred = np.vstack([r.predicted for r in reports])
    err = meas - pred
    return ValidationReport(
        axes=reports[0].axes,
        rms_error=np.sqrt(np.mean(err**2, axis=0)),
        signal_rms=np.sqrt(np.mean(meas**2, axis=0)),
        t=np.concatenate(ts),
        measured=meas,
        predicted=pred,
    )


def _cmd_validate(args) -> int:
    p = load_params(args.params)
    cfg = FilterConfig(cutoff_hz=args.cutoff)
    commands = list(args.commands)
    reports = []
    for path in args.data:
        rs = _reconstruct_any(path, commands, cfg, p)
        if rs.wrench is None:
            raise ConfigError(
                f"{path}: no wrench available — mocap inputs need a --commands CSV"
            )
        reports.append(validate_model(rs, p, legacy_coriolis=args.legacy_coriolis))
    report = _stack_reports(reports)
    out = _ensure_outdir(args.out)
    report.write_series_csv(os.path.join(out, "validation_series.csv"))
    atomic_write_text(os.path.join(out, "validation_report.txt"), report.to_text() + "\n")
    if not args.quiet:
        print(report.to_text())
        print(f"series written to {os.path.join(out, 'validation_series.csv')}")
    return 0


def _cmd_envelope(args) -> int:
    p = load_params(args.params)
    cfg = FilterConfig(cutoff_hz=args.cutoff)
    if args.tilt_bins < 1 or args.speed_bins < 1:
        raise _UsageError("bin counts must be >= 1")
    tilt_edges = np.linspace(0.0, args.tilt_max, args.tilt_bins + 1)
    speed_edges = np.linspace(0.0, args.speed_max, args.speed_bins + 1)
    mode = "horizontal" if args.horizontal else "total"
    grid = None
    commands: list = []
    for path in args.data:
        rs = _reconstruct_any(path, commands, cfg, p)
        g = flight_envelope(rs, tilt_edges, speed_edges, speed_mode=mode)
        grid = g if grid is None else grid.merge(g)
    out = _ensure_outdir(args.out)
    path = os.path.join(out, "envelope.csv")
    grid.write_csv(path)
    if not args.quiet:
        occupied = int(np.count_nonzero(grid.counts))
        print(
            f"envelope written to {path}  ({grid.total()} samples, "
            f"{occupied} occupied bins)"
        )
    return 0


_DISPATCH = {
    "gains": _cmd_gains,
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
    "envelope": _cmd_envelope,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _DISPATCH[args.command](args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        # covers schema errors, bad CLI values, and malformed input files
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SynthesisError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
