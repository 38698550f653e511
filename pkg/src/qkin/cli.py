"""``qkin`` command-line entry point."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import tomli

from . import check
from .config import ConfigError, load_config
from .dynamics import StepBudgetExhausted, run
from .entropy import PhiGrid, scan_phi_domain
from .equilibrium import (
    InfeasibleTargets,
    SolverDidNotConverge,
    equilibrium_state,
    solve_params,
    stationarity_residuals,
)
from .gas import moments
from .kernel import build_kernel
from .qmath import DomainError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_NEGATIVE_PHI = 3
EXIT_CHECK_FAILED = 4

EXIT_CODES_HELP = """\
exit codes:
  0  success
  1  invalid configuration or arguments
  2  runtime failure (step budget exhausted, domain error, infeasible targets)
  3  scan-phi --assert-positive found negative phi cells
  4  check: at least one invariant failed

environment:
  QKIN_THREADS  positive integer cap on worker threads (default 1)
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _threads() -> int:
    raw = os.environ.get("QKIN_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise ConfigError(f"QKIN_THREADS must be a positive integer, got {raw!r}")
    return value


def _prefix(cfg, config_path, override) -> Path:
    if override:
        return Path(override)
    if cfg.prefix:
        return Path(cfg.prefix)
    return Path(config_path).with_suffix("")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def cmd_simulate(config_path, out=None) -> int:
    try:
        _threads()
        cfg = load_config(config_path)
        if cfg.integrator is None:
            raise ConfigError(f"{config_path}: table [integrator] is missing")
        if cfg.initial is None:
            raise ConfigError(f"{config_path}: table [initial] is missing")
        prefix = _prefix(cfg, config_path, out)
        initial = cfg.initial_state()
    except (ConfigError, DomainError) as exc:
        _log(f"error: {exc}")
        return EXIT_CONFIG

    kern = build_kernel(cfg.levels, cfg.kernel)
    summary = {"config": str(config_path), "q": cfg.q, "statistics": cfg.statistics.value}
    N0, E0 = moments(initial)
    t0 = time.perf_counter()
    sampled = [0]

    def progress(rec):
        sampled[0] += 1
        if sampled[0] % 50 == 0:
            _log(f"t={rec.t:.6g} S_q={rec.S_q:.12g} max|dn/dt|={rec.max_abs_dndt:.3e}")

    try:
        traj = run(initial, kern, cfg.q, cfg.integrator, progress)
    except (StepBudgetExhausted, DomainError) as exc:
        summary.update(status="failed", error=f"{type(exc).__name__}: {exc}",
                       wall_time_s=time.perf_counter() - t0)
        _write(prefix.with_suffix(".json"), json.dumps(summary, indent=2) + "\n")
        _log(f"runtime failure: {exc}")
        return EXIT_RUNTIME

    _write(prefix.with_suffix(".csv"), traj.to_csv())
    final = traj.final_state
    N1, E1 = moments(final)
    summary.update(
        status="ok",
        converged=traj.converged,
        t_final=traj.records[-1].t,
        steps=traj.steps,
        rejections=traj.rejections,
        samples=len(traj),
        wall_time_s=time.perf_counter() - t0,
        N_initial=N0,
        E_initial=E0,
        N_final=N1,
        E_final=E1,
        final_occupations=final.n.tolist(),
    )
    # the master equation relaxes to the classical distribution with the conserved (N, E)
    try:
        p = solve_params(N1, E1, cfg.levels, 1.0, cfg.statistics)
        fd = equilibrium_state(cfg.levels, p, 1.0, cfg.statistics)
        summary["classical_equilibrium"] = {
            "alpha": p.alpha,
            "beta": p.beta,
            "occupations": fd.n.tolist(),
            "max_abs_deviation": float(np.max(np.abs(final.n - fd.n))),
        }
    except (InfeasibleTargets, SolverDidNotConverge, DomainError) as exc:
        summary["classical_equilibrium"] = {"error": str(exc)}
    _write(prefix.with_suffix(".json"), json.dumps(summary, indent=2) + "\n")
    _log(f"wrote {prefix.with_suffix('.csv')} ({len(traj)} samples), converged={traj.converged}")
    return EXIT_OK


def cmd_equilibrium(config_path, out=None) -> int:
    try:
        _threads()
        cfg = load_config(config_path)
        if cfg.equilibrium is None:
            raise ConfigError(f"{config_path}: table [equilibrium] is missing")
        prefix = _prefix(cfg, config_path, out)
    except ConfigError as exc:
        _log(f"error: {exc}")
        return EXIT_CONFIG
    try:
        p = solve_params(cfg.equilibrium["n_target"], cfg.equilibrium["e_target"],
                         cfg.levels, cfg.q, cfg.statistics)
    except (InfeasibleTargets, SolverDidNotConverge) as exc:
        _log(f"equilibrium: {exc}")
        return EXIT_RUNTIME
    state = equilibrium_state(cfg.levels, p, cfg.q, cfg.statistics)
    kern = build_kernel(cfg.levels, cfg.kernel)
    try:
        res_product, res_qsum = stationarity_residuals(state, kern, cfg.q)
    except DomainError:
        # occupations sit on a cutoff boundary; residuals are undefined there
        res_product = res_qsum = None
    doc = {
        "q": cfg.q,
        "statistics": cfg.statistics.value,
        "alpha": p.alpha,
        "beta": p.beta,
        "occupations": state.n.tolist(),
        "res_product": res_product,
        "res_qsum": res_qsum,
    }
    path = prefix.with_suffix(".json")
    _write(path, json.dumps(doc, indent=2) + "\n")
    _log(f"wrote {path}")
    return EXIT_OK


def cmd_scan_phi(q_star, lo, hi, step, assert_positive=False, out="phi_scan") -> int:
    try:
        grid = PhiGrid(lo, hi, step)
    except DomainError as exc:
        _log(f"error: invalid grid: {exc}")
        return EXIT_CONFIG
    report = scan_phi_domain(q_star, grid)
    prefix = Path(out)
    _write(prefix.with_suffix(".csv"), report.negative_csv())
    _write(prefix.with_suffix(".json"), report.summary_json() + "\n")
    _log(
        f"q*={q_star}: {report.cells_negative}/{report.cells_total} negative cells, "
        f"phi_min={report.phi_min:.6g} at {report.argmin}"
    )
    if assert_positive and report.cells_negative:
        return EXIT_NEGATIVE_PHI
    return EXIT_OK


def cmd_check() -> int:
    t0 = time.perf_counter()
    ok = check.run_checks(sys.stdout)
    print(f"{'all checks passed' if ok else 'CHECK FAILED'} in {time.perf_counter() - t0:.2f}s")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _scan_args_from_config(path):
    data = tomli.loads(Path(path).read_text())
    scan = data.get("scan", data)
    return scan["q_star"], scan["min"], scan["max"], scan["step"]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="qkin",
        description="Nonextensive quantum kinetics laboratory.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate the master equation", epilog=EXIT_CODES_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config")
    p.add_argument("--out", help="output prefix (overrides [outputs].prefix)")

    p = sub.add_parser("equilibrium", help="solve for (alpha, beta) and report residuals",
                       epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config")
    p.add_argument("--out", help="output prefix (overrides [outputs].prefix)")

    p = sub.add_parser("scan-phi", help="map the sign of phi on a 4-D grid",
                       epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--qstar", type=float)
    p.add_argument("--min", type=float, dest="lo")
    p.add_argument("--max", type=float, dest="hi")
    p.add_argument("--step", type=float)
    p.add_argument("--config", help="TOML file with q_star, min, max, step")
    p.add_argument("--assert-positive", action="store_true")
    p.add_argument("--out", default="phi_scan", help="output prefix (default: phi_scan)")

    sub.add_parser("check", help="run the fast invariant suite", epilog=EXIT_CODES_HELP,
                   formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out)
    if args.command == "equilibrium":
        return cmd_equilibrium(args.config, args.out)
    if args.command == "scan-phi":
        qs, lo, hi, st = args.qstar, args.lo, args.hi, args.step
        if args.config:
            try:
                qs, lo, hi, st = _scan_args_from_config(args.config)
            except (OSError, KeyError, tomli.TOMLDecodeError) as exc:
                _log(f"error: {args.config}: {exc}")
                return EXIT_CONFIG
        if None in (qs, lo, hi, st):
            parser.error("scan-phi needs --qstar, --min, --max and --step (or --config)")
        return cmd_scan_phi(qs, lo, hi, st, args.assert_positive, args.out)
    return cmd_check()


if __name__ == "__main__":
    sys.exit(main())
