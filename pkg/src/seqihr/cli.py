"""Command-line entry point: ``seqihr <subcommand> [--config FILE] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import warnings
from importlib import metadata
from pathlib import Path

import numpy as np

from .calibration import fit, load_death_csv, model_daily_deaths, write_fit_csv
from .config import RunConfig
from .equilibria import ClosedFormMismatchWarning, disease_free_equilibrium, pandemic_equilibrium
from .errors import ConfigError, DataError, NonConvergenceError, SeqihrError
from .integrator import daily_deaths, simulate
from .model import COMPARTMENTS, STATE_LABELS, CompartmentState
from .multirisk import read_policy_csv, write_policy_csv
from .policy import (
    PolicyGrid, calibration_gap_report, chi_sweep, evaluate_policy, frontier_csv, frontier_sweep,
    optimal_policy, summary_text,
)
from .reproduction import critical_beta, reproduction_report

log = logging.getLogger("seqihr")

COMMANDS = ("simulate", "equilibrium", "reproduction", "fit", "frontier", "policy")


def _version() -> str:
    try:
        return metadata.version("seqihr")
    except metadata.PackageNotFoundError:
        return "unknown"


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class Run:
    """Output directory bookkeeping and the manifest written at the end of every run."""

    def __init__(self, command: str, cfg: RunConfig, out: Path, argv):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.argv = list(argv)
        self.inputs: dict = {}
        self.outputs: list = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def write(self, name: str, text: str) -> Path:
        path = self.path(name)
        path.write_text(text, encoding="utf-8")
        return path

    def input(self, label: str, path) -> None:
        self.inputs[label] = {"path": str(path), "sha256": _sha256(path)}

    def manifest(self, status: str = "ok") -> None:
        # the echoed config alone reproduces the run; it is also saved as a file
        config_name = "run_config.txt"
        self.cfg.save(self.out / config_name)
        outputs = {}
        for name in sorted(set(self.outputs) | {config_name}):
            path = self.out / name
            if path.exists():
                outputs[name] = _sha256(path)
        doc = {
            "tool": "seqihr",
            "version": _version(),
            "command": self.command,
            "argv": self.argv,
            "status": status,
            "config": self.cfg.to_text().splitlines(),
            "inputs": self.inputs,
            "outputs": outputs,
        }
        (self.out / "run_manifest.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# ------------------------------------------------------------- commands

def cmd_simulate(run: Run, plot: bool) -> int:
    cfg = run.cfg
    traj = simulate(cfg.params, CompartmentState.seeded(cfg.e0), cfg.integration())
    deaths = daily_deaths(traj)
    days = np.arange(len(deaths) + 1, dtype=np.float64)
    rows = np.column_stack([np.interp(days, traj.times, traj.states[:, k]) for k in range(len(STATE_LABELS))])
    with open(run.path("trajectory.csv"), "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", *STATE_LABELS, "daily_deaths"])
        for k, day in enumerate(days):
            dd = deaths[k - 1] if k > 0 else 0.0
            writer.writerow([repr(float(day))] + [repr(float(v)) for v in rows[k]] + [repr(float(dd))])
    print(f"simulated {cfg.horizon:g} days: final D={traj.final.d:.6g}, "
          f"peak daily deaths {deaths.max() * cfg.population:.1f} (x population {cfg.population:.0f})")
    if plot:
        from .plotting import plot_daily_deaths, plot_trajectory
        plot_trajectory(run.path("trajectory.svg"), traj.times, traj.states)
        data_days = data = None
        if cfg.deaths_csv:
            series = load_death_csv(cfg.deaths_csv)
            run.input("deaths_csv", cfg.deaths_csv)
            data_days = series.offset + np.arange(len(series.smoothed))
            data = series.smoothed
        plot_daily_deaths(run.path("daily_deaths.svg"), np.arange(len(deaths)),
                          deaths * cfg.population, data_days, data)
    return 0


def cmd_equilibrium(run: Run, plot: bool) -> int:
    p = run.cfg.params
    dfe = disease_free_equilibrium(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClosedFormMismatchWarning)
        pe = pandemic_equilibrium(p)
    with open(run.path("equilibrium.csv"), "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["kind", "method", "admissible", "residual", *COMPARTMENTS])
        for point in (dfe, pe.closed_form, pe.numerical):
            writer.writerow([point.kind, point.method, str(point.admissible).lower(), repr(point.residual)]
                            + [repr(float(v)) for v in point.as_array()])
    lines = [f"disease-free: residual {dfe.residual:.3e}",
             f"pandemic ({pe.numerical.method}): residual {pe.numerical.residual:.3e}",
             f"closed-form vs numerical relative gap: {pe.gap:.3e}"]
    if pe.mismatch:
        run.write("divergence_report.txt", pe.report + "\n")
        lines.append("closed form disagrees with the numerical root; see divergence_report.txt")
    text = "\n".join(lines) + "\n"
    run.write("equilibrium_summary.txt", text)
    print(text, end="")
    return 0


def cmd_reproduction(run: Run, plot: bool) -> int:
    cfg = run.cfg
    state = None
    if cfg.state:
        state = CompartmentState(*cfg.state, d=0.0)
    report = reproduction_report(cfg.params, state)
    beta_star = critical_beta(cfg.params)
    fields = {
        "R_C": report.r_c, "R_0": report.r_0, "seed_growth_rate": report.growth_rate,
        "threshold_consistent": report.threshold_consistent, "critical_beta": beta_star,
    }
    with open(run.path("reproduction.csv"), "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(list(fields))
        writer.writerow([str(v).lower() if isinstance(v, bool) else repr(float(v)) for v in fields.values()])
    for key, value in fields.items():
        print(f"{key} = {value}")
    return 0


def cmd_fit(run: Run, plot: bool) -> int:
    cfg = run.cfg
    if not cfg.deaths_csv:
        raise ConfigError("fit needs deaths_csv in the config")
    series = load_death_csv(cfg.deaths_csv)
    run.input("deaths_csv", cfg.deaths_csv)
    result = fit(cfg.params, series, cfg.segment_breaks, population=cfg.population,
                 e0_guess=cfg.e0 if cfg.e0 > 0 else 1e-6, seed=cfg.seed, dt_step=cfg.dt)
    write_fit_csv(result, run.path("fit.csv"))
    fitted = cfg.replace(params=result.params(cfg.params), e0=result.e0, horizon=float(len(series)))
    fitted.save(run.path("fitted_config.txt"))
    summary = (result.summary() + "\n"
               + f"total_deaths_data={series.raw.sum():.0f} days={len(series)} "
               + f"first_date={series.dates[0].isoformat()}\n")
    run.write("fit_summary.txt", summary)
    print(summary, end="")
    if plot:
        from .plotting import plot_daily_deaths
        model = model_daily_deaths(fitted.params, result.e0, len(series), cfg.population, cfg.dt)
        plot_daily_deaths(run.path("fit.svg"), np.arange(len(model)), model,
                          series.offset + np.arange(len(series.smoothed)), series.smoothed,
                          title="Daily deaths: model vs data")
    if not result.converged:
        raise NonConvergenceError("Nelder-Mead did not converge; best point written to fit.csv")
    return 0


def _grids(cfg: RunConfig, mr):
    return [PolicyGrid.for_model(mr, kind, cfg.level_step, cfg.interval_breaks)
            for kind in ("targeted", "uniform")]


def cmd_frontier(run: Run, plot: bool) -> int:
    cfg = run.cfg
    mr = cfg.multirisk()
    results = [frontier_sweep(mr, grid, cfg.workers) for grid in _grids(cfg, mr)]
    run.write("frontier.csv", frontier_csv(results, mr.names))
    summary = summary_text(results, cfg.gdp_budget)
    run.write("frontier_summary.txt", summary)
    gap = calibration_gap_report(results, cfg.gdp_budget)
    run.write("calibration_gap.txt", gap)
    print(summary + gap, end="")
    if plot:
        from .plotting import plot_frontier
        plot_frontier(run.path("frontier.svg"), results)
    failed = sum(len(r.failed) for r in results)
    return 3 if failed else 0


def cmd_policy(run: Run, plot: bool, policy_file: str | None = None) -> int:
    cfg = run.cfg
    mr = cfg.multirisk()
    grid = _grids(cfg, mr)[0]
    if policy_file:
        run.input("policy", policy_file)
        point = evaluate_policy(mr, read_policy_csv(policy_file, mr))
    else:
        point = optimal_policy(mr, cfg.chi, grid, cfg.workers)
    write_policy_csv(point.policy, mr, run.path("policy.csv"))
    with open(run.path("outcome.csv"), "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["policy_id", "gdp_loss", "death_rate", "social_cost"])
        writer.writerow([point.policy.encode(), repr(point.gdp_loss), repr(point.death_rate),
                         repr(point.social_cost)])
    print(f"policy L={point.policy.levels} gdp_loss={point.gdp_loss:.4%} "
          f"death_rate={point.death_rate:.4%} social_cost={point.social_cost:.6g} "
          f"converged={str(point.converged).lower()}")
    rows = [] if policy_file else chi_sweep(mr, cfg.chi_sweep, grid, cfg.workers)
    if rows:
        with open(run.path("chi_sweep.csv"), "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["chi", *(f"L_{n}" for n in mr.names), "gdp_loss", "death_rate", "social_cost",
                             "converged"])
            for chi, p in rows:
                writer.writerow([repr(chi)] + [";".join(repr(v) for v in lv) for lv in p.policy.levels]
                                + [repr(p.gdp_loss), repr(p.death_rate), repr(p.social_cost),
                                   str(p.converged).lower()])
        if plot:
            from .plotting import plot_chi_sweep
            plot_chi_sweep(run.path("chi_sweep.svg"), rows, mr.names)
    unconverged = not point.converged or any(not p.converged for _, p in rows)
    if unconverged:
        raise NonConvergenceError("policy refinement did not converge; grid optimum written")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value run configuration file")
    common.add_argument("--out", help="output directory (default: out_dir from the config)")
    common.add_argument("--plot", action="store_true", help="also render SVG figures")
    common.add_argument("--workers", type=int, help="worker processes for policy sweeps")
    common.add_argument("--seed", type=int, help="random seed for fit restarts")
    common.add_argument("--strict-r-equation", dest="strict_r", action="store_true",
                        help="drop the r_Q*Q inflow into R")
    common.add_argument("--strict-discount", dest="strict_discount",
                        action="store_true", help="discount with exp(+r t) instead of exp(-r t)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="seqihr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate the single-group model")
    sub.add_parser("equilibrium", parents=[common], help="disease-free and pandemic equilibria")
    sub.add_parser("reproduction", parents=[common], help="reproduction numbers and threshold check")
    sub.add_parser("fit", parents=[common], help="fit beta segments and E(0) to daily deaths")
    sub.add_parser("frontier", parents=[common], help="uniform and targeted Pareto frontiers")
    pol = sub.add_parser("policy", parents=[common], help="cost-minimizing policy and chi sweep")
    pol.add_argument("--policy", dest="policy_file", help="evaluate a group,start_day,level CSV instead")
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    changes = {}
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        changes["workers"] = args.workers
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.strict_discount:
        changes["strict_discount"] = True
    if args.strict_r:
        changes["params"] = cfg.params.replace(strict_r=True)
    return cfg.replace(**changes) if changes else cfg


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    run = None
    try:
        cfg = load_config(args)
        run = Run(args.command, cfg, Path(args.out or cfg.out_dir), argv)
        if args.config:
            run.input("config", args.config)
        handler = globals()[f"cmd_{args.command}"]
        extra = {"policy_file": args.policy_file} if args.command == "policy" else {}
        code = handler(run, args.plot, **extra)
        run.manifest("ok" if code == 0 else f"exit {code}")
        return code
    except SeqihrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if run is not None:
            run.manifest(f"{type(exc).__name__}: {exc}")
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
