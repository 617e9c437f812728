"""Lockdown policy grids, Pareto frontiers and cost-minimizing policies."""

from __future__ import annotations

import csv
import io
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import NumericError
from .multirisk import (
    LockdownPolicy, MRParams, outcome_from_summary, prepare, sweep_summaries,
)

log = logging.getLogger(__name__)

DEFAULT_STEP = 0.05
DEFAULT_BUDGET = 0.035
CHI_SWEEP = (1.0, 5.0, 10.0, 20.0, 50.0, 100.0)


def level_grid(upper: float, step: float = DEFAULT_STEP) -> tuple:
    """0, step, 2*step, ... up to ``upper`` (rounded so nested grids share exact values)."""
    count = int(np.floor(upper / step + 1e-9))
    return tuple(round(k * step, 10) for k in range(count + 1))


@dataclass(frozen=True)
class PolicyGrid:
    kind: str
    levels: tuple  # per-group level tuples; uniform grids use levels[0] for every group
    interval_breaks: tuple = ()

    @property
    def starts(self) -> tuple:
        return (0.0,) + tuple(float(b) for b in self.interval_breaks)

    @property
    def intervals(self) -> int:
        return len(self.starts)

    @classmethod
    def for_model(cls, mr: MRParams, kind: str, step: float = DEFAULT_STEP,
                  interval_breaks=()) -> "PolicyGrid":
        if kind == "uniform":
            levels = (level_grid(mr.uniform_lbar, step),) * len(mr.groups)
        else:
            levels = tuple(level_grid(g.lbar, step) for g in mr.groups)
        return cls(kind, levels, tuple(interval_breaks))

    def policies(self) -> list:
        k = self.intervals
        ngroups = len(self.levels)
        if self.kind == "uniform":
            schedules = itertools.product(self.levels[0], repeat=k)
            return [LockdownPolicy((tuple(s),) * ngroups, self.starts, "uniform") for s in schedules]
        per_group = [list(itertools.product(lv, repeat=k)) for lv in self.levels]
        return [LockdownPolicy(tuple(tuple(s) for s in combo), self.starts, "targeted")
                for combo in itertools.product(*per_group)]

    def __len__(self) -> int:
        if self.kind == "uniform":
            return len(self.levels[0]) ** self.intervals
        return int(np.prod([len(lv) ** self.intervals for lv in self.levels]))


@dataclass
class FrontierPoint:
    policy: LockdownPolicy
    gdp_loss: float
    death_rate: float
    social_cost: float
    dominated: bool = False
    converged: bool = True

    @property
    def kind(self) -> str:
        return self.policy.kind


def evaluate_policy(mr: MRParams, policy: LockdownPolicy, chi: float | None = None,
                    prep=None) -> FrontierPoint:
    policy.check(mr)
    row = sweep_summaries(mr, policy.as_array()[None], policy.starts, prep)[0]
    gdp, death, cost = outcome_from_summary(mr, row, chi)
    return FrontierPoint(policy, gdp, death, cost)


def pareto_front(points) -> list:
    """Points not dominated in (gdp_loss, death_rate), sorted by gdp_loss.

    A point is dropped when another is no worse in both coordinates and
    strictly better in one; among exact ties the smallest policy encoding
    survives.
    """
    ordered = sorted(points, key=lambda p: (p.gdp_loss, p.death_rate, p.policy.encode()))
    front = []
    best_death = float("inf")
    for point in ordered:
        if point.death_rate < best_death:
            front.append(point)
            best_death = point.death_rate
    keep = {id(p) for p in front}
    for point in points:
        point.dominated = id(point) not in keep
    return front


def death_rate_at_budget(front, budget: float) -> float | None:
    """Lowest frontier death rate among points with gdp_loss <= budget."""
    feasible = [p.death_rate for p in front if p.gdp_loss <= budget]
    return min(feasible) if feasible else None


def _evaluate_chunk(args):
    mr, levels, starts = args
    return sweep_summaries(mr, levels, starts)


def _summaries(mr: MRParams, levels: np.ndarray, starts, workers: int = 1, chunk: int = 512,
               prep=None) -> np.ndarray:
    """Sweep summary rows in input order; contiguous chunks go to a process pool."""
    slices = [levels[i:i + chunk] for i in range(0, len(levels), chunk)]
    if workers > 1 and len(slices) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_chunk, [(mr, s, starts) for s in slices]))
    else:
        prep = prep or prepare(mr)
        rows = [sweep_summaries(mr, s, starts, prep) for s in slices]
    return np.concatenate(rows)


def evaluate_grid(mr: MRParams, policies, workers: int = 1, chunk: int = 512) -> tuple[list, list]:
    """Evaluate policies in order; chunks run on a process pool when ``workers`` > 1.

    Returns the evaluated points and a list of ``(policy, message)`` failures.
    """
    if not policies:
        return [], []
    starts = policies[0].starts
    for p in policies:
        p.check(mr)
        if p.starts != starts:
            raise ValueError("all policies in one sweep must share interval starts")
    levels = np.stack([p.as_array() for p in policies])
    summary = _summaries(mr, levels, starts, workers, chunk)
    points = []
    failed = []
    for policy, row in zip(policies, summary):
        try:
            gdp, death, cost = outcome_from_summary(mr, row)
        except NumericError as exc:
            failed.append((policy, str(exc)))
            continue
        points.append(FrontierPoint(policy, gdp, death, cost))
    if failed:
        log.warning("%d policies failed to evaluate", len(failed))
    return points, failed


@dataclass
class SweepResult:
    kind: str
    points: list
    frontier: list
    failed: list = field(default_factory=list)

    @property
    def gdp_max(self) -> FrontierPoint:
        """The frontier point with the smallest GDP loss."""
        return self.frontier[0]

    def death_rate_at(self, budget: float = DEFAULT_BUDGET) -> float | None:
        return death_rate_at_budget(self.frontier, budget)


def frontier_sweep(mr: MRParams, grid: PolicyGrid, workers: int = 1) -> SweepResult:
    points, failed = evaluate_grid(mr, grid.policies(), workers)
    front = pareto_front(points)
    return SweepResult(grid.kind, points, front, failed)


def optimal_policy(mr: MRParams, chi: float | None = None, grid: PolicyGrid | None = None,
                   workers: int = 1, max_evals: int = 400) -> FrontierPoint:
    """Minimize social cost on the targeted grid, then refine with Nelder-Mead."""
    grid = grid or PolicyGrid.for_model(mr, "targeted")
    policies = grid.policies()
    prep = prepare(mr)
    starts = policies[0].starts
    levels = np.stack([p.as_array() for p in policies])
    summary = _summaries(mr, levels, starts, workers, prep=prep)
    costs = np.array([outcome_from_summary(mr, row, chi)[2] if row[3] == 0 else np.inf
                      for row in summary])
    best = int(np.argmin(costs))
    grid_point = evaluate_policy(mr, policies[best], chi, prep)

    ngroups, nint = levels.shape[1], levels.shape[2]
    upper = np.repeat([g.lbar for g in mr.groups], nint)
    bounds = [(0.0, u) for u in upper]

    def objective(x):
        policy = LockdownPolicy(tuple(tuple(row) for row in np.clip(x, 0.0, upper).reshape(ngroups, nint)),
                                starts, "targeted")
        try:
            return evaluate_policy(mr, policy, chi, prep).social_cost
        except NumericError:
            return np.inf

    x0 = levels[best].ravel()
    step = np.full(x0.size, grid_step(grid))
    simplex = [x0]
    for j in range(x0.size):
        vertex = x0.copy()
        vertex[j] = vertex[j] + step[j] if vertex[j] + step[j] <= upper[j] else vertex[j] - step[j]
        simplex.append(vertex)
    res = minimize(objective, x0, method="Nelder-Mead", bounds=bounds,
                   options={"initial_simplex": np.array(simplex), "xatol": 1e-6, "fatol": 1e-10,
                            "maxfev": max_evals})
    if not res.success or res.fun > grid_point.social_cost:
        grid_point.converged = bool(res.success)
        return grid_point
    x = np.clip(res.x, 0.0, upper).reshape(ngroups, nint)
    policy = LockdownPolicy(tuple(tuple(row) for row in x), starts, "targeted")
    return evaluate_policy(mr, policy, chi, prep)


def grid_step(grid: PolicyGrid) -> float:
    for lv in grid.levels:
        if len(lv) > 1:
            return lv[1] - lv[0]
    return DEFAULT_STEP


def chi_sweep(mr: MRParams, chis=CHI_SWEEP, grid: PolicyGrid | None = None, workers: int = 1) -> list:
    return [(chi, optimal_policy(mr, chi, grid, workers)) for chi in chis]


# ------------------------------------------------------------------ output

FRONTIER_HEADER = ("kind", "L_y", "L_m", "L_o", "gdp_loss", "death_rate", "social_cost", "on_frontier")


def _level_cell(row) -> str:
    return ";".join(repr(v) for v in row)


def frontier_csv(results, names=("y", "m", "o")) -> str:
    """Canonical CSV text of every evaluated point, sorted by kind then policy encoding."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["kind"] + [f"L_{n}" for n in names] + ["gdp_loss", "death_rate", "social_cost", "on_frontier"]
    writer.writerow(header)
    for result in sorted(results, key=lambda r: r.kind):
        for point in sorted(result.points, key=lambda p: p.policy.encode()):
            writer.writerow([result.kind] + [_level_cell(row) for row in point.policy.levels]
                            + [repr(point.gdp_loss), repr(point.death_rate), repr(point.social_cost),
                               "1" if not point.dominated else "0"])
    return buf.getvalue()


def summary_text(results, budget: float = DEFAULT_BUDGET) -> str:
    lines = []
    for result in sorted(results, key=lambda r: r.kind):
        g = result.gdp_max
        levels = ", ".join(_level_cell(row) for row in g.policy.levels)
        lines.append(f"[{result.kind}] {len(result.points)} policies, {len(result.frontier)} on frontier")
        lines.append(f"  GDP-max frontier point: L=({levels}) gdp_loss={g.gdp_loss:.4%} "
                     f"death_rate={g.death_rate:.4%}")
        at = result.death_rate_at(budget)
        lines.append(f"  death rate at gdp_loss <= {budget:.2%}: "
                     + ("no frontier point within budget" if at is None else f"{at:.4%}"))
        if result.failed:
            lines.append(f"  failed policies: {len(result.failed)}")
            for policy, msg in result.failed:
                lines.append(f"    {policy.encode()}: {msg}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------ reference magnitudes

# (kind, quantity, reference value, absolute tolerance)
REFERENCE_OUTCOMES = (
    ("uniform", "gdp_loss", 0.02, 0.015),
    ("uniform", "death_rate", 0.0018, 0.0012),
    ("targeted", "gdp_loss", 0.01, 0.01),
    ("targeted", "death_rate", 0.0009, 0.0006),
)
BUDGET_DEATH_CEILING = 0.0008
BUDGET_DEATH_REFERENCE = 0.0003


@dataclass(frozen=True)
class MagnitudeCheck:
    name: str
    measured: float | None
    reference: float
    tolerance: float
    ok: bool

    @property
    def miss(self) -> float | None:
        """Distance outside the tolerance band, 0 when inside."""
        if self.measured is None:
            return None
        return max(0.0, abs(self.measured - self.reference) - self.tolerance)


def magnitude_checks(results, budget: float = DEFAULT_BUDGET) -> list:
    by_kind = {r.kind: r for r in results}
    checks = []
    for kind, quantity, ref, tol in REFERENCE_OUTCOMES:
        if kind not in by_kind:
            continue
        value = getattr(by_kind[kind].gdp_max, quantity)
        checks.append(MagnitudeCheck(f"{kind} GDP-max {quantity}", value, ref, tol,
                                     abs(value - ref) <= tol))
    if "targeted" in by_kind:
        at = by_kind["targeted"].death_rate_at(budget)
        # one-sided: passes at or below the ceiling
        checks.append(MagnitudeCheck(
            f"targeted death_rate at gdp_loss <= {budget:.2%}", at, BUDGET_DEATH_REFERENCE,
            BUDGET_DEATH_CEILING - BUDGET_DEATH_REFERENCE,
            at is not None and at <= BUDGET_DEATH_CEILING))
    return checks


def calibration_gap_report(results, budget: float = DEFAULT_BUDGET) -> str:
    checks = magnitude_checks(results, budget)
    lines = ["frontier magnitudes against reference outcomes (absolute tolerances)"]
    for c in checks:
        measured = "none within budget" if c.measured is None else f"{c.measured:.4%}"
        miss = "" if c.miss is None else f" miss={c.miss:.4%}"
        lines.append(f"  {'ok  ' if c.ok else 'GAP '} {c.name}: measured={measured} "
                     f"reference={c.reference:.4%} tol={c.tolerance:.4%}{miss}")
    lines.append("all within tolerance" if all(c.ok for c in checks)
                 else f"{sum(not c.ok for c in checks)} of {len(checks)} outside tolerance")
    return "\n".join(lines) + "\n"
