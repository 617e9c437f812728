"""Baseline rates, daily-death ingestion and least-squares fitting of beta(t)."""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, DataError, NumericError
from .integrator import IntegrationConfig, daily_deaths, simulate
from .model import ModelParams, CompartmentState, format_beta, parse_beta

log = logging.getLogger(__name__)

WINDOW = 7
US_POPULATION_2020 = 331_449_281.0
E0_BOUNDS = (1e-9, 1e-3)
MAX_EVALS = 2000
SIMPLEX_TOL = 1e-8
N_RESTARTS = 5


def _parse_number(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def read_params_file(path, base: ModelParams | None = None) -> ModelParams:
    """Read a flat ``key = value`` parameter file over ``base``."""
    text = Path(path).read_text(encoding="utf-8")
    return params_from_text(text, base, source=str(path))


def params_from_text(text: str, base: ModelParams | None = None, source: str = "<text>") -> ModelParams:
    valid = {f.name for f in ModelParams.__dataclass_fields__.values()}
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in valid:
            raise ConfigError(f"{source}:{lineno}: unknown parameter {key!r}")
        try:
            if key == "beta":
                changes[key] = parse_beta(value)
            elif key == "strict_r":
                changes[key] = value.lower() in ("1", "true", "yes")
            else:
                changes[key] = _parse_number(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    if base is None:
        return ModelParams(**changes)
    return base.replace(**changes)


def params_to_text(params: ModelParams) -> str:
    lines = []
    for name in ModelParams.__dataclass_fields__:
        value = getattr(params, name)
        if name == "beta":
            lines.append(f"beta = {format_beta(value)}")
        elif name == "strict_r":
            lines.append(f"strict_r = {str(value).lower()}")
        else:
            lines.append(f"{name} = {value!r}")
    return "\n".join(lines) + "\n"


def default_params() -> ModelParams:
    """Baseline rates shipped in ``data/defaults.txt``."""
    text = resources.files("seqihr").joinpath("data/defaults.txt").read_text(encoding="utf-8")
    return params_from_text(text, source="defaults.txt")


def moving_average(values, window: int = WINDOW) -> np.ndarray:
    """Centered moving average over full windows only (length n - window + 1)."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) < window:
        return np.empty(0)
    return np.convolve(values, np.ones(window) / window, mode="valid")


@dataclass
class DeathSeries:
    dates: list
    raw: np.ndarray
    smoothed: np.ndarray = field(init=False)
    gaps: tuple = ()

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)
        if np.any(self.raw < 0):
            raise DataError("daily deaths must be nonnegative")
        self.smoothed = moving_average(self.raw)

    @classmethod
    def from_values(cls, values, start: dt.date = dt.date(2020, 1, 1)) -> "DeathSeries":
        dates = [start + dt.timedelta(days=k) for k in range(len(values))]
        return cls(dates, np.asarray(values, dtype=np.float64))

    @property
    def offset(self) -> int:
        """Index into ``raw`` of the first smoothed entry (window center)."""
        return WINDOW // 2

    def __len__(self) -> int:
        return len(self.raw)


def load_death_csv(path) -> DeathSeries:
    """Read a ``date,deaths`` CSV, sort by date and fill missing days with 0."""
    path = Path(path)
    try:
        handle = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read death series {path}: {exc.strerror}") from None
    rows = {}
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        if [h.strip().lower() for h in header] != ["date", "deaths"]:
            raise DataError(f"{path}:1: expected header 'date,deaths', got {','.join(header)!r}")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad ISO date {row[0]!r}") from None
            try:
                count = int(row[1].strip())
            except ValueError:
                raise DataError(f"{path}:{lineno}: deaths {row[1]!r} is not an integer") from None
            if count < 0:
                raise DataError(f"{path}:{lineno}: negative deaths {count} on {day}")
            if day in rows:
                raise DataError(f"{path}:{lineno}: duplicate date {day.isoformat()}")
            rows[day] = count
    if not rows:
        raise DataError(f"{path}: no data rows")
    first, last = min(rows), max(rows)
    ndays = (last - first).days + 1
    dates = [first + dt.timedelta(days=k) for k in range(ndays)]
    gaps = tuple(d for d in dates if d not in rows)
    if gaps:
        log.warning("%s: %d missing days filled with 0", path, len(gaps))
    return DeathSeries(dates, np.array([rows.get(d, 0) for d in dates], dtype=np.float64), gaps=gaps)


@dataclass
class FitResult:
    beta_segments: tuple
    e0: float
    rmse: float
    total_deaths_model: float
    iterations: int
    converged: bool
    population: float = US_POPULATION_2020
    restart_rmse: list = field(default_factory=list)

    def params(self, base: ModelParams) -> ModelParams:
        return base.replace(beta=self.beta_segments)

    def summary(self) -> str:
        return (f"rmse={self.rmse:.6g} e0={self.e0:.6g} "
                f"total_deaths_model={self.total_deaths_model:.1f} "
                f"iterations={self.iterations} converged={str(self.converged).lower()}")


def model_daily_deaths(params: ModelParams, e0: float, horizon: int, population: float,
                       dt_step: float = 0.25) -> np.ndarray:
    """Absolute daily deaths of a run seeded with ``e0`` exposed (normalized)."""
    traj = simulate(params, CompartmentState.seeded(e0), IntegrationConfig(dt=dt_step, horizon=horizon))
    return daily_deaths(traj) * population


def fit_rmse(params: ModelParams, e0: float, series: DeathSeries, population: float,
             dt_step: float = 0.25) -> float:
    model = model_daily_deaths(params, e0, len(series), population, dt_step)
    lo = series.offset
    resid = model[lo:lo + len(series.smoothed)] - series.smoothed
    return float(np.sqrt(np.mean(resid ** 2)))


def fit(params_base: ModelParams, series: DeathSeries, segment_breaks, *,
        population: float = US_POPULATION_2020, e0_guess: float = 1e-6,
        beta_guess=None, seed: int = 0, restarts: int = N_RESTARTS,
        max_evals: int = MAX_EVALS, dt_step: float = 0.25,
        e0_bounds: tuple = E0_BOUNDS) -> FitResult:
    """Fit one beta per segment plus the initial exposed mass by Nelder-Mead.

    ``segment_breaks`` are the start days of every segment after the first.
    The search runs in log coordinates; each restart begins from the best
    point so far with a jittered initial simplex.
    """
    lo_e0, hi_e0 = e0_bounds
    if not (0 < lo_e0 < hi_e0) or not (lo_e0 <= e0_guess <= hi_e0):
        raise ConfigError(f"infeasible E(0) bounds {e0_bounds} for guess {e0_guess}")
    if len(series.smoothed) == 0:
        raise DataError("death series is shorter than the smoothing window")
    starts = [0.0] + [float(b) for b in segment_breaks]
    if any(b <= a for a, b in zip(starts, starts[1:])) or starts[-1] >= len(series):
        raise ConfigError(f"segment breaks {list(segment_breaks)} must increase inside the series")
    nseg = len(starts)
    if beta_guess is None:
        beta_guess = [params_base.beta[0][1]] * nseg
    beta_guess = np.broadcast_to(np.asarray(beta_guess, dtype=np.float64), (nseg,))

    bounds = [(np.log(1e-4), np.log(5.0))] * nseg + [(np.log10(lo_e0), np.log10(hi_e0))]

    def unpack(x):
        segs = tuple(zip(starts, np.exp(x[:nseg]).tolist()))
        return params_base.replace(beta=segs), 10.0 ** x[nseg]

    def objective(x):
        params, e0 = unpack(x)
        try:
            return fit_rmse(params, e0, series, population, dt_step)
        except NumericError:
            return 1e300

    rng = np.random.default_rng(seed)
    best_x = np.concatenate([np.log(beta_guess), [np.log10(e0_guess)]])
    best_f = objective(best_x)
    evaluations = 1
    converged = False
    restart_rmse = []
    for k in range(restarts):
        start = best_x
        scale = np.concatenate([np.full(nseg, 0.1), [0.5]])
        simplex = [start]
        for j in range(len(start)):
            vertex = start.copy()
            vertex[j] += scale[j] * (1.0 + (rng.uniform(-0.5, 0.5) if k else 0.0))
            simplex.append(vertex)
        simplex = np.clip(np.array(simplex), [b[0] for b in bounds], [b[1] for b in bounds])
        res = minimize(objective, start, method="Nelder-Mead", bounds=bounds,
                       options={"initial_simplex": simplex, "xatol": SIMPLEX_TOL,
                                "fatol": np.inf, "maxfev": max_evals})
        evaluations += res.nfev
        if res.fun < best_f:
            best_f, best_x = float(res.fun), res.x
        converged = converged or bool(res.success)
        restart_rmse.append(best_f)
        log.debug("restart %d: rmse=%.6g nfev=%d success=%s", k, res.fun, res.nfev, res.success)
    params, e0 = unpack(best_x)
    model = model_daily_deaths(params, e0, len(series), population, dt_step)
    return FitResult(
        beta_segments=params.beta,
        e0=float(e0),
        rmse=fit_rmse(params, e0, series, population, dt_step),
        total_deaths_model=float(model.sum()),
        iterations=evaluations,
        converged=converged,
        population=population,
        restart_rmse=restart_rmse,
    )


def write_fit_csv(result: FitResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["segment_start", "beta"])
        for start, beta in result.beta_segments:
            writer.writerow([repr(start), repr(beta)])
