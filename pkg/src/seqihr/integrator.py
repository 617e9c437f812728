"""Fixed-step classical RK4 integration on a uniform day grid."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .errors import ConfigError, NonFiniteStateError, StepSizeError
from .model import NSTATE, STATE_LABELS, CompartmentState, ModelParams, _beta_at, _rhs_kernel

NEGATIVE_TOL = 1e-12

_OK, _NEGATIVE, _NONFINITE = 0, 1, 2


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float = 0.25
    horizon: float = 365.0
    clamp_negatives: bool = True

    def __post_init__(self):
        if not (0.0 < self.dt <= 1.0):
            raise ConfigError(f"dt must lie in (0, 1], got {self.dt}")
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")

    @property
    def nsteps(self) -> int:
        # a final partial step is padded to a whole one
        return int(math.ceil(self.horizon / self.dt - 1e-9))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), ncols)
    labels: tuple = STATE_LABELS
    horizon: float | None = None

    def column(self, label: str) -> np.ndarray:
        return self.states[:, self.labels.index(label)]

    def state_at(self, k: int) -> CompartmentState:
        return CompartmentState.from_array(self.states[k], t=self.times[k])

    @property
    def final(self) -> CompartmentState:
        return self.state_at(-1)

    @property
    def population(self) -> np.ndarray:
        return self.states[:, :6].sum(axis=1)

    @property
    def daily_deaths(self) -> np.ndarray:
        return daily_deaths(self)


def _check_step(y: np.ndarray, clamp: bool, t: float) -> None:
    if not np.all(np.isfinite(y)):
        raise NonFiniteStateError(f"non-finite state at t={t:g}; parameters blow up")
    low = y < 0.0
    if low.any():
        if np.any(y < -NEGATIVE_TOL):
            raise StepSizeError(
                f"compartment fell to {y.min():.3e} at t={t:g}; use a smaller dt")
        if clamp:
            y[low] = 0.0


def integrate(rhs_fn: Callable, initial, params, config: IntegrationConfig = IntegrationConfig(),
              t0: float = 0.0) -> Trajectory:
    """Integrate ``y' = rhs_fn(params, t, y)`` with classical RK4.

    ``initial`` is either a :class:`CompartmentState` or a plain vector.
    Every state after the first is checked: entries in (-1e-12, 0) are
    clamped to 0 when ``config.clamp_negatives`` is set, anything lower
    raises :class:`StepSizeError`.
    """
    if isinstance(initial, CompartmentState):
        t0 = initial.t
        y = initial.as_array()
    else:
        y = np.array(initial, dtype=np.float64, ndmin=1)
    dt = config.dt
    nsteps = config.nsteps
    times = t0 + dt * np.arange(nsteps + 1)
    states = np.empty((nsteps + 1, y.size))
    states[0] = y
    for k in range(nsteps):
        t = times[k]
        k1 = rhs_fn(params, t, y)
        k2 = rhs_fn(params, t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs_fn(params, t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs_fn(params, t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_step(y, config.clamp_negatives, times[k + 1])
        states[k + 1] = y
    labels = STATE_LABELS if y.size == NSTATE else tuple(f"y{j}" for j in range(y.size))
    return Trajectory(times, states, labels, horizon=config.horizon)


@njit(cache=True)
def _rk4_seqihr(y0, p, starts, values, t0, dt, nsteps, strict_r, clamp):
    out = np.empty((nsteps + 1, 7))
    out[0] = y0
    y = y0.copy()
    k1 = np.empty(7)
    k2 = np.empty(7)
    k3 = np.empty(7)
    k4 = np.empty(7)
    tmp = np.empty(7)
    for k in range(nsteps):
        t = t0 + dt * k
        _rhs_kernel(y, p, _beta_at(starts, values, t), strict_r, k1)
        bmid = _beta_at(starts, values, t + 0.5 * dt)
        for j in range(7):
            tmp[j] = y[j] + 0.5 * dt * k1[j]
        _rhs_kernel(tmp, p, bmid, strict_r, k2)
        for j in range(7):
            tmp[j] = y[j] + 0.5 * dt * k2[j]
        _rhs_kernel(tmp, p, bmid, strict_r, k3)
        for j in range(7):
            tmp[j] = y[j] + dt * k3[j]
        _rhs_kernel(tmp, p, _beta_at(starts, values, t + dt), strict_r, k4)
        for j in range(7):
            y[j] = y[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for j in range(7):
            v = y[j]
            if not np.isfinite(v):
                return out, _NONFINITE, k + 1
            if v < 0.0:
                if v < -NEGATIVE_TOL:
                    return out, _NEGATIVE, k + 1
                if clamp:
                    y[j] = 0.0
        out[k + 1] = y
    return out, _OK, nsteps


def simulate(params: ModelParams, initial: CompartmentState,
             config: IntegrationConfig = IntegrationConfig()) -> Trajectory:
    """Compiled equivalent of ``integrate(rhs_array, initial, params, config)``."""
    if initial.n <= 0:
        from .errors import DegenerateInputError
        raise DegenerateInputError("initial population is zero")
    starts, values = params.beta_arrays()
    states, status, step = _rk4_seqihr(
        initial.as_array(), params.rate_vector(), starts, values, float(initial.t),
        config.dt, config.nsteps, params.strict_r, config.clamp_negatives)
    t_fail = initial.t + config.dt * step
    if status == _NONFINITE:
        raise NonFiniteStateError(f"non-finite state at t={t_fail:g}; parameters blow up")
    if status == _NEGATIVE:
        raise StepSizeError(f"compartment went negative at t={t_fail:g}; use a smaller dt")
    times = initial.t + config.dt * np.arange(config.nsteps + 1)
    return Trajectory(times, states, STATE_LABELS, horizon=config.horizon)


def daily_deaths(trajectory: Trajectory, column: str = "D") -> np.ndarray:
    """Calendar-day increments of the cumulative death accumulator.

    Entry ``k`` is ``D(day k+1) - D(day k)`` counted from the first grid
    time; the series has ``floor(horizon)`` entries.
    """
    t = trajectory.times
    d = trajectory.column(column)
    span = trajectory.horizon if trajectory.horizon is not None else t[-1] - t[0]
    ndays = int(math.floor(span + 1e-9))
    if ndays < 1:
        raise ValueError("trajectory must cover at least one full day")
    days = t[0] + np.arange(ndays + 1, dtype=np.float64)
    at_days = np.interp(days, t, d)
    return np.maximum(np.diff(at_days), 0.0)
