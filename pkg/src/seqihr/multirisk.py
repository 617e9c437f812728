"""Age-stratified SEQIHR dynamics, employment and the planner's cost.

Groups share every epidemiological rate except the COVID death rates, which
are scaled per group so the model's infection fatality ratio matches the
group target. Mixing is proportional across groups; a lockdown level L_i
attenuates both the contacts a group makes and the contacts it receives by
``1 - theta * L_i``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.optimize import newton

from .errors import ConfigError, DataError, NonFiniteStateError, StepSizeError
from .integrator import NEGATIVE_TOL
from .model import (
    P_D_H, P_D_I, P_EPS_E, P_EPS_H, P_EPS_Q, P_GAMMA_E, P_GAMMA_I, P_MU, P_NU, P_R_H, P_R_I,
    P_R_Q, P_S_R, P_SIGMA_E, P_SIGMA_Q, ModelParams, OutflowCoefficients, _beta_at,
)

DAILY_RATE = 0.01 / 365.0
WORK_LIFE = 15 * 365.0
SHARE_TOL = 1e-2
NCOL = 7
# columns of the per-policy summary produced by the sweep kernel
OUT_GDP, OUT_DEATHS, OUT_OUTPUT_COST, OUT_STATUS, OUT_DEATH_FLOW = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class MRGroupParams:
    name: str
    n: float
    w: float
    lbar: float
    ifr: float
    kappa: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.n <= 0:
            raise ConfigError(f"group {self.name}: population share must be positive")
        if not 0.0 <= self.lbar <= 1.0:
            raise ConfigError(f"group {self.name}: lbar must lie in [0, 1]")
        if not 0.0 <= self.kappa <= 1.0:
            raise ConfigError(f"group {self.name}: kappa must lie in [0, 1]")
        if self.w < 0 or self.ifr < 0 or self.delta < 0:
            raise ConfigError(f"group {self.name}: w, ifr and delta must be nonnegative")

    def chi_hat(self, r: float, chi_abs: float) -> float:
        """Total cost of a death: lost output w/r plus the non-monetary part."""
        chi_i = chi_abs - (self.w / r) * math.exp(-r * self.delta)
        return self.w / r + chi_i


def baseline_groups() -> tuple[MRGroupParams, ...]:
    return (
        MRGroupParams("y", n=0.542, w=1.0, lbar=0.7, ifr=0.000315, delta=WORK_LIFE),
        MRGroupParams("m", n=0.246, w=1.0, lbar=0.7, ifr=0.00132, delta=WORK_LIFE),
        MRGroupParams("o", n=0.211, w=0.0, lbar=1.0, ifr=0.0030, delta=0.0),
    )


def infection_fatality_ratio(params: ModelParams, scale: float = 1.0) -> float:
    """Probability that an exposed individual eventually dies of COVID.

    Absorption probability of the E -> {I, Q} -> H -> death chain with the
    COVID death rates multiplied by ``scale``.
    """
    p = params
    d_i, d_h = scale * p.d_i, scale * p.d_h
    m_e = p.gamma_e + p.sigma_e + p.mu
    m_i = p.gamma_i + d_i + p.r_i + p.mu
    m_q = p.r_q + p.sigma_q + p.mu
    m_h = d_h + p.r_h + p.mu
    die_h = d_h / m_h
    from_i = (d_i + p.gamma_i * die_h) / m_i
    from_q = p.sigma_q * die_h / m_q
    return (p.sigma_e * from_i + p.gamma_e * from_q) / m_e


def fatality_scale(params: ModelParams, target: float) -> float:
    """Common factor on (d_I, d_H) giving infection fatality ``target`` (secant solve)."""
    if target == 0:
        return 0.0
    base = infection_fatality_ratio(params)
    if base <= 0:
        raise ConfigError("baseline parameters have zero COVID fatality; cannot scale")
    x0 = target / base
    return float(newton(lambda f: infection_fatality_ratio(params, f) - target,
                        x0, x1=1.01 * x0, tol=1e-14, maxiter=100))


@dataclass(frozen=True)
class MRParams:
    base: ModelParams
    groups: tuple = field(default_factory=baseline_groups)
    theta: float = 1.0
    r: float = DAILY_RATE
    chi: float = 20.0
    w_rep: float = 1.0
    uniform_lbar: float = 0.7
    e0: float = 1e-6
    horizon: float = 365.0
    dt: float = 0.25
    strict_discount: bool = False
    normalize_shares: bool = False

    def __post_init__(self):
        groups = tuple(self.groups)
        total = sum(g.n for g in groups)
        if self.normalize_shares:
            groups = tuple(replace(g, n=g.n / total) for g in groups)
        elif abs(total - 1.0) > SHARE_TOL:
            raise ConfigError(f"group shares sum to {total}, not 1 within {SHARE_TOL}")
        object.__setattr__(self, "groups", groups)
        if len({g.name for g in groups}) != len(groups):
            raise ConfigError("group names must be unique")
        if not self.r > 0:
            raise ConfigError("interest rate r must be positive")
        if self.chi < 0:
            raise ConfigError("chi must be nonnegative")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError("theta must lie in [0, 1]")
        if not 0 <= self.uniform_lbar <= min(g.lbar for g in groups) + 1e-12:
            # uniform policies must stay inside every group's box so they nest in the targeted grid
            raise ConfigError("uniform_lbar must not exceed any group's lbar")

    @property
    def names(self) -> tuple:
        return tuple(g.name for g in self.groups)

    @property
    def shares(self) -> np.ndarray:
        return np.array([g.n for g in self.groups])

    @property
    def nsteps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-9))

    @property
    def chi_abs(self) -> float:
        """chi annual contributions of a representative worker, in daily output units."""
        return self.chi * 365.0 * self.w_rep

    def chi_hats(self, chi: float | None = None) -> np.ndarray:
        chi_abs = self.chi_abs if chi is None else chi * 365.0 * self.w_rep
        return np.array([g.chi_hat(self.r, chi_abs) for g in self.groups])

    def death_scales(self) -> np.ndarray:
        return np.array([fatality_scale(self.base, g.ifr) for g in self.groups])

    def group_death_rates(self) -> tuple[np.ndarray, np.ndarray]:
        scales = self.death_scales()
        return scales * self.base.d_i, scales * self.base.d_h

    def initial_state(self) -> np.ndarray:
        y0 = np.zeros((len(self.groups), NCOL))
        shares = self.shares
        y0[:, 1] = self.e0 * shares
        y0[:, 0] = shares - y0[:, 1]
        return y0


@dataclass(frozen=True)
class LockdownPolicy:
    """Piecewise-constant lockdown levels; ``levels[i][k]`` applies to group i from ``starts[k]``."""

    levels: tuple
    starts: tuple = (0.0,)
    kind: str = "targeted"

    def __post_init__(self):
        levels = tuple(tuple(float(v) for v in row) for row in self.levels)
        starts = tuple(float(s) for s in self.starts)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "starts", starts)
        if self.kind not in ("uniform", "targeted"):
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        if not starts or starts[0] != 0.0 or any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("policy interval starts must begin at 0 and increase")
        if any(len(row) != len(starts) for row in levels):
            raise ConfigError("every group needs one level per interval")
        if any(not 0.0 <= v <= 1.0 for row in levels for v in row):
            raise ConfigError("lockdown levels must lie in [0, 1]")
        if self.kind == "uniform" and len(set(levels)) > 1:
            raise ConfigError("a uniform policy shares one schedule across groups")

    @classmethod
    def constant(cls, levels, kind: str = "targeted") -> "LockdownPolicy":
        return cls(tuple((float(v),) for v in levels), (0.0,), kind)

    @classmethod
    def uniform(cls, level, ngroups: int = 3, starts=(0.0,)) -> "LockdownPolicy":
        row = tuple(np.broadcast_to(np.asarray(level, dtype=float), (len(starts),)).tolist())
        return cls((row,) * ngroups, starts, "uniform")

    def level_at(self, group: int, t: float) -> float:
        k = int(np.searchsorted(self.starts, t, side="right")) - 1
        return self.levels[group][max(k, 0)]

    def as_array(self) -> np.ndarray:
        return np.array(self.levels, dtype=np.float64)

    def encode(self) -> str:
        return "|".join(";".join(f"{v:.6f}" for v in row) for row in self.levels)

    def check(self, mr: MRParams) -> None:
        if len(self.levels) != len(mr.groups):
            raise ConfigError(f"policy has {len(self.levels)} groups, model has {len(mr.groups)}")
        for g, row in zip(mr.groups, self.levels):
            if max(row) > g.lbar + 1e-12:
                raise ConfigError(f"level {max(row)} exceeds lbar={g.lbar} for group {g.name}")


# ---------------------------------------------------------------- kernels

@njit(cache=True)
def _level_index(starts, t):
    k = np.searchsorted(starts, t, side="right") - 1
    return k if k > 0 else 0


@njit(cache=True)
def _mr_rhs(y, p, beta, att, d_i, d_h, pi, strict_r, out):
    ngroups = y.shape[0]
    mu = p[P_MU]
    total = 0.0
    pressure = 0.0
    for j in range(ngroups):
        total += y[j, 0] + y[j, 1] + y[j, 2] + y[j, 3] + y[j, 4] + y[j, 5]
        pressure += att[j] * (y[j, 2] + p[P_EPS_E] * y[j, 1] + p[P_EPS_Q] * y[j, 3]
                              + p[P_EPS_H] * y[j, 4])
    m_s = p[P_NU] + mu
    m_e = p[P_GAMMA_E] + p[P_SIGMA_E] + mu
    m_q = p[P_R_Q] + p[P_SIGMA_Q] + mu
    m_r = mu + p[P_S_R]
    rq = 0.0 if strict_r else p[P_R_Q]
    for g in range(ngroups):
        s, e, i, q, h, r = y[g, 0], y[g, 1], y[g, 2], y[g, 3], y[g, 4], y[g, 5]
        m_i = p[P_GAMMA_I] + d_i[g] + p[P_R_I] + mu
        m_h = d_h[g] + p[P_R_H] + mu
        infection = s * (beta * att[g] * pressure) / total if total > 0.0 else 0.0
        out[g, 0] = pi[g] - infection - m_s * s + p[P_S_R] * r
        out[g, 1] = infection - m_e * e
        out[g, 2] = p[P_SIGMA_E] * e - m_i * i
        out[g, 3] = p[P_GAMMA_E] * e - m_q * q
        out[g, 4] = p[P_GAMMA_I] * i + p[P_SIGMA_Q] * q - m_h * h
        out[g, 5] = p[P_NU] * s + p[P_R_I] * i + rq * q + p[P_R_H] * h - m_r * r
        out[g, 6] = d_i[g] * i + d_h[g] * h


@njit(cache=True)
def _attenuation(levels, lstarts, theta, t, att):
    k = _level_index(lstarts, t)
    for g in range(levels.shape[0]):
        att[g] = 1.0 - theta * levels[g, k]


@njit(cache=True)
def _mr_step(y, t, dt, p, bstarts, bvals, levels, lstarts, theta, d_i, d_h, pi, strict_r,
             clamp, k1, k2, k3, k4, tmp, att):
    """One RK4 step in place. Returns 0 ok, 1 negative, 2 non-finite."""
    ngroups = y.shape[0]
    _attenuation(levels, lstarts, theta, t, att)
    _mr_rhs(y, p, _beta_at(bstarts, bvals, t), att, d_i, d_h, pi, strict_r, k1)
    tm = t + 0.5 * dt
    _attenuation(levels, lstarts, theta, tm, att)
    bm = _beta_at(bstarts, bvals, tm)
    for g in range(ngroups):
        for c in range(NCOL):
            tmp[g, c] = y[g, c] + 0.5 * dt * k1[g, c]
    _mr_rhs(tmp, p, bm, att, d_i, d_h, pi, strict_r, k2)
    for g in range(ngroups):
        for c in range(NCOL):
            tmp[g, c] = y[g, c] + 0.5 * dt * k2[g, c]
    _mr_rhs(tmp, p, bm, att, d_i, d_h, pi, strict_r, k3)
    for g in range(ngroups):
        for c in range(NCOL):
            tmp[g, c] = y[g, c] + dt * k3[g, c]
    _attenuation(levels, lstarts, theta, t + dt, att)
    _mr_rhs(tmp, p, _beta_at(bstarts, bvals, t + dt), att, d_i, d_h, pi, strict_r, k4)
    status = 0
    for g in range(ngroups):
        for c in range(NCOL):
            v = y[g, c] + (dt / 6.0) * (k1[g, c] + 2.0 * k2[g, c] + 2.0 * k3[g, c] + k4[g, c])
            if not np.isfinite(v):
                return 2
            if v < 0.0:
                if v < -NEGATIVE_TOL:
                    status = 1
                elif clamp:
                    v = 0.0
            y[g, c] = v
    return status


@njit(cache=True)
def _employment(y, g, level, mu, gamma_e, sigma_e, gamma_i, d_i_g, r_q, r_h, kappa_g, n_g):
    s, e, i, q, h, r = y[g, 0], y[g, 1], y[g, 2], y[g, 3], y[g, 4], y[g, 5]
    work = 1.0 - mu - level
    if work < 0.0:
        work = 0.0
    emp = (work * (s + e + i + r) - (gamma_e + sigma_e) * e - (gamma_i + d_i_g) * i
           - (1.0 - r_q) * q - (1.0 - r_h) * h + kappa_g * r)
    if emp < 0.0:
        emp = 0.0
    if emp > n_g:
        emp = n_g
    return emp


@njit(cache=True)
def _flows(y, t, levels, lstarts, p, d_i, d_h, n, w, kappa, disc_sign, r_disc, lost, deaths):
    """Instantaneous sum_i w_i (n_i - EMP_i), and per-group death flows, both discounted."""
    k = _level_index(lstarts, t)
    disc = math.exp(disc_sign * r_disc * t)
    raw_lost = 0.0
    for g in range(y.shape[0]):
        emp = _employment(y, g, levels[g, k], p[P_MU], p[P_GAMMA_E], p[P_SIGMA_E], p[P_GAMMA_I],
                          d_i[g], p[P_R_Q], p[P_R_H], kappa[g], n[g])
        raw_lost += w[g] * (n[g] - emp)
        deaths[g] = disc * (d_i[g] * y[g, 2] + d_h[g] * y[g, 4])
    lost[0] = raw_lost
    lost[1] = disc * raw_lost


@njit(cache=True)
def _mr_sweep(all_levels, lstarts, y0, p, bstarts, bvals, theta, d_i, d_h, pi, n, w, kappa,
              disc_sign, r_disc, dt, nsteps, strict_r, clamp):
    npol = all_levels.shape[0]
    ngroups = y0.shape[0]
    out = np.zeros((npol, OUT_DEATH_FLOW + ngroups))
    y = np.empty((ngroups, NCOL))
    k1 = np.empty((ngroups, NCOL))
    k2 = np.empty((ngroups, NCOL))
    k3 = np.empty((ngroups, NCOL))
    k4 = np.empty((ngroups, NCOL))
    tmp = np.empty((ngroups, NCOL))
    att = np.empty(ngroups)
    lost_a = np.empty(2)
    lost_b = np.empty(2)
    deaths_a = np.empty(ngroups)
    deaths_b = np.empty(ngroups)
    for ip in range(npol):
        levels = all_levels[ip]
        y[:, :] = y0
        gdp = 0.0
        cost = 0.0
        dflow = np.zeros(ngroups)
        _flows(y, 0.0, levels, lstarts, p, d_i, d_h, n, w, kappa, disc_sign, r_disc, lost_a, deaths_a)
        status = 0
        for k in range(nsteps):
            t = dt * k
            status = _mr_step(y, t, dt, p, bstarts, bvals, levels, lstarts, theta, d_i, d_h, pi,
                              strict_r, clamp, k1, k2, k3, k4, tmp, att)
            if status != 0:
                break
            _flows(y, t + dt, levels, lstarts, p, d_i, d_h, n, w, kappa, disc_sign, r_disc,
                   lost_b, deaths_b)
            gdp += 0.5 * dt * (lost_a[0] + lost_b[0])
            cost += 0.5 * dt * (lost_a[1] + lost_b[1])
            for g in range(ngroups):
                dflow[g] += 0.5 * dt * (deaths_a[g] + deaths_b[g])
            lost_a[0] = lost_b[0]
            lost_a[1] = lost_b[1]
            for g in range(ngroups):
                deaths_a[g] = deaths_b[g]
        total_d = 0.0
        for g in range(ngroups):
            total_d += y[g, 6]
        out[ip, OUT_GDP] = gdp
        out[ip, OUT_DEATHS] = total_d
        out[ip, OUT_OUTPUT_COST] = cost
        out[ip, OUT_STATUS] = status
        for g in range(ngroups):
            out[ip, OUT_DEATH_FLOW + g] = dflow[g]
    return out


@njit(cache=True)
def _mr_integrate(levels, lstarts, y0, p, bstarts, bvals, theta, d_i, d_h, pi, dt, nsteps,
                  strict_r, clamp):
    ngroups = y0.shape[0]
    states = np.zeros((nsteps + 1, ngroups, NCOL))
    states[0] = y0
    y = y0.copy()
    k1 = np.empty((ngroups, NCOL))
    k2 = np.empty((ngroups, NCOL))
    k3 = np.empty((ngroups, NCOL))
    k4 = np.empty((ngroups, NCOL))
    tmp = np.empty((ngroups, NCOL))
    att = np.empty(ngroups)
    for k in range(nsteps):
        status = _mr_step(y, dt * k, dt, p, bstarts, bvals, levels, lstarts, theta, d_i, d_h, pi,
                          strict_r, clamp, k1, k2, k3, k4, tmp, att)
        if status != 0:
            return states, status, k + 1
        states[k + 1] = y
    return states, 0, nsteps


# ----------------------------------------------------------- public API

@dataclass
class MRTrajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), ngroups, 7)
    names: tuple

    def group(self, name: str) -> np.ndarray:
        return self.states[:, self.names.index(name), :]

    def summed(self) -> np.ndarray:
        return self.states.sum(axis=1)


@dataclass(frozen=True)
class _Prepared:
    rates: np.ndarray
    bstarts: np.ndarray
    bvals: np.ndarray
    d_i: np.ndarray
    d_h: np.ndarray
    pi: np.ndarray
    n: np.ndarray
    w: np.ndarray
    kappa: np.ndarray
    y0: np.ndarray


def prepare(mr: MRParams) -> _Prepared:
    d_i, d_h = mr.group_death_rates()
    bstarts, bvals = mr.base.beta_arrays()
    shares = mr.shares
    return _Prepared(
        rates=mr.base.rate_vector(), bstarts=bstarts, bvals=bvals, d_i=d_i, d_h=d_h,
        pi=mr.base.pi_birth * shares, n=shares, w=np.array([g.w for g in mr.groups]),
        kappa=np.array([g.kappa for g in mr.groups]), y0=mr.initial_state())


def _raise_status(status: int, where: str) -> None:
    if status == 2:
        raise NonFiniteStateError(f"non-finite state {where}")
    if status == 1:
        raise StepSizeError(f"compartment went negative {where}; use a smaller dt")


def mr_rhs(mr: MRParams, policy: LockdownPolicy, state, t: float = 0.0, prep: _Prepared | None = None) -> np.ndarray:
    """Per-group derivatives, shape (ngroups, 7), of the stacked state at time ``t``."""
    prep = prep or prepare(mr)
    y = np.asarray(state, dtype=np.float64)
    if y[:, :6].sum() == 0:
        from .errors import DegenerateInputError
        raise DegenerateInputError("total population N is zero")
    att = 1.0 - mr.theta * np.array([policy.level_at(g, t) for g in range(len(mr.groups))])
    out = np.empty_like(y)
    _mr_rhs(y, prep.rates, mr.base.beta_at(t), att, prep.d_i, prep.d_h, prep.pi,
            mr.base.strict_r, out)
    return out


def simulate_mr(mr: MRParams, policy: LockdownPolicy, prep: _Prepared | None = None,
                y0: np.ndarray | None = None) -> MRTrajectory:
    policy.check(mr)
    prep = prep or prepare(mr)
    y0 = prep.y0 if y0 is None else np.asarray(y0, dtype=np.float64)
    states, status, step = _mr_integrate(
        policy.as_array(), np.array(policy.starts), y0, prep.rates, prep.bstarts, prep.bvals,
        mr.theta, prep.d_i, prep.d_h, prep.pi, mr.dt, mr.nsteps, mr.base.strict_r, True)
    _raise_status(status, f"at step {step}")
    return MRTrajectory(mr.dt * np.arange(mr.nsteps + 1), states, mr.names)


def employment(mr: MRParams, policy: LockdownPolicy, state, group: int, t: float = 0.0,
               prep: _Prepared | None = None) -> float:
    """Employed mass of ``group``, clamped to [0, n_i]."""
    prep = prep or prepare(mr)
    y = np.asarray(state, dtype=np.float64)
    p = mr.base
    return float(_employment(y, group, policy.level_at(group, t), p.mu, p.gamma_e, p.sigma_e,
                             p.gamma_i, prep.d_i[group], p.r_q, p.r_h, prep.kappa[group],
                             prep.n[group]))


def employment_series(mr: MRParams, policy: LockdownPolicy, traj: MRTrajectory,
                      prep: _Prepared | None = None) -> np.ndarray:
    prep = prep or prepare(mr)
    out = np.empty((len(traj.times), len(mr.groups)))
    for k, t in enumerate(traj.times):
        for g in range(len(mr.groups)):
            out[k, g] = employment(mr, policy, traj.states[k], g, t, prep)
    return out


def _check_horizon(mr: MRParams, traj: MRTrajectory) -> None:
    if abs(traj.times[-1] - traj.times[0] - mr.dt * mr.nsteps) > 1e-9 or traj.times[0] != 0.0:
        raise ConfigError(
            f"trajectory covers [{traj.times[0]}, {traj.times[-1]}], expected [0, {mr.dt * mr.nsteps}]")


def social_cost(mr: MRParams, policy: LockdownPolicy, traj: MRTrajectory, r: float | None = None,
                chi: float | None = None, prep: _Prepared | None = None) -> float:
    """Present value over [0, T] of lost output plus the total cost of deaths (trapezoid rule)."""
    _check_horizon(mr, traj)
    prep = prep or prepare(mr)
    r = mr.r if r is None else r
    chi_abs = mr.chi_abs if chi is None else chi * 365.0 * mr.w_rep
    chi_hat = np.array([g.chi_hat(r, chi_abs) for g in mr.groups])
    emp = employment_series(mr, policy, traj, prep)
    lost = (prep.w[None, :] * (prep.n[None, :] - emp)).sum(axis=1)
    deaths = prep.d_i[None, :] * traj.states[:, :, 2] + prep.d_h[None, :] * traj.states[:, :, 4]
    sign = 1.0 if mr.strict_discount else -1.0
    integrand = np.exp(sign * r * traj.times) * (lost + deaths @ chi_hat)
    return float(np.trapezoid(integrand, traj.times))


@dataclass
class EconomicOutcome:
    gdp_loss: float
    death_rate: float
    social_cost: float
    emp_series: np.ndarray | None = None


def economic_outcome(mr: MRParams, policy: LockdownPolicy, traj: MRTrajectory,
                     prep: _Prepared | None = None) -> EconomicOutcome:
    _check_horizon(mr, traj)
    prep = prep or prepare(mr)
    emp = employment_series(mr, policy, traj, prep)
    lost = np.trapezoid((prep.w[None, :] * (prep.n[None, :] - emp)).sum(axis=1), traj.times)
    baseline = traj.times[-1] * float(np.dot(prep.w, prep.n))
    gdp_loss = lost / baseline if baseline > 0 else 0.0
    death_rate = float(traj.states[-1, :, 6].sum() / prep.n.sum())
    return EconomicOutcome(float(gdp_loss), death_rate, social_cost(mr, policy, traj, prep=prep), emp)


def sweep_summaries(mr: MRParams, levels: np.ndarray, starts, prep: _Prepared | None = None) -> np.ndarray:
    """Raw kernel summaries for a stack of level arrays, shape (P, ngroups, K)."""
    prep = prep or prepare(mr)
    levels = np.ascontiguousarray(levels, dtype=np.float64)
    return _mr_sweep(levels, np.asarray(starts, dtype=np.float64), prep.y0, prep.rates,
                     prep.bstarts, prep.bvals, mr.theta, prep.d_i, prep.d_h, prep.pi, prep.n,
                     prep.w, prep.kappa, 1.0 if mr.strict_discount else -1.0, mr.r, mr.dt,
                     mr.nsteps, mr.base.strict_r, True)


def outcome_from_summary(mr: MRParams, row: np.ndarray, chi: float | None = None) -> tuple[float, float, float]:
    """(gdp_loss, death_rate, social_cost) from one kernel summary row."""
    if row[OUT_STATUS] != 0:
        _raise_status(int(row[OUT_STATUS]), "during policy evaluation")
    shares = mr.shares
    w = np.array([g.w for g in mr.groups])
    baseline = mr.dt * mr.nsteps * float(np.dot(w, shares))
    gdp_loss = row[OUT_GDP] / baseline if baseline > 0 else 0.0
    death_rate = row[OUT_DEATHS] / shares.sum()
    cost = row[OUT_OUTPUT_COST] + float(np.dot(mr.chi_hats(chi), row[OUT_DEATH_FLOW:]))
    return float(gdp_loss), float(death_rate), float(cost)


# ------------------------------------------------------------ policy files

def read_policy_csv(path, mr: MRParams, kind: str = "targeted") -> LockdownPolicy:
    """Read ``group,start_day,level`` rows into a policy over ``mr``'s groups."""
    entries: dict = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["group", "start_day", "level"]:
            raise DataError(f"{path}:1: expected header 'group,start_day,level'")
        for row in reader:
            if not row:
                continue
            try:
                name, start, level = row[0].strip(), float(row[1]), float(row[2])
            except (IndexError, ValueError):
                raise DataError(f"{path}:{reader.line_num}: malformed row {row!r}") from None
            if name not in mr.names:
                raise DataError(f"{path}:{reader.line_num}: unknown group {name!r}")
            entries[(name, start)] = level
    starts = sorted({s for _, s in entries})
    if not starts or starts[0] != 0.0:
        raise DataError(f"{path}: every schedule must start at day 0")
    levels = []
    for name in mr.names:
        row, current = [], None
        for s in starts:
            current = entries.get((name, s), current)
            if current is None:
                raise DataError(f"{path}: group {name} has no level at day 0")
            row.append(current)
        levels.append(tuple(row))
    if kind == "uniform" and len(set(levels)) > 1:
        kind = "targeted"
    return LockdownPolicy(tuple(levels), tuple(starts), kind)


def write_policy_csv(policy: LockdownPolicy, mr: MRParams, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["group", "start_day", "level"])
        for name, row in zip(mr.names, policy.levels):
            for start, level in zip(policy.starts, row):
                writer.writerow([name, repr(start), repr(level)])
