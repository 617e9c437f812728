"""Jacobian of the SEQIHR system and the control reproduction number.

The reproduction number is evaluated from its closed form and checked
behaviourally: a tiny seed at the disease-free state must grow exactly when
R_0 > 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibria import EquilibriumCoefficients, disease_free_equilibrium
from .errors import DegenerateInputError, NonFiniteStateError
from .integrator import IntegrationConfig, simulate
from .model import CompartmentState, ModelParams, OutflowCoefficients, force_of_infection, rhs_array

THRESHOLD_TOL = 1e-6
SEED = 1e-8


def jacobian(params: ModelParams, state: CompartmentState) -> np.ndarray:
    """Analytic 6x6 Jacobian of dS..dR with respect to (S, E, I, Q, H, R)."""
    p = params
    s, e, i, q, h, r = state.s, state.e, state.i, state.q, state.h, state.r
    n = s + e + i + q + h + r
    if n == 0:
        raise DegenerateInputError("total population N is zero")
    m = OutflowCoefficients.from_params(p)
    beta = p.beta_at(state.t)
    force = beta * (i + p.eps_e * e + p.eps_q * q + p.eps_h * h)
    common = s * force / n ** 2
    # gradient of the incidence term S*L/N
    grad = np.array([
        force / n - common,
        beta * p.eps_e * s / n - common,
        beta * s / n - common,
        beta * p.eps_q * s / n - common,
        beta * p.eps_h * s / n - common,
        -common,
    ])
    jac = np.zeros((6, 6))
    jac[0] = -grad
    jac[0, 0] -= m.m_s
    jac[0, 5] += p.s_r
    jac[1] = grad
    jac[1, 1] -= m.m_e
    jac[2, 1] = p.sigma_e
    jac[2, 2] = -m.m_i
    jac[3, 1] = p.gamma_e
    jac[3, 3] = -m.m_q
    jac[4, 2] = p.gamma_i
    jac[4, 3] = p.sigma_q
    jac[4, 4] = -m.m_h
    jac[5, 0] = p.nu
    jac[5, 2] = p.r_i
    jac[5, 3] = 0.0 if p.strict_r else p.r_q
    jac[5, 4] = p.r_h
    jac[5, 5] = -m.m_r
    return jac


def fd_jacobian(params: ModelParams, state: CompartmentState, step: float = 1e-4) -> np.ndarray:
    """Central differences with one Richardson extrapolation (O(h^4)).

    The extrapolation keeps truncation near 1e-16 at h=1e-4, where roundoff
    is a hundred times smaller than at h=1e-6.
    """
    y0 = state.as_array()
    jac = np.empty((6, 6))

    def central(j, h):
        up, dn = y0.copy(), y0.copy()
        up[j] += h
        dn[j] -= h
        return (rhs_array(params, state.t, up)[:6] - rhs_array(params, state.t, dn)[:6]) / (2 * h)

    for j in range(6):
        h = step * max(1.0, abs(y0[j]))
        jac[:, j] = (4.0 * central(j, h / 2) - central(j, h)) / 3.0
    return jac


def control_reproduction_number(params: ModelParams, state: CompartmentState) -> float:
    p = params
    n = state.n
    if n <= 0:
        raise DegenerateInputError("total population N is zero")
    m = OutflowCoefficients.from_params(p)
    if min(m.m_s, m.m_e, m.m_i, m.m_q, m.m_h, m.m_r) <= 0 or p.sigma_e <= 0:
        raise DegenerateInputError("all outflow coefficients and sigma_e must be positive")
    a = EquilibriumCoefficients.from_params(p, beta=p.beta_at(state.t))
    force = force_of_infection(p, state)
    s, mu = state.s, p.mu
    numerator = mu * a.alpha_i * n + a.alpha_s * force
    denominator = (mu * a.alpha_s * n + mu * a.alpha_s * force / m.m_s
                   + (force * s / n) * (p.r_i + p.r_h * a.alpha_h
                                        + mu * (1.0 + a.alpha_e + a.alpha_q + a.alpha_h)))
    if not denominator > 0:
        raise DegenerateInputError(f"reproduction-number denominator is {denominator!r}")
    return (s / n) * numerator / denominator


def basic_reproduction_number(params: ModelParams) -> float:
    """R_C evaluated at the disease-free equilibrium."""
    return control_reproduction_number(params, disease_free_equilibrium(params).state)


def _seed_params(params: ModelParams) -> ModelParams:
    return params.replace(nu=0.0, pi_birth=params.mu)


def threshold_oracle(params: ModelParams, days: float = 60.0, window: tuple = (30.0, 60.0)) -> float:
    """Per-day log-linear growth rate of E+I after seeding E(0)=1e-8 at the DFE."""
    p = _seed_params(params)
    traj = simulate(p, CompartmentState.seeded(SEED), IntegrationConfig(dt=0.25, horizon=days))
    infected = traj.column("E") + traj.column("I")
    mask = (traj.times >= window[0]) & (traj.times <= window[1])
    if not np.all(np.isfinite(infected)) or np.any(infected[mask] <= 0):
        raise NonFiniteStateError("seed trajectory is not usable for a growth-rate fit")
    slope, _ = np.polyfit(traj.times[mask], np.log(infected[mask]), 1)
    return float(slope)


def critical_beta(params: ModelParams, hi: float = 1.0, iters: int = 60) -> float:
    """Bisect the contact rate at which the seed growth rate changes sign."""
    lo = 0.0
    while threshold_oracle(params.with_beta(hi)) <= 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e3:
            raise DegenerateInputError("no supercritical contact rate below 1e3")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if threshold_oracle(params.with_beta(mid)) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-10 * hi:
            break
    return 0.5 * (lo + hi)


def _sign(x: float, tol: float) -> int:
    return 0 if abs(x) <= tol else (1 if x > 0 else -1)


@dataclass(frozen=True)
class ReproductionReport:
    r_c: float
    r_0: float
    growth_rate: float
    threshold_consistent: bool


def reproduction_report(params: ModelParams, state: CompartmentState | None = None) -> ReproductionReport:
    r_0 = basic_reproduction_number(params)
    r_c = r_0 if state is None else control_reproduction_number(params, state)
    growth = threshold_oracle(params)
    consistent = _sign(r_0 - 1.0, THRESHOLD_TOL) == _sign(growth, THRESHOLD_TOL)
    return ReproductionReport(r_c, r_0, growth, consistent)
