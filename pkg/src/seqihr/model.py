"""SEQIHR state, parameters and right-hand side.

Compartments are ordered ``S, E, I, Q, H, R`` followed by the cumulative
COVID death accumulator ``D``. All rates are per day and the population is
normalized so that N(0) = 1 unless stated otherwise.

The numeric kernels are compiled with numba so the integrator, the
calibration loop and the multi-group sweep share one implementation of the
flow terms.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ConfigError, DegenerateInputError

COMPARTMENTS = ("S", "E", "I", "Q", "H", "R")
STATE_LABELS = COMPARTMENTS + ("D",)
NSTATE = len(STATE_LABELS)

# layout of the packed rate vector handed to the compiled kernels
P_PI, P_MU, P_NU = 0, 1, 2
P_EPS_E, P_EPS_Q, P_EPS_H = 3, 4, 5
P_S_R = 6
P_GAMMA_E, P_GAMMA_I = 7, 8
P_R_I, P_R_H, P_R_Q = 9, 10, 11
P_SIGMA_E, P_SIGMA_Q = 12, 13
P_D_I, P_D_H = 14, 15
NPARAM = 16

RATE_FIELDS = (
    "pi_birth", "mu", "nu", "eps_e", "eps_q", "eps_h", "s_r",
    "gamma_e", "gamma_i", "r_i", "r_h", "r_q", "sigma_e", "sigma_q", "d_i", "d_h",
)


def parse_beta(text: str) -> tuple[tuple[float, float], ...]:
    """Parse ``"0:0.31,75:0.12"`` into ``((0.0, 0.31), (75.0, 0.12))``."""
    segments = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(f"beta segment {chunk!r} is not of the form start:value")
        start, value = chunk.split(":", 1)
        try:
            segments.append((float(start), float(value)))
        except ValueError:
            raise ConfigError(f"beta segment {chunk!r} is not numeric") from None
    return tuple(segments)


def format_beta(segments) -> str:
    return ",".join(f"{start!r}:{value!r}" for start, value in segments)


@dataclass(frozen=True)
class ModelParams:
    pi_birth: float = 0.0
    mu: float = 0.0
    nu: float = 0.0
    beta: tuple = ((0.0, 0.2),)
    eps_e: float = 0.0
    eps_q: float = 0.0
    eps_h: float = 0.0
    s_r: float = 0.0
    gamma_e: float = 0.0
    gamma_i: float = 0.0
    r_i: float = 0.0
    r_h: float = 0.0
    r_q: float = 0.0
    sigma_e: float = 0.0
    sigma_q: float = 0.0
    d_i: float = 0.0
    d_h: float = 0.0
    # drop the r_Q*Q inflow to R (uncorrected R equation, loses mass)
    strict_r: bool = False

    def __post_init__(self):
        beta = tuple((float(s), float(v)) for s, v in self.beta)
        object.__setattr__(self, "beta", beta)
        if not beta or beta[0][0] != 0.0:
            raise ConfigError("beta schedule must start with a segment at day 0")
        starts = [s for s, _ in beta]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("beta segment starts must be strictly increasing")
        if any(v < 0 or not np.isfinite(v) for _, v in beta):
            raise ConfigError("beta values must be finite and nonnegative")
        for name in RATE_FIELDS:
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be finite and nonnegative, got {value!r}")
        for name in ("eps_e", "eps_q", "eps_h"):
            if getattr(self, name) > 1:
                raise ConfigError(f"{name} must lie in [0, 1]")

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def with_beta(self, value: float) -> "ModelParams":
        """Same parameters with a single constant contact rate."""
        return dataclasses.replace(self, beta=((0.0, float(value)),))

    def beta_at(self, t: float) -> float:
        starts, values = self.beta_arrays()
        return float(_beta_at(starts, values, float(t)))

    def beta_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        starts = np.array([s for s, _ in self.beta], dtype=np.float64)
        values = np.array([v for _, v in self.beta], dtype=np.float64)
        return starts, values

    def rate_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in RATE_FIELDS], dtype=np.float64)

    def outflows(self) -> "OutflowCoefficients":
        return OutflowCoefficients.from_params(self)


@dataclass(frozen=True)
class CompartmentState:
    s: float
    e: float = 0.0
    i: float = 0.0
    q: float = 0.0
    h: float = 0.0
    r: float = 0.0
    d: float = 0.0
    t: float = 0.0

    @property
    def n(self) -> float:
        return self.s + self.e + self.i + self.q + self.h + self.r

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.e, self.i, self.q, self.h, self.r, self.d], dtype=np.float64)

    @classmethod
    def from_array(cls, y, t: float = 0.0) -> "CompartmentState":
        y = np.asarray(y, dtype=np.float64)
        d = float(y[6]) if len(y) > 6 else 0.0
        return cls(*(float(v) for v in y[:6]), d=d, t=float(t))

    @classmethod
    def seeded(cls, e0: float, n0: float = 1.0) -> "CompartmentState":
        """Fully susceptible population with ``e0`` exposed mass."""
        return cls(s=n0 - e0, e=e0)


@dataclass(frozen=True)
class OutflowCoefficients:
    m_s: float
    m_e: float
    m_i: float
    m_q: float
    m_h: float
    m_r: float

    @classmethod
    def from_params(cls, p: ModelParams) -> "OutflowCoefficients":
        return cls(
            m_s=p.nu + p.mu,
            m_e=p.gamma_e + p.sigma_e + p.mu,
            m_i=p.gamma_i + p.d_i + p.r_i + p.mu,
            m_q=p.r_q + p.sigma_q + p.mu,
            m_h=p.d_h + p.r_h + p.mu,
            m_r=p.mu + p.s_r,
        )


@njit(cache=True)
def _beta_at(starts, values, t):
    k = np.searchsorted(starts, t, side="right") - 1
    if k < 0:
        k = 0
    return values[k]


@njit(cache=True)
def _rhs_kernel(y, p, beta, strict_r, out):
    """Write dS..dR, dD into ``out``; return total population N."""
    s, e, i, q, h, r = y[0], y[1], y[2], y[3], y[4], y[5]
    n = s + e + i + q + h + r
    mu = p[P_MU]
    force = beta * (i + p[P_EPS_E] * e + p[P_EPS_Q] * q + p[P_EPS_H] * h)
    infection = s * force / n if n > 0.0 else 0.0
    m_s = p[P_NU] + mu
    m_e = p[P_GAMMA_E] + p[P_SIGMA_E] + mu
    m_i = p[P_GAMMA_I] + p[P_D_I] + p[P_R_I] + mu
    m_q = p[P_R_Q] + p[P_SIGMA_Q] + mu
    m_h = p[P_D_H] + p[P_R_H] + mu
    m_r = mu + p[P_S_R]
    out[0] = p[P_PI] - infection - m_s * s + p[P_S_R] * r
    out[1] = infection - m_e * e
    out[2] = p[P_SIGMA_E] * e - m_i * i
    out[3] = p[P_GAMMA_E] * e - m_q * q
    out[4] = p[P_GAMMA_I] * i + p[P_SIGMA_Q] * q - m_h * h
    rq_inflow = 0.0 if strict_r else p[P_R_Q] * q
    out[5] = p[P_NU] * s + p[P_R_I] * i + rq_inflow + p[P_R_H] * h - m_r * r
    out[6] = p[P_D_I] * i + p[P_D_H] * h
    return n


def force_of_infection(params: ModelParams, state: CompartmentState) -> float:
    """Per-day contact rate L = beta(t) * (I + eps_E E + eps_Q Q + eps_H H)."""
    beta = params.beta_at(state.t)
    return beta * (state.i + params.eps_e * state.e + params.eps_q * state.q + params.eps_h * state.h)


def rhs_array(params: ModelParams, t: float, y) -> np.ndarray:
    """Derivative of the packed ``[S, E, I, Q, H, R, D]`` vector at time ``t``."""
    y = np.asarray(y, dtype=np.float64)
    n = y[:6].sum()
    if n == 0.0:
        raise DegenerateInputError("total population N is zero")
    out = np.empty(NSTATE)
    _rhs_kernel(y, params.rate_vector(), params.beta_at(t), params.strict_r, out)
    return out


def rhs(params: ModelParams, state: CompartmentState) -> np.ndarray:
    """Per-day derivatives ``(dS, dE, dI, dQ, dH, dR, dD)`` of ``state``."""
    return rhs_array(params, state.t, state.as_array())


def mass_balance(params: ModelParams, state: CompartmentState, deriv) -> float:
    """Residual of dN/dt against Pi - mu N - d_I I - d_H H."""
    deriv = np.asarray(deriv, dtype=np.float64)
    expected = params.pi_birth - params.mu * state.n - params.d_i * state.i - params.d_h * state.h
    return float(deriv[:6].sum() - expected)
