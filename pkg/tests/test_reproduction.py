import numpy as np
import pytest

from conftest import jitter_params, random_state
from seqihr.equilibria import EquilibriumCoefficients, disease_free_equilibrium
from seqihr.model import CompartmentState, rhs_array
from seqihr.reproduction import (
    basic_reproduction_number, control_reproduction_number, critical_beta, fd_jacobian, jacobian,
    reproduction_report, threshold_oracle,
)


def test_jacobian_matches_fd(baseline, rng):
    for _ in range(100):
        p = jitter_params(baseline, rng, nu=rng.uniform(0, 1e-3), s_r=rng.uniform(0, 1e-2),
                          eps_e=rng.uniform(), eps_q=rng.uniform())
        state = random_state(rng)
        a, f = jacobian(p, state), fd_jacobian(p, state)
        nz = a != 0
        assert np.all(f[~nz] == pytest.approx(0.0, abs=1e-12))
        assert np.max(np.abs(a - f)[nz] / np.abs(a)[nz]) <= 1e-6


def test_jacobian_matches_fd_small_step(baseline, rng):
    # at h=1e-6 roundoff dominates tiny entries, so compare column-wise against each column's scale
    for _ in range(100):
        p = jitter_params(baseline, rng, eps_e=rng.uniform(), eps_q=rng.uniform())
        state = random_state(rng)
        a, f = jacobian(p, state), fd_jacobian(p, state, step=1e-6)
        assert np.max(np.abs(a - f).max(axis=0) / np.abs(a).max(axis=0)) <= 1e-6


def test_jacobian_flow_structure(baseline):
    p = baseline.with_beta(0.0).replace(nu=1e-4, s_r=1e-3)
    jac = jacobian(p, CompartmentState(0.9, r=0.1))
    m = p.outflows()
    np.testing.assert_allclose(np.diag(jac), [-m.m_s, -m.m_e, -m.m_i, -m.m_q, -m.m_h, -(p.mu + p.s_r)],
                               rtol=1e-15)
    assert jac[2, 1] == p.sigma_e and jac[3, 1] == p.gamma_e
    assert jac[4, 2] == p.gamma_i and jac[4, 3] == p.sigma_q
    assert jac[5, 0] == p.nu and jac[0, 5] == p.s_r
    assert np.all(np.triu(jac[1:5, 1:5], 1) == 0)


def test_jacobian_column_sums_match_mass_balance(baseline, rng):
    """d/dy_j of sum(dS..dR) equals d/dy_j of (Pi - mu N - d_I I - d_H H)."""
    p = baseline.replace(eps_e=0.4)
    jac = jacobian(p, random_state(rng))
    expected = -p.mu * np.ones(6)
    expected[2] -= p.d_i
    expected[4] -= p.d_h
    np.testing.assert_allclose(jac.sum(axis=0), expected, atol=1e-15)


def test_zero_beta_gives_zero(baseline, rng):
    assert control_reproduction_number(baseline.with_beta(0.0), random_state(rng)) == 0.0


def test_dfe_reduction(baseline, rng):
    for _ in range(10):
        p = jitter_params(baseline, rng, nu=rng.uniform(0, 1e-3))
        a = EquilibriumCoefficients.from_params(p)
        dfe = disease_free_equilibrium(p)
        expected = (dfe.state.s / dfe.state.n) * a.alpha_i / a.alpha_s
        assert basic_reproduction_number(p) == pytest.approx(expected, rel=1e-13)
        # S0*/N0* = mu/M_S when Pi balances mu
        assert dfe.state.s / dfe.state.n == pytest.approx(p.mu / p.outflows().m_s, rel=1e-12)


def test_next_generation_agreement(baseline, rng):
    """R_0 equals the spectral radius of F V^-1 on the infected block (E, I, Q, H)."""
    for _ in range(10):
        p = jitter_params(baseline, rng, eps_e=rng.uniform(), eps_q=rng.uniform())
        beta = p.beta_at(0.0)
        m = p.outflows()
        f = np.zeros((4, 4))
        f[0] = beta * np.array([p.eps_e, 1.0, p.eps_q, p.eps_h])
        v = np.array([[m.m_e, 0, 0, 0], [-p.sigma_e, m.m_i, 0, 0],
                      [-p.gamma_e, 0, m.m_q, 0], [0, -p.gamma_i, -p.sigma_q, m.m_h]])
        ngm = f @ np.linalg.inv(v)
        assert basic_reproduction_number(p) == pytest.approx(max(abs(np.linalg.eigvals(ngm))), rel=1e-12)


def test_rc_monotone_in_beta(baseline, rng):
    state = CompartmentState(0.9, 1e-3, 2e-3, 1e-3, 1e-3, 0.09)
    values = [control_reproduction_number(baseline.with_beta(b), state) for b in np.linspace(0, 2, 41)]
    assert np.all(np.diff(values) > 0)


def test_growth_sign_trivial(baseline):
    assert threshold_oracle(baseline.with_beta(0.0)) < 0
    assert threshold_oracle(baseline.with_beta(2.0)) > 0


def test_critical_beta_threshold(baseline):
    b = critical_beta(baseline)
    assert abs(basic_reproduction_number(baseline.with_beta(b)) - 1.0) <= 0.05


def test_report(baseline):
    rep = reproduction_report(baseline)
    assert rep.r_c == rep.r_0
    assert rep.threshold_consistent
    assert rep.r_0 > 1 and rep.growth_rate > 0


def test_fd_oracle_is_accurate_on_rhs(baseline, rng):
    state = random_state(rng)
    y = state.as_array()
    jac = fd_jacobian(baseline, state)
    h = 1e-7
    dy = np.zeros(7)
    dy[2] = h
    approx = (rhs_array(baseline, 0.0, y + dy) - rhs_array(baseline, 0.0, y))[:6] / h
    np.testing.assert_allclose(jac[:, 2], approx, rtol=1e-4, atol=1e-10)
