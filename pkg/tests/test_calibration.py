import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqihr.calibration import (
    DeathSeries, US_POPULATION_2020, default_params, fit, fit_rmse, load_death_csv,
    model_daily_deaths, moving_average, params_from_text, params_to_text, write_fit_csv,
)
from seqihr.errors import ConfigError, DataError

TRUE_BETA = (0.34, 0.13, 0.17, 0.20)
BREAKS = (75.0, 160.0, 270.0)
TRUE_E0 = 2e-6


def synthetic_series(days=366):
    p = default_params().replace(beta=tuple(zip((0.0,) + BREAKS, TRUE_BETA)))
    return DeathSeries.from_values(model_daily_deaths(p, TRUE_E0, days, US_POPULATION_2020))


def write_csv(path, rows, header="date,deaths"):
    path.write_text(header + "\n" + "".join(f"{d},{v}\n" for d, v in rows), encoding="utf-8")
    return path


def test_default_rates():
    p = default_params()
    assert p.eps_h == 0.8
    assert p.sigma_q / (p.sigma_q + p.r_q) == pytest.approx(0.125, rel=1e-15)
    assert p.mu == pytest.approx(7.37 / 365000, rel=1e-15)
    assert p.pi_birth == p.mu


def test_params_text_roundtrip():
    p = default_params().replace(beta=((0.0, 0.3), (10.0, 0.1)), strict_r=True, nu=1e-4)
    assert params_from_text(params_to_text(p)) == p


def test_params_text_errors():
    with pytest.raises(ConfigError, match="unknown parameter"):
        params_from_text("bogus = 1")
    with pytest.raises(ConfigError, match=":2:"):
        params_from_text("mu = 1\nnu = x")


def test_smoothing_constant():
    np.testing.assert_allclose(moving_average([7] * 7), [7.0])


def test_smoothing_spike():
    np.testing.assert_allclose(moving_average([0, 0, 0, 7, 0, 0, 0]), [1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e4), min_size=8, max_size=60), st.integers(1, 5))
def test_smoothing_shift_equivariant(values, k):
    v = np.array(values)
    if len(v) - k < 7:
        return
    np.testing.assert_allclose(moving_average(v[k:]), moving_average(v)[k:], rtol=1e-12, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10), st.lists(st.floats(0, 1e4), min_size=7, max_size=7))
def test_smoothing_preserves_periodic_mean(reps, period):
    # a 7-periodic series averages to its period mean over every full window
    v = np.tile(period, reps + 1)
    np.testing.assert_allclose(moving_average(v), np.mean(period), rtol=1e-12, atol=1e-9)


def test_load_sorts_and_fills_gaps(tmp_path):
    path = write_csv(tmp_path / "d.csv", [("2020-03-03", 5), ("2020-03-01", 1), ("2020-03-05", 2)])
    series = load_death_csv(path)
    assert series.dates[0] == dt.date(2020, 3, 1) and len(series) == 5
    np.testing.assert_array_equal(series.raw, [1, 0, 5, 0, 2])
    assert series.gaps == (dt.date(2020, 3, 2), dt.date(2020, 3, 4))


def test_duplicate_date_named(tmp_path):
    path = write_csv(tmp_path / "d.csv", [("2020-03-01", 1), ("2020-03-01", 2)])
    with pytest.raises(DataError, match="2020-03-01"):
        load_death_csv(path)


@pytest.mark.parametrize("rows,header,pattern", [
    ([("2020-03-01", -1)], "date,deaths", "negative"),
    ([("2020-13-01", 1)], "date,deaths", "bad ISO date"),
    ([("2020-03-01", "1.5")], "date,deaths", "not an integer"),
    ([("2020-03-01", 1)], "day,count", "expected header"),
])
def test_bad_rows(tmp_path, rows, header, pattern):
    with pytest.raises(DataError, match=pattern):
        load_death_csv(write_csv(tmp_path / "d.csv", rows, header))


def test_missing_file_names_path(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        load_death_csv(tmp_path / "nope.csv")


def test_inverse_crime_recovery():
    series = synthetic_series()
    result = fit(default_params(), series, BREAKS, beta_guess=0.2, e0_guess=1e-6, seed=0)
    fitted = np.array([b for _, b in result.beta_segments])
    np.testing.assert_allclose(fitted, TRUE_BETA, rtol=0.05)
    assert result.e0 == pytest.approx(TRUE_E0, rel=0.2)
    assert result.converged
    assert np.all(np.diff(result.restart_rmse) <= 0)


def test_fit_deterministic():
    series = synthetic_series(200)
    kw = dict(beta_guess=0.25, seed=3, restarts=2, max_evals=300)
    a = fit(default_params(), series, (75.0,), **kw)
    b = fit(default_params(), series, (75.0,), **kw)
    assert a == b


def test_zero_series_drives_beta_down():
    series = DeathSeries.from_values(np.zeros(120))
    result = fit(default_params(), series, (), beta_guess=0.3, restarts=2, max_evals=400)
    assert result.rmse < 1e-2
    assert result.beta_segments[0][1] < 0.3
    p = default_params()
    rmses = [fit_rmse(p.with_beta(b), 1e-6, series, US_POPULATION_2020) for b in (0.3, 0.1, 0.0)]
    assert rmses[0] > rmses[1] > rmses[2]


def test_fit_rejects_bad_breaks():
    with pytest.raises(ConfigError):
        fit(default_params(), synthetic_series(100), (50.0, 40.0))
    with pytest.raises(ConfigError):
        fit(default_params(), synthetic_series(100), (), e0_guess=1.0)


def test_write_fit_csv(tmp_path):
    series = synthetic_series(120)
    result = fit(default_params(), series, (), beta_guess=0.3, restarts=1, max_evals=200)
    write_fit_csv(result, tmp_path / "fit.csv")
    lines = (tmp_path / "fit.csv").read_text().splitlines()
    assert lines[0] == "segment_start,beta" and len(lines) == 2
