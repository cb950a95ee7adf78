import numpy as np
import pytest
from hypothesis import given, strategies as st

from sinckrein.asymptotics import (
    asymptotics_report,
    corner_envelope,
    diagonal_limit_report,
    local_maxima,
    painleve_constants,
    tw_ode_residual,
    uniform_grid,
)
from sinckrein.errors import ConfigError


def test_painleve_constants_half():
    a, b = painleve_constants(0.5)
    assert a == pytest.approx(-0.2206356001526516, abs=1e-15)
    assert b == pytest.approx(a * a / 2, rel=1e-15)


@given(mu=st.floats(1e-9, 1 - 1e-9))
def test_painleve_constants_relation(mu):
    a, b = painleve_constants(mu)
    assert a < 0 and b == pytest.approx(a * a / 2)


def test_painleve_constants_small_mu_and_domain():
    assert abs(painleve_constants(1e-8)[0]) < 1e-8
    for bad in (0.0, 1.0, -0.5):
        with pytest.raises(ConfigError):
            painleve_constants(bad)


def test_local_maxima_parabolic_refinement():
    t = np.linspace(0, 10, 201)
    tp, yv = local_maxima(t, np.sin(t))
    assert np.allclose(tp, [np.pi / 2, 5 * np.pi / 2], atol=1e-4)
    assert np.allclose(yv, 1.0, atol=1e-6)


def test_tw_ode_short_range_and_dt_guard():
    t = uniform_grid(2.0, 3.0, 0.05)
    assert tw_ode_residual(0.5, t, 0.05) < 1e-3
    with pytest.raises(ValueError):
        tw_ode_residual(0.5, t, 0.2)


def test_ode_residual_is_second_order():
    t = uniform_grid(3.0, 4.0, 0.05)
    r1 = tw_ode_residual(0.5, t, 0.05)
    r2 = tw_ode_residual(0.5, t, 0.025)
    assert r2 < 0.3 * r1


def test_mu_zero_gives_zero_corner_values():
    rep = asymptotics_report(0.0, [2.0, 3.0], 0.05)
    assert np.all(rep.diag == 0) and np.all(rep.corner == 0)


def test_diagonal_limit_correction_helps():
    rep = diagonal_limit_report(0.5, [8.0, 10.0, 12.0])
    assert np.all(rep.raw_deviation < 1e-2)
    assert np.all(rep.corrected_deviation < rep.raw_deviation)
    with pytest.raises(ValueError):
        diagonal_limit_report(0.5, [1.0])


def test_corrected_deviation_envelope_shrinks():
    t = np.arange(4.0, 16.01, 0.05)
    rep = diagonal_limit_report(0.5, t)
    _, peaks = local_maxima(rep.t, rep.corrected_deviation)
    upper = np.maximum.accumulate(peaks[::-1])[::-1]
    assert np.all(np.diff(upper) <= 0)
    assert peaks[-1] < peaks[0]


def test_sigma_roundtrip_at_ten():
    rep = asymptotics_report(0.5, [10.0], 0.05)
    assert abs(rep.sigma[0] / (2 * np.pi * 10.0) - rep.a) <= 0.02


def test_corner_envelope_small_mu():
    env = corner_envelope(0.1, 10.0, 20.0)
    assert np.all(np.abs(env.peak_heights / abs(env.a) - 1) < 0.2)
    assert np.all(np.abs(env.zero_spacings - 1) < 0.05)
    assert env.first_extremum_sign in (-1, 1)
