import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sinckrein.errors import BranchError, ConfigError, PoleError, StepSizeError
from sinckrein.experiments import pi_quadrature
from sinckrein.finite_section import build_section
from sinckrein.krein_system import (
    G_function,
    band_integral,
    canonical_system,
    hat_pi,
    hat_pi_closed,
    integrate_krein,
    pi_closed,
    sample_B,
    weyl_v,
    w21,
)

upper = st.complex_numbers(max_magnitude=20).filter(lambda z: z.imag > 0.05)


@settings(max_examples=40)
@given(z=upper, mu=st.floats(0.01, 0.95))
def test_pi_closed_matches_quadrature_oracle(z, mu):
    assert abs(pi_closed(mu, z) - pi_quadrature(mu, z)) < 1e-10


def test_pi_closed_at_two_i():
    assert pi_closed(0.5, 2j) == pytest.approx(0.7568573213843416, abs=1e-12)
    assert abs(pi_quadrature(0.5, 2j) - pi_closed(0.5, 2j)) < 1e-6


@given(x=st.floats(-30, 30).filter(lambda x: abs(abs(x) - 2 * np.pi) > 1e-3))
def test_real_axis_band_integral_is_boundary_value(x):
    assert abs(band_integral(x) - band_integral(x + 1e-9j)) < 1e-6


def test_branch_and_pole_errors():
    with pytest.raises(BranchError):
        band_integral(2 * np.pi)
    with pytest.raises(PoleError):
        weyl_v(0.5, 2 * np.pi)
    with pytest.raises(ConfigError):
        band_integral(1 - 1j)


def test_weyl_v_at_zero_is_exact():
    for mu in (0.1, 0.5, 0.9):
        assert weyl_v(mu, 0.0) == 0.5j * (1 - mu)


def test_hat_pi_at_zero():
    C = 1 / np.sqrt(0.5)
    assert 2 * C * abs(hat_pi_closed(0.5, 0.0)) == pytest.approx(0.5, abs=1e-15)


def test_B_table_starts_at_mu():
    t = sample_B(0.3, 2.0)
    assert t.B[0] == 0.3 and t.q1[0] == 1.0
    with pytest.raises(StepSizeError):
        sample_B(0.3, 2.0, ladder_step=0.5)


def test_B_table_matches_direct_section(table_half):
    from sinckrein.finite_section import section_endpoint_values

    ev = section_endpoint_values(0.5, 12.5)
    k = int(np.argmin(np.abs(table_half.xs - 12.5)))
    assert table_half.B[k] == pytest.approx(ev.corner, abs=1e-10)


@pytest.mark.parametrize("z", [0.5, 1.0, 3.0])
def test_conservation_on_real_axis(table_half, z):
    tr = integrate_krein(table_half, z)
    assert np.max(tr.conservation_defect()[1:] / tr.xs[1:]) < 1e-8


def test_integrate_krein_vectorized_matches_scalar(table_half):
    zs = np.array([1j, 1 + 1j])
    many = integrate_krein(table_half, zs, 10.0)
    one = integrate_krein(table_half, 1 + 1j, 10.0)
    assert np.array_equal(many[1].Pstar, one.Pstar)


def test_integrate_krein_guards(table_half):
    with pytest.raises(StepSizeError):
        integrate_krein(table_half, 1.0, 50.0)
    with pytest.raises(StepSizeError):
        integrate_krein(table_half, 1.0, 10.0, step=0.5)
    with pytest.raises(ConfigError):
        integrate_krein(table_half, -1j)
    with pytest.raises(ConfigError):
        integrate_krein(table_half, 1j, init_kind="other")


def test_flipped_sign_gives_reciprocal_of_closed_form(table_half):
    tr = integrate_krein(table_half, 2j, b_sign=-1.0)
    assert abs(tr.Pstar[-1] * pi_closed(0.5, 2j) - 1) < 1e-3


def test_hat_pi_report_shape(table_half):
    rep = hat_pi(0.5, 2j, table=table_half)
    assert rep.x_max == pytest.approx(40.0)
    assert rep.closed == pytest.approx(hat_pi_closed(0.5, 2j))
    assert np.isfinite(rep.difference)


def test_canonical_system_properties(table_half):
    can = canonical_system(table_half, 1.0, 20.0)
    assert can.det_H_max < 5e-4
    assert can.rank_one_residual < 1e-4
    assert np.max(can.transform_residual) < 1e-4


@settings(max_examples=10, deadline=None)
@given(xi=st.floats(1.0, 12.0), z=st.complex_numbers(max_magnitude=5))
def test_w21_two_forms_agree(xi, z):
    rep = w21(build_section(0.5, xi), z)
    assert rep.difference < 1e-8 * max(1.0, abs(rep.resolvent_form))


@pytest.mark.parametrize("xi", [1.0, 10.0, 25.0])
def test_G_at_zero_exact(xi):
    assert G_function(build_section(0.5, xi), 0.0) == pytest.approx(2.0, abs=1e-12)
