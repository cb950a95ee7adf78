import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sinckrein.errors import NumericalError
from sinckrein.finite_section import build_section
from sinckrein.krein_factor import (
    factor_vs_resolvent,
    gram_of_one,
    gram_of_one_via_q,
    is_lower_triangular,
    krein_exponential_check,
    q_functions,
    reverse_cholesky,
    scalar_factor,
)


def test_reverse_cholesky_two_by_two():
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    expected = np.array([[1 / np.sqrt(2), 0.0], [-1 / np.sqrt(6), np.sqrt(2 / 3)]])
    for method in ("inverse", "flip"):
        V = reverse_cholesky(A, method=method).matrix
        assert np.allclose(V, expected, atol=1e-15)


spd_seed = arrays(np.float64, (6, 6), elements=st.floats(-1, 1))


@settings(max_examples=40)
@given(B=spd_seed)
def test_reverse_cholesky_routes_agree(B):
    A = B @ B.T + 6 * np.eye(6)
    V1 = reverse_cholesky(A).matrix
    V2 = reverse_cholesky(A, method="flip").matrix
    assert np.allclose(V1, V2, atol=1e-12)
    assert np.all(np.diag(V1) > 0)
    assert np.allclose(np.triu(V1, 1), 0)
    assert np.allclose(A @ (V1.T @ V1), np.eye(6), atol=1e-12)


def test_reverse_cholesky_rejects_indefinite():
    with pytest.raises(NumericalError):
        reverse_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        reverse_cholesky(np.eye(2), method="qr")


def test_section_factor_reconstructs_inverse():
    sec = build_section(0.5, 10.0)
    V = reverse_cholesky(sec.matrix).matrix
    assert np.max(np.abs(sec.matrix @ (V.T @ V) - np.eye(sec.n))) < 1e-10
    ok, worst, cut = is_lower_triangular(V, sec.grid)
    assert ok and worst == 0.0 and cut is None


def test_triangularity_reports_first_cut():
    M = np.tril(np.ones((5, 5)))
    M[1, 3] = 1e-3
    ok, worst, cut = is_lower_triangular(M)
    assert not ok and worst == pytest.approx(1e-3) and cut == 2.0
    assert is_lower_triangular(M, tol=1e-2)[0]


def test_factor_kernel_matches_resolvent_and_improves():
    c2 = factor_vs_resolvent(0.5, 4.0, panels_per_unit=2)
    c4 = factor_vs_resolvent(0.5, 4.0, panels_per_unit=4)
    assert c2.max_rel_error < 1e-3
    assert c4.max_rel_error < c2.max_rel_error
    # the endpoint correction is what buys the second order
    assert c2.max_rel_error < c2.raw_max_rel_error


def test_q_functions_product_and_limit():
    qp = q_functions(0.5, [0.0, 1.0, 5.0, 30.0])
    assert qp.product_defect() < 1e-10
    assert qp.q1[-1] == pytest.approx(np.sqrt(2), abs=1e-2)
    with pytest.raises(ValueError):
        q_functions(0.5, [2.0, 1.0])


def test_gram_of_one_two_routes():
    sec = build_section(0.5, 8.0)
    assert gram_of_one(sec) == pytest.approx(gram_of_one_via_q(sec), abs=1e-11)


def test_scalar_factor_table_positive_and_matches_q1_squared():
    th = scalar_factor(0.5, [1.0, 5.0, 10.0], richardson=True)
    assert th.positive
    assert th.alt_defect < 1e-10
    # d/dxi (1, S^-1 1) = q1(xi)^2 is an independent oracle for M'
    q1 = q_functions(0.5, th.xi).q1
    assert np.allclose(th.M_prime, q1**2, atol=2e-3)


def test_exponential_of_B_integral(table_half):
    chk = krein_exponential_check(0.5, 20.0, table=table_half)
    assert chk.max_deviation < 1e-4
    assert 0 < chk.tail_max < 0.05
