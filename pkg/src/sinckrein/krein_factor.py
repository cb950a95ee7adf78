"""Lower-triangular factorization of finite sections.

For the section matrix ``A`` we want ``A^{-1} = V^T V`` with ``V`` lower
triangular and a positive diagonal.  Since ``A = L L^T`` (Cholesky),
``V = L^{-1}`` does the job; the same factor is also obtained by an index
reversal of ``A^{-1}``, which is kept as an independent route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import NumericalError
from .finite_section import (
    DEFAULT_ORDER,
    DEFAULT_PANELS_PER_UNIT,
    ResolventField,
    SincSection,
    build_section,
    check_mu,
    resolvent_of_q,
    section_endpoint_values,
)
from .quadrature import QuadratureGrid


@dataclass(frozen=True, eq=False)
class TriangularFactor:
    matrix: np.ndarray
    grid: QuadratureGrid | None = None
    target: str = ""

    def gram(self) -> np.ndarray:
        """``V^T V``, which reproduces the inverse of the factored matrix."""
        return self.matrix.T @ self.matrix


def _chol(A: np.ndarray) -> np.ndarray:
    try:
        return cholesky(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix is not positive definite") from exc


def reverse_cholesky(A, method: str = "inverse", grid=None, target: str = "") -> TriangularFactor:
    """Lower-triangular ``V`` with positive diagonal and ``V^T V = A^{-1}``.

    ``method="inverse"`` inverts the Cholesky factor of ``A``.
    ``method="flip"`` works on ``A^{-1}``: with the exchange permutation
    ``J`` (``J[i, n-1-i] = 1``), factor ``J A^{-1} J = C C^T`` and set
    ``V = J C^T J``.  The factor is unique, so both routes agree.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if method == "inverse":
        L = _chol(A)
        V = solve_triangular(L, np.eye(n), lower=True)
    elif method == "flip":
        L = _chol(A)
        Ainv = solve_triangular(L, np.eye(n), lower=True)
        Ainv = Ainv.T @ Ainv
        C = _chol(Ainv[::-1, ::-1])
        V = C.T[::-1, ::-1].copy()
    else:
        raise ValueError(f"unknown method {method!r}")
    return TriangularFactor(matrix=np.tril(V), grid=grid, target=target)


def is_lower_triangular(matrix, grid: QuadratureGrid | None = None, tol: float = 0.0):
    """Check ``S Q_c = Q_c S Q_c`` at every cut between consecutive nodes.

    ``Q_c`` keeps the nodes at index >= c.  The identity fails at cut ``c``
    exactly when some entry ``S[i, j]`` with ``i < c <= j`` is nonzero.
    Returns ``(ok, worst, first_cut)`` where ``first_cut`` is the position
    of the first violated cut (or ``None``).
    """
    S = np.abs(np.asarray(matrix))
    n = S.shape[0]
    upper = np.triu(S, 1)
    # per cut c: max over rows < c of columns >= c
    col_prefix = np.maximum.accumulate(upper, axis=0)
    per_cut = np.zeros(n)
    for c in range(1, n):
        per_cut[c] = col_prefix[c - 1, c:].max()
    bad = np.nonzero(per_cut > tol)[0]
    worst = float(per_cut.max()) if n else 0.0
    if len(bad) == 0:
        return True, worst, None
    c = int(bad[0])
    if grid is not None:
        pos = 0.5 * (grid.nodes[c - 1] + grid.nodes[c])
    else:
        pos = float(c)
    return False, worst, pos


@dataclass(frozen=True)
class FactorComparison:
    xi: float
    max_rel_error: float
    raw_max_rel_error: float
    max_abs_error: float
    n_pairs: int
    min_separation: float


def factor_kernel_estimate(
    factor: TriangularFactor, grid: QuadratureGrid, endpoint_correction: bool = True
) -> np.ndarray:
    """Kernel samples ``~ R_{s_i}(s_i, s_j)`` for ``i > j`` from the factor.

    Row ``i`` of ``V`` belongs to the truncated rule on nodes ``0..i``, whose
    right end sits ``w_i/2 + d_i`` past ``s_i`` (``d_i`` from
    :meth:`QuadratureGrid.endpoint_offsets`).  Unscaling by
    ``sqrt(w_i w_j)`` absorbs the ``w_i/2`` part; the correction factor
    ``1 - d_i R_ii`` removes the remaining first-order endpoint shift,
    using ``dR_xi/dxi = R(., xi) R(xi, .)`` and ``R_ii = (V_ii^2 - 1)/w_i``.
    """
    V = factor.matrix
    sw = grid.sqrt_weights
    est = np.tril(V, -1) / sw[:, None] / sw[None, :]
    if endpoint_correction:
        Rii = (np.diag(V) ** 2 - 1.0) / grid.weights
        est = est * (1.0 - grid.endpoint_offsets() * Rii)[:, None]
    return est


def factor_vs_resolvent(
    mu: float,
    xi: float,
    panels_per_unit: int = DEFAULT_PANELS_PER_UNIT,
    order: int = DEFAULT_ORDER,
    min_separation: float = 0.5,
) -> FactorComparison:
    """Compare the factor's kernel with independently solved resolvents.

    For each row node ``s_i`` a fresh section on ``[0, s_i]`` is built and
    ``R_{s_i}(s_i, s_j)`` evaluated by Nystrom extension.  Pairs with
    ``s_i - s_j < min_separation`` are skipped.  Errors are relative to the
    largest reference magnitude among the compared pairs.
    """
    section = build_section(mu, xi, panels_per_unit=panels_per_unit, order=order)
    grid = section.grid
    factor = reverse_cholesky(section.matrix, grid=grid, target=f"S_xi, xi={xi}")
    est = factor_kernel_estimate(factor, grid, endpoint_correction=True)
    raw = factor_kernel_estimate(factor, grid, endpoint_correction=False)
    s = grid.nodes
    errs, raw_errs, refs = [], [], []
    for i, si in enumerate(s):
        cols = np.nonzero(si - s[:i] >= min_separation)[0]
        if len(cols) == 0:
            continue
        field = ResolventField(build_section(mu, si, panels_per_unit=panels_per_unit, order=order))
        # R(s_i, s_j) = R(s_j, s_i): a single column solve per row
        ref = field.evaluate(s[cols], si)
        refs.append(ref)
        errs.append(est[i, cols] - ref)
        raw_errs.append(raw[i, cols] - ref)
    if not refs:
        return FactorComparison(float(xi), 0.0, 0.0, 0.0, 0, min_separation)
    refs = np.concatenate(refs)
    errs = np.abs(np.concatenate(errs))
    raw_errs = np.abs(np.concatenate(raw_errs))
    scale = np.abs(refs).max()
    if scale == 0.0:
        scale = 1.0
    return FactorComparison(
        xi=float(xi),
        max_rel_error=float(errs.max() / scale),
        raw_max_rel_error=float(raw_errs.max() / scale),
        max_abs_error=float(errs.max()),
        n_pairs=int(len(refs)),
        min_separation=float(min_separation),
    )


@dataclass(frozen=True, eq=False)
class QPair:
    xs: np.ndarray
    q1: np.ndarray
    q2: np.ndarray

    def product_defect(self) -> float:
        return float(np.max(np.abs(self.q1 * self.q2 - 0.5)))


def q_functions(
    mu: float, x_samples, panels_per_unit: int = DEFAULT_PANELS_PER_UNIT,
    order: int = DEFAULT_ORDER,
) -> QPair:
    """``q1(x) = 1 + int_0^x R_x(x,t) dt`` and ``q2(x) = M(x) + int_0^x M(t) R_x(x,t) dt``.

    Each sample gets its own section on ``[0, x]``.
    """
    mu = check_mu(mu)
    xs = np.asarray(x_samples, dtype=float)
    if np.any(np.diff(xs) <= 0):
        raise ValueError("x_samples must be strictly ascending")
    q1 = np.empty_like(xs)
    q2 = np.empty_like(xs)
    for k, x in enumerate(xs):
        if x == 0.0:
            q1[k], q2[k] = 1.0, 0.5
            continue
        ev = section_endpoint_values(mu, x, panels_per_unit, order)
        q1[k], q2[k] = ev.q1, ev.q2
    return QPair(xs=xs, q1=q1, q2=q2)


@dataclass(frozen=True)
class ExponentialCheck:
    x_max: float
    max_deviation: float
    tail_max: float
    tail_from: float


def krein_exponential_check(mu: float, x_max: float, table=None, tail_from: float = 20.0):
    """Compare ``q1`` with ``exp(int_0^x B)`` along the coefficient ladder.

    ``tail_max`` is the largest ``|int_x^x' B|`` for ``tail_from <= x < x'``
    within the table (a Cauchy test for convergence of the integral).
    """
    from .krein_system import sample_B

    if table is None:
        table = sample_B(mu, float(max(x_max, 2 * tail_from)))
    xs = table.xs
    keep = xs <= x_max + 1e-12
    cum = table.cumulative_integral(xs)
    dev = np.abs(table.q1[keep] - np.exp(cum[keep]))
    tail = cum[xs >= tail_from]
    tail_max = float(tail.max() - tail.min()) if len(tail) else 0.0
    return ExponentialCheck(float(x_max), float(dev.max()), tail_max, float(tail_from))


@dataclass(frozen=True, eq=False)
class ScalarFactorTable:
    xi: np.ndarray
    M: np.ndarray
    M_prime: np.ndarray
    R: np.ndarray
    M_alt: np.ndarray

    @property
    def positive(self) -> bool:
        return bool(np.all(self.M_prime > 0))

    @property
    def alt_defect(self) -> float:
        """Max deviation between the two evaluations of ``M(xi)``."""
        return float(np.max(np.abs(self.M - self.M_alt)))


def gram_of_one(section: SincSection) -> float:
    """``(1, S_xi^{-1} 1)_xi`` on the section's grid."""
    g = section.grid
    return float(np.dot(g.weights, section.solve(np.ones(section.n))))


def gram_of_one_via_q(section: SincSection) -> float:
    """Same quantity through ``S_xi^{-1} 1 = (1 - R_xi - U R_xi) / (1 - mu)``."""
    g = section.grid
    Rq = resolvent_of_q(section)
    return float((section.xi - 2.0 * np.dot(g.weights, Rq)) / (1.0 - section.mu))


def scalar_factor(
    mu: float,
    xi_samples,
    dxi: float = 0.25,
    richardson: bool = False,
    panels_per_unit: int = DEFAULT_PANELS_PER_UNIT,
    order: int = DEFAULT_ORDER,
) -> ScalarFactorTable:
    """``M(xi) = (1, S_xi^{-1} 1)``, its derivative and ``R = sqrt(M')``.

    ``M'`` is a central difference with spacing ``dxi``; ``richardson``
    combines spacings ``dxi`` and ``dxi/2`` to cancel the O(dxi^2) term.
    Non-positive ``M'`` values give ``R = nan`` and ``positive = False``.
    """
    mu = check_mu(mu)
    xi = np.asarray(xi_samples, dtype=float)

    def M_at(x):
        return gram_of_one(build_section(mu, x, panels_per_unit=panels_per_unit, order=order))

    def deriv(x, d):
        return (M_at(x + d) - M_at(x - d)) / (2 * d)

    M = np.empty_like(xi)
    M_alt = np.empty_like(xi)
    Mp = np.empty_like(xi)
    for k, x in enumerate(xi):
        sec = build_section(mu, x, panels_per_unit=panels_per_unit, order=order)
        M[k] = gram_of_one(sec)
        M_alt[k] = gram_of_one_via_q(sec)
        d1 = deriv(x, dxi)
        Mp[k] = (4 * deriv(x, dxi / 2) - d1) / 3 if richardson else d1
    with np.errstate(invalid="ignore"):
        R = np.where(Mp > 0, np.sqrt(np.abs(Mp)), np.nan)
    return ScalarFactorTable(xi=xi, M=M, M_prime=Mp, R=R, M_alt=M_alt)

