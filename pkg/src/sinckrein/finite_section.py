"""Finite sections of ``S = I - mu * (sinc convolution)`` on [0, xi].

The operator is discretized by the symmetrized Nystrom rule

    A_ij = delta_ij - mu * sqrt(w_i) * h(s_i - s_j) * sqrt(w_j),

so that ``S_xi f = g`` becomes ``A (W^{1/2} f) = W^{1/2} g``.  Kernel values
of the resolvent ``R_xi`` (``S_xi^{-1} = I + R_xi``) are recovered by
unscaling, and off the nodes by Nystrom extension.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import ConfigError, DimensionMismatch, NumericalError
from .quadrature import (
    DEFAULT_ORDER,
    DEFAULT_PANELS_PER_UNIT,
    QuadratureGrid,
    composite_grid,
    sinc_kernel,
    sine_integral_over_pi,
)

log = logging.getLogger(__name__)


def check_mu(mu: float, *, allow_zero: bool = True) -> float:
    """Validate the coupling; ``mu = 0`` is the degenerate test case."""
    mu = float(mu)
    lo_ok = mu >= 0 if allow_zero else mu > 0
    if not (lo_ok and mu < 1):
        raise ConfigError(f"coupling must satisfy 0 < mu < 1, got mu={mu}")
    return mu


def section_matrix(mu: float, grid: QuadratureGrid) -> np.ndarray:
    sw = grid.sqrt_weights
    s = grid.nodes
    K = sw[:, None] * sinc_kernel(s[:, None] - s[None, :]) * sw[None, :]
    return np.eye(len(s)) - mu * K


@dataclass(frozen=True, eq=False)
class SincSection:
    """Symmetrized Nystrom matrix of ``S_xi`` with its Cholesky factor."""

    mu: float
    grid: QuadratureGrid
    matrix: np.ndarray
    chol: np.ndarray

    @property
    def xi(self) -> float:
        return self.grid.xi

    @property
    def n(self) -> int:
        return len(self.grid)

    def _check(self, f) -> np.ndarray:
        f = np.asarray(f)
        if f.shape[0] != self.n:
            raise DimensionMismatch(f"expected {self.n} node samples, got {f.shape[0]}")
        return f

    def solve_scaled(self, b) -> np.ndarray:
        return cho_solve((self.chol, True), b)

    def apply(self, f) -> np.ndarray:
        """Node samples of ``S_xi f``."""
        f = self._check(f)
        sw = self.grid.sqrt_weights
        sw_ = sw.reshape((-1,) + (1,) * (f.ndim - 1))
        return (self.matrix @ (sw_ * f)) / sw_

    def solve(self, g) -> np.ndarray:
        """Node samples of ``S_xi^{-1} g``."""
        g = self._check(g)
        sw = self.grid.sqrt_weights.reshape((-1,) + (1,) * (g.ndim - 1))
        return self.solve_scaled(sw * g) / sw

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def build_section(
    mu: float,
    xi: float | None = None,
    *,
    grid: QuadratureGrid | None = None,
    panels_per_unit: int = DEFAULT_PANELS_PER_UNIT,
    order: int = DEFAULT_ORDER,
) -> SincSection:
    """Assemble ``S_xi`` and factor it.

    Either ``xi`` (a uniform composite grid is built) or an explicit
    ``grid`` must be given.  ``mu = 0`` is accepted and yields the identity.
    """
    mu = check_mu(mu)
    if grid is None:
        if xi is None:
            raise ConfigError("build_section needs xi or grid")
        grid = composite_grid(xi, panels_per_unit, order)
    A = section_matrix(mu, grid)
    try:
        L = cholesky(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"section matrix not positive definite (mu={mu}, xi={grid.xi}); "
            "refine the grid"
        ) from exc
    return SincSection(mu=mu, grid=grid, matrix=A, chol=L)


def apply_inverse(section: SincSection, f) -> np.ndarray:
    return section.solve(f)


class ResolventField:
    """Resolvent kernel ``R_xi(x, t, mu)`` of a section.

    ``values[i, j]`` approximates ``R_xi(s_i, s_j)``; :meth:`evaluate`
    extends to arbitrary points through

        R(x, t) = mu h(x - t) + mu * sum_j w_j h(x - s_j) R(s_j, t).
    """

    def __init__(self, section: SincSection):
        self.section = section
        self._mu = section.mu

    @property
    def mu(self) -> float:
        return self._mu

    @cached_property
    def values(self) -> np.ndarray:
        sec = self.section
        sw = sec.grid.sqrt_weights
        # weight-scaled resolvent solves A Rt = mu K = I - A
        Rt = sec.solve_scaled(np.eye(sec.n) - sec.matrix)
        return Rt / sw[:, None] / sw[None, :]

    def columns(self, t) -> np.ndarray:
        """Node samples ``R(s_i, t_k)``, one column per target ``t_k``."""
        sec = self.section
        s = sec.grid.nodes
        sw = sec.grid.sqrt_weights
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rhs = self._mu * sw[:, None] * sinc_kernel(s[:, None] - t[None, :])
        return sec.solve_scaled(rhs) / sw[:, None]

    def extend(self, x, t, cols) -> np.ndarray:
        """Nystrom extension at points ``x`` for the targets behind ``cols``."""
        g = self.section.grid
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        H = sinc_kernel(x[:, None] - g.nodes[None, :]) * g.weights[None, :]
        return self._mu * (sinc_kernel(x - t) + np.einsum("kj,jk->k", H, cols))

    def evaluate(self, x, t):
        """``R_xi(x, t)`` at arbitrary points of [0, xi]^2 (broadcast)."""
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        shape = x.shape
        xf, tf = x.ravel(), t.ravel()
        uniq, inv = np.unique(tf, return_inverse=True)
        cols = self.columns(uniq)
        out = self.extend(xf, tf, cols[:, inv])
        out = out.reshape(shape)
        return out if out.ndim else float(out)


def resolvent_kernel(section: SincSection) -> ResolventField:
    return ResolventField(section)


def M_function(x, mu: float):
    """``1/2 - mu * int_0^x sinc(s) ds``."""
    return 0.5 - mu * np.asarray(sine_integral_over_pi(x))


def q_remainder(x, mu: float):
    """``M(x) - (1 - mu)/2``, which decays like ``1/x``."""
    return M_function(x, mu) - (1.0 - mu) / 2


def resolvent_of_q(section: SincSection) -> np.ndarray:
    """Node samples of ``S_xi^{-1} q``."""
    q = q_remainder(section.grid.nodes, section.mu)
    return section.solve(q)


def s_one_identity(section: SincSection) -> float:
    """Max deviation of ``S_xi 1`` from ``M(x) + M(xi - x)`` on the nodes."""
    s = section.grid.nodes
    lhs = section.apply(np.ones_like(s))
    rhs = M_function(s, section.mu) + M_function(section.xi - s, section.mu)
    return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class EndpointValues:
    """Resolvent data of the section [0, xi] read off at its right end.

    ``diag`` is ``R_xi(xi, xi)``, ``corner`` is ``R_xi(xi, 0)``,
    ``q1 = 1 + int R_xi(xi, t) dt`` and ``q2 = M(xi) + int M(t) R_xi(xi, t) dt``.
    """

    xi: float
    diag: float
    corner: float
    q1: float
    q2: float


def _endpoint_from_column(mu, grid: QuadratureGrid, col: np.ndarray, Mnodes) -> EndpointValues:
    xi = grid.xi
    s, w = grid.nodes, grid.weights
    wc = w * col
    diag = mu * (1.0 + np.dot(sinc_kernel(xi - s), wc))
    corner = mu * (sinc_kernel(xi) + np.dot(sinc_kernel(s), wc))
    q1 = 1.0 + wc.sum()
    q2 = float(M_function(xi, mu)) + np.dot(Mnodes, wc)
    return EndpointValues(float(xi), float(diag), float(corner), float(q1), float(q2))


def endpoint_values(section: SincSection) -> EndpointValues:
    col = ResolventField(section).columns([section.xi])[:, 0]
    return _endpoint_from_column(
        section.mu, section.grid, col, M_function(section.grid.nodes, section.mu)
    )


class IncrementalSection:
    """Sections on a fixed panel ladder, grown one panel at a time.

    The ladder grid fixes every node in advance, so the section on
    ``[0, b_k]`` is the leading principal block of the largest one.  Its
    Cholesky factor is extended by bordering::

        L21 = A21 L11^{-T},   L22 L22^T = A22 - L21 L21^T

    which costs O(N^3) for the whole ladder instead of refactoring every
    section from scratch.
    """

    def __init__(self, mu: float, grid: QuadratureGrid):
        self.mu = check_mu(mu)
        self.grid = grid
        n = len(grid)
        self._L = np.zeros((n, n))
        self._sw = grid.sqrt_weights
        self._M = M_function(grid.nodes, self.mu)
        self.n_panels = 0

    @property
    def size(self) -> int:
        return self.n_panels * self.grid.order

    @property
    def xi(self) -> float:
        return float(self.grid.panel_boundaries[self.n_panels])

    def _block(self, rows: slice, cols: slice) -> np.ndarray:
        s, sw = self.grid.nodes, self._sw
        K = sw[rows, None] * sinc_kernel(s[rows, None] - s[None, cols]) * sw[None, cols]
        return -self.mu * K

    def grow(self) -> None:
        if self.n_panels >= self.grid.n_panels:
            raise ConfigError("ladder exhausted")
        n, k = self.size, self.grid.order
        new = slice(n, n + k)
        A22 = self._block(new, new) + np.eye(k)
        if n:
            A21 = self._block(new, slice(0, n))
            L21 = solve_triangular(self._L[:n, :n], A21.T, lower=True, check_finite=False).T
            self._L[new, :n] = L21
            A22 = A22 - L21 @ L21.T
        try:
            self._L[new, new] = cholesky(A22, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"bordered Cholesky failed at xi={self.grid.panel_boundaries[self.n_panels + 1]}"
            ) from exc
        self.n_panels += 1

    @property
    def chol(self) -> np.ndarray:
        n = self.size
        return self._L[:n, :n]

    def section(self) -> SincSection:
        g = self.grid.truncated(self.n_panels)
        return SincSection(
            mu=self.mu, grid=g, matrix=section_matrix(self.mu, g), chol=self.chol.copy()
        )

    def endpoint_values(self) -> EndpointValues:
        n = self.size
        s, sw = self.grid.nodes[:n], self._sw[:n]
        rhs = self.mu * sw * sinc_kernel(s - self.xi)
        L = self._L[:n, :n]
        y = solve_triangular(L, rhs, lower=True, check_finite=False)
        col = solve_triangular(L.T, y, lower=False, check_finite=False) / sw
        return _endpoint_from_column(self.mu, self.grid.truncated(self.n_panels), col, self._M[:n])

    def ladder(self) -> Iterator[EndpointValues]:
        """Grow through every remaining panel, yielding endpoint data."""
        while self.n_panels < self.grid.n_panels:
            self.grow()
            yield self.endpoint_values()


def ladder_endpoint_values(
    mu: float, x_max: float, panels_per_unit: int, order: int
) -> list[EndpointValues]:
    """Endpoint data at every panel boundary of [0, x_max] (incremental)."""
    grid = composite_grid(x_max, panels_per_unit, order)
    builder = IncrementalSection(mu, grid)
    log.debug("incremental ladder: %d nodes, %d panels", len(grid), grid.n_panels)
    return list(builder.ladder())


def section_endpoint_values(
    mu: float, xi: float, panels_per_unit: int = DEFAULT_PANELS_PER_UNIT,
    order: int = DEFAULT_ORDER,
) -> EndpointValues:
    return endpoint_values(build_section(mu, xi, panels_per_unit=panels_per_unit, order=order))
