"""Krein and canonical systems driven by the measured coefficient B(x).

``B(x) = R_x(x, 0, mu)`` is sampled on a panel ladder by the incremental
section builder and interpolated by a cubic spline.  The systems are then
integrated by fixed-step classical RK4, which keeps runs reproducible.
Closed forms for the limit function, the Weyl function and the hat limit
live next to the integrators so both sides of each identity are at hand.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline

from .errors import BranchError, ConfigError, PoleError, StepSizeError
from .finite_section import (
    IncrementalSection,
    SincSection,
    check_mu,
    resolvent_of_q,
)
from .quadrature import composite_grid

log = logging.getLogger(__name__)

DEFAULT_LADDER_STEP = 0.125
DEFAULT_LADDER_ORDER = 6
TWO_PI = 2 * np.pi


@dataclass(frozen=True, eq=False)
class KreinCoefficientTable:
    """Ladder samples of ``B(x) = R_x(x, 0)`` and companions.

    ``diag``, ``q1`` and ``q2`` come out of the same column solve as ``B``
    and are kept so the canonical system and the factor checks can reuse
    the ladder.
    """

    mu: float
    xs: np.ndarray
    B: np.ndarray
    diag: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    ladder_step: float
    order: int
    _splines: dict = field(default_factory=dict, repr=False)

    @property
    def x_max(self) -> float:
        return float(self.xs[-1])

    def spline(self, name: str = "B", degree: int = 3):
        """Interpolating spline through the ladder samples of ``name``."""
        key = (name, degree)
        if key not in self._splines:
            if degree == 3:
                sp = CubicSpline(self.xs, getattr(self, name))
            else:
                sp = make_interp_spline(self.xs, getattr(self, name), k=degree)
            self._splines[key] = sp
        return self._splines[key]

    def B_at(self, x):
        return self.spline("B")(x)

    def cumulative_integral(self, x):
        """``int_0^x B(t) dt`` of the interpolant."""
        sp = self.spline("B")
        return sp.antiderivative()(x) - sp.antiderivative()(0.0)


@lru_cache(maxsize=16)
def sample_B(
    mu: float,
    x_max: float,
    ladder_step: float = DEFAULT_LADDER_STEP,
    order: int = DEFAULT_LADDER_ORDER,
) -> KreinCoefficientTable:
    """Tabulate ``B`` on the ladder ``0, step, 2 step, ..., x_max``.

    Panels of width ``ladder_step`` carry ``order`` Gauss nodes each; the
    section on every ladder point is grown from the previous one.
    """
    mu = check_mu(mu)
    if ladder_step > 0.25:
        raise StepSizeError(
            f"ladder_step={ladder_step} cannot resolve the period-2 oscillation; use <= 0.25"
        )
    ppu = round(1.0 / ladder_step)
    if abs(ppu * ladder_step - 1.0) > 1e-12:
        raise ConfigError(f"ladder_step must be 1/n for an integer n, got {ladder_step}")
    grid = composite_grid(x_max, ppu, order)
    builder = IncrementalSection(mu, grid)
    rows = [(0.0, mu, mu, 1.0, 0.5)]
    for ev in builder.ladder():
        rows.append((ev.xi, ev.corner, ev.diag, ev.q1, ev.q2))
    xs, B, diag, q1, q2 = (np.array(c) for c in zip(*rows))
    for arr in (xs, B, diag, q1, q2):
        arr.setflags(write=False)
    log.info("sampled B on %d ladder points up to x=%g (mu=%g)", len(xs), xs[-1], mu)
    return KreinCoefficientTable(
        mu=mu, xs=xs, B=B, diag=diag, q1=q1, q2=q2,
        ladder_step=float(ladder_step), order=int(order),
    )


@dataclass(frozen=True, eq=False)
class KreinTrajectory:
    z: complex
    xs: np.ndarray
    P: np.ndarray
    Pstar: np.ndarray
    init_kind: str
    b_sign: float = 1.0

    def conservation_defect(self) -> np.ndarray:
        """``|P|^2 - |P*|^2`` minus its initial value, per sample."""
        d = np.abs(self.P) ** 2 - np.abs(self.Pstar) ** 2
        return d - d[0]


_INITS = {"standard": (1.0, 1.0), "hat": (0.5, -0.5)}


def default_step(table: KreinCoefficientTable) -> float:
    return min(0.02, table.ladder_step / 4)


def _rk4_krein(Bfun, z: np.ndarray, p0, s0, x_max: float, h: float, b_sign: float):
    n = int(round(x_max / h))
    if abs(n * h - x_max) > 1e-9 * max(1.0, x_max):
        raise StepSizeError(f"step {h} does not divide x_max={x_max}")
    xs = np.arange(n + 1) * h
    Bk = b_sign * Bfun(xs)
    Bm = b_sign * Bfun(xs[:-1] + h / 2)
    iz2 = 1j * z / 2
    P = np.empty((n + 1,) + z.shape, complex)
    S = np.empty_like(P)
    P[0], S[0] = p0, s0
    p, s = P[0].copy(), S[0].copy()
    for k in range(n):
        b0, b1, b2 = Bk[k], Bm[k], Bk[k + 1]
        k1p = iz2 * p - b0 * s
        k1s = -b0 * p
        pp, ss = p + h / 2 * k1p, s + h / 2 * k1s
        k2p = iz2 * pp - b1 * ss
        k2s = -b1 * pp
        pp, ss = p + h / 2 * k2p, s + h / 2 * k2s
        k3p = iz2 * pp - b1 * ss
        k3s = -b1 * pp
        pp, ss = p + h * k3p, s + h * k3s
        k4p = iz2 * pp - b2 * ss
        k4s = -b2 * pp
        p = p + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        s = s + h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s)
        P[k + 1], S[k + 1] = p, s
    return xs, P, S


def integrate_krein(
    table: KreinCoefficientTable,
    z,
    x_max: float | None = None,
    init_kind: str = "standard",
    step: float | None = None,
    b_sign: float = 1.0,
):
    """Integrate ``P' = (iz/2) P - B P*,  P*' = -B P`` from x = 0.

    ``z`` may be a scalar or an array (one trajectory per entry, returned
    as a list).  ``b_sign=-1`` flips the coefficient, which is the other
    common sign convention for this system.
    """
    if init_kind not in _INITS:
        raise ConfigError(f"init_kind must be one of {sorted(_INITS)}")
    x_max = table.x_max if x_max is None else float(x_max)
    if x_max > table.x_max + 1e-12:
        raise StepSizeError(f"x_max={x_max} exceeds the coefficient table ({table.x_max})")
    limit = default_step(table)
    h = limit if step is None else float(step)
    if h > limit + 1e-15:
        raise StepSizeError(f"step {h} too coarse for ladder_step {table.ladder_step}")
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z_arr.imag < 0):
        raise ConfigError("spectral parameter must satisfy Im z >= 0")
    p0, s0 = _INITS[init_kind]
    xs, P, S = _rk4_krein(table.B_at, z_arr, p0, s0, x_max, h, b_sign)
    xs.setflags(write=False)
    trajs = [
        KreinTrajectory(complex(zk), xs, P[:, k], S[:, k], init_kind, b_sign)
        for k, zk in enumerate(z_arr)
    ]
    return trajs[0] if np.ndim(z) == 0 else trajs


def band_integral(z) -> complex:
    """``int_{-pi}^{pi} dt / (t - z/2)`` for ``Im z >= 0``.

    On the real axis this is the boundary value from above,
    ``log|(2pi - x)/(2pi + x)| + i pi chi(x)``.
    """
    z = complex(z)
    if z.imag < 0:
        raise ConfigError("band integral is defined for Im z >= 0")
    if z.imag == 0:
        x = z.real
        if abs(abs(x) - TWO_PI) < 1e-14 * TWO_PI:
            raise BranchError(f"z={x} is a branch point (|x| = 2 pi)")
        chi = 1.0 if abs(x) < TWO_PI else 0.0
        return complex(np.log(abs((TWO_PI - x) / (TWO_PI + x))), np.pi * chi)
    lam = z / 2
    return complex(np.log(np.pi - lam) - np.log(-np.pi - lam))


def pi_closed(mu: float, z) -> complex:
    """``exp[(1/(2 pi i)) * log(1 - mu) * int_{-pi}^{pi} dt / (t - z/2)]``."""
    mu = check_mu(mu)
    return complex(np.exp(np.log1p(-mu) / (2j * np.pi) * band_integral(z)))


def weyl_v(mu: float, z, rational_term: bool = True) -> complex:
    """Weyl-Titchmarsh function built from the two-level spectral density.

    The density integral reduces to ``i/2 - (mu / 2 pi) * band_integral``;
    ``rational_term`` adds ``2 z mu / (4 pi^2 - z^2)``.
    """
    mu = check_mu(mu)
    z = complex(z)
    if abs(z - TWO_PI) < 1e-12 or abs(z + TWO_PI) < 1e-12:
        raise PoleError(f"v has a pole at z={z}")
    v = 0.5j - mu / TWO_PI * band_integral(z)
    if rational_term:
        v += 2 * z * mu / (TWO_PI**2 - z * z)
    return complex(v)


@dataclass(frozen=True)
class HatPiReport:
    z: complex
    closed: complex
    ode: complex
    hat_P_end: float
    x_max: float

    @property
    def difference(self) -> float:
        return abs(self.ode - self.closed)


def hat_pi_closed(mu: float, z) -> complex:
    return 1j * weyl_v(mu, z) * pi_closed(mu, z)


def hat_pi(mu: float, z, table: KreinCoefficientTable | None = None,
           x_max: float | None = None) -> HatPiReport:
    """``i v(z) Pi(z)`` next to the large-x value of the hat solution."""
    if table is None:
        table = sample_B(mu, 40.0 if x_max is None else x_max)
    tr = integrate_krein(table, z, x_max, init_kind="hat")
    return HatPiReport(
        z=complex(z),
        closed=hat_pi_closed(mu, z),
        ode=complex(tr.Pstar[-1]),
        hat_P_end=float(abs(tr.P[-1])),
        x_max=float(tr.xs[-1]),
    )


J = np.array([[0.0, 1.0], [1.0, 0.0]])
P_RANK1 = np.array([[1.0, 0.0], [0.0, 0.0]])
j_SIGN = np.array([[1.0, 0.0], [0.0, -1.0]])


def T_matrix(q1, q2) -> np.ndarray:
    q1, q2 = np.broadcast_arrays(np.asarray(q1, float), np.asarray(q2, float))
    return np.stack([np.stack([q2, -q2], -1), np.stack([q1, q1], -1)], -2)


def T_inverse(q1, q2) -> np.ndarray:
    """Inverse of :func:`T_matrix` for ``det T = 2 q1 q2``."""
    q1, q2 = np.broadcast_arrays(np.asarray(q1, float), np.asarray(q2, float))
    det = 2 * q1 * q2
    inv = np.stack([np.stack([q1, q2], -1), np.stack([-q1, q2], -1)], -2)
    return inv / det[..., None, None]


def hamiltonian(q1, q2) -> np.ndarray:
    q1, q2 = np.broadcast_arrays(np.asarray(q1, float), np.asarray(q2, float))
    half = np.full_like(q1, 0.5)
    return np.stack([np.stack([q1**2, half], -1), np.stack([half, q2**2], -1)], -2)


@dataclass(frozen=True, eq=False)
class CanonicalTrajectory:
    z: complex
    xs: np.ndarray
    W: np.ndarray
    H_samples: np.ndarray
    V: np.ndarray
    transform_residual: float
    det_H_max: float
    rank_one_residual: float


def canonical_system(
    table: KreinCoefficientTable,
    z,
    x_max: float | None = None,
    step: float | None = None,
    degree: int = 7,
) -> CanonicalTrajectory:
    """Integrate ``W' = i z J H(x) W`` and check the transformed system.

    ``V = exp(-ixz/2) T(x)^{-1} W T(0)`` should satisfy
    ``V' = (iz/2) j V - Q(x) V`` with ``Q = [[0, B], [B, 0]]``.  ``V'`` is
    formed exactly from the right-hand side of the W equation and the
    spline derivative of ``T^{-1}``, so the residual measures how well the
    tabulated q1, q2 and B fit together.  It is reported per sample relative
    to ``1 + max|V(x)|`` (V grows exponentially when Im z > 0).  The coefficient functions are
    interpolated with degree ``degree`` splines: their derivatives enter
    the check, and cubic end effects near x = 0 dominate otherwise.
    """
    z = complex(z)
    x_max = table.x_max if x_max is None else float(x_max)
    if x_max > table.x_max + 1e-12:
        raise StepSizeError(f"x_max={x_max} exceeds the coefficient table ({table.x_max})")
    h = default_step(table) if step is None else float(step)
    n = int(round(x_max / h))
    xs = np.arange(n + 1) * h
    s1, s2 = table.spline("q1", degree), table.spline("q2", degree)

    def JH(x):
        return J @ hamiltonian(s1(x), s2(x))

    W = np.empty((n + 1, 2, 2), complex)
    W[0] = np.eye(2)
    JH0 = JH(xs)
    JHm = JH(xs[:-1] + h / 2)
    c = 1j * z
    w = W[0].copy()
    for k in range(n):
        k1 = c * JH0[k] @ w
        k2 = c * JHm[k] @ (w + h / 2 * k1)
        k3 = c * JHm[k] @ (w + h / 2 * k2)
        k4 = c * JH0[k + 1] @ (w + h * k3)
        w = w + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        W[k + 1] = w

    q1, q2 = s1(xs), s2(xs)
    dq1, dq2 = s1(xs, 1), s2(xs, 1)
    T0 = T_matrix(1.0, 0.5)
    Tinv = T_inverse(q1, q2)
    phase = np.exp(-0.5j * z * xs)[:, None, None]
    V = phase * (Tinv @ W @ T0)

    det = 2 * q1 * q2
    ddet = 2 * (dq1 * q2 + q1 * dq2)
    adj = np.stack([np.stack([q1, q2], -1), np.stack([-q1, q2], -1)], -2)
    dadj = np.stack([np.stack([dq1, dq2], -1), np.stack([-dq1, dq2], -1)], -2)
    dTinv = dadj / det[:, None, None] - adj * (ddet / det**2)[:, None, None]
    dV = phase * ((-0.5j * z) * Tinv @ W + dTinv @ W + Tinv @ (c * JH0 @ W)) @ T0
    Bx = table.spline("B", degree)(xs)
    Q = np.zeros((n + 1, 2, 2))
    Q[:, 0, 1] = Q[:, 1, 0] = Bx
    rhs = (0.5j * z) * j_SIGN @ V - Q @ V
    err = np.abs(dV - rhs).max(axis=(1, 2))
    transform_residual = float(np.max(err / (1.0 + np.abs(V).max(axis=(1, 2)))))

    H = hamiltonian(q1, q2)
    det_H = np.abs(np.linalg.det(H))
    T = T_matrix(q1, q2)
    rank_one = np.max(np.abs(J @ H - T @ P_RANK1 @ Tinv))
    return CanonicalTrajectory(
        z=z, xs=xs, W=W, H_samples=H, V=V,
        transform_residual=transform_residual,
        det_H_max=float(det_H.max()),
        rank_one_residual=float(rank_one),
    )


@dataclass(frozen=True)
class W21Report:
    xi: float
    z: complex
    resolvent_form: complex
    direct_form: complex
    phase_convention: str = "exp(i z xi) * i z * int exp(-i z x) (S^-1 1)(x) dx"

    @property
    def difference(self) -> float:
        return abs(self.resolvent_form - self.direct_form)


def G_function(section: SincSection, z, R_q: np.ndarray | None = None) -> complex:
    """``(1/(1-mu)) [1 - i z int_0^xi exp(-izx) R_xi(x) dx]``."""
    z = complex(z)
    if R_q is None:
        R_q = resolvent_of_q(section)
    g = section.grid
    integral = np.dot(g.weights, np.exp(-1j * z * g.nodes) * R_q)
    return complex((1.0 - 1j * z * integral) / (1.0 - section.mu))


def w21(section: SincSection, z) -> W21Report:
    """Entry ``w_21(xi, z)`` of the canonical solution, computed two ways.

    The resolvent form uses ``R_xi = S_xi^{-1} q``; the direct form integrates
    ``S_xi^{-1} 1`` against ``exp(-izx)``.  Both come from one factorization.
    """
    z = complex(z)
    xi = section.xi
    R_q = resolvent_of_q(section)
    resolvent = np.exp(1j * z * xi) * G_function(section, z, R_q) - np.conj(
        G_function(section, np.conj(z), R_q)
    )
    g = section.grid
    u = section.solve(np.ones(section.n))
    direct = np.exp(1j * z * xi) * 1j * z * np.dot(g.weights, np.exp(-1j * z * g.nodes) * u)
    return W21Report(xi=float(xi), z=z, resolvent_form=complex(resolvent), direct_form=complex(direct))

