"""Large-interval behaviour of the sine-kernel resolvent.

On the symmetric interval (-t, t) the corner values are

    diag(t)   = Q_t(t, t)  = R_{2t}(2t, 2t)
    corner(t) = Q_t(-t, t) = R_{2t}(2t, 0)

and ``sigma(x) = -2 t diag(t)`` with ``x = 2 pi t``.  This module checks
the ODE ``d diag/dt = 2 corner^2``, the limit ``diag -> -log(1 - mu)`` with
its ``1/t`` correction, and the ``a/t`` envelope and unit zero spacing of
``B(t) = R_t(t, 0)``.  Phase constants of the oscillation are never fitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .finite_section import (
    DEFAULT_ORDER,
    DEFAULT_PANELS_PER_UNIT,
    ResolventField,
    build_section,
    check_mu,
    section_endpoint_values,
)


def painleve_constants(mu: float) -> tuple[float, float]:
    """``a = log(1 - mu)/pi`` and ``b = a^2/2``."""
    mu = check_mu(mu, allow_zero=False)
    a = np.log1p(-mu) / np.pi
    return float(a), float(0.5 * a * a)


def corner_values(
    mu: float, t: float, panels_per_unit: int = DEFAULT_PANELS_PER_UNIT,
    order: int = DEFAULT_ORDER,
) -> tuple[float, float]:
    """``(R_{2t}(2t, 2t), R_{2t}(2t, 0))`` via the resolvent field probes."""
    field = ResolventField(build_section(mu, 2 * t, panels_per_unit=panels_per_unit, order=order))
    d, c = field.evaluate([2 * t, 2 * t], [2 * t, 0.0])
    return float(d), float(c)


def _key(t: float) -> float:
    return round(float(t), 12)


def corner_table(mu, ts, panels_per_unit=DEFAULT_PANELS_PER_UNIT, order=DEFAULT_ORDER) -> dict:
    out = {}
    for t in ts:
        k = _key(t)
        if k not in out:
            out[k] = corner_values(mu, k, panels_per_unit, order)
    return out


@dataclass(frozen=True, eq=False)
class AsymptoticsReport:
    mu: float
    t_grid: np.ndarray
    diag: np.ndarray
    corner: np.ndarray
    sigma: np.ndarray
    ode_residual: np.ndarray
    a: float
    b: float
    dt: float

    @property
    def envelope(self) -> np.ndarray:
        """``L |R_L(L, 0)|`` with ``L = 2t``; tends to ``|a|`` at its peaks."""
        return 2 * self.t_grid * np.abs(self.corner)

    @property
    def max_ode_residual(self) -> float:
        return float(np.max(self.ode_residual))


def uniform_grid(t_min: float, t_max: float, dt: float) -> np.ndarray:
    n = int(round((t_max - t_min) / dt))
    return t_min + dt * np.arange(n + 1)


def asymptotics_report(
    mu: float, t_grid, dt: float = 0.05,
    panels_per_unit: int = DEFAULT_PANELS_PER_UNIT, order: int = DEFAULT_ORDER,
) -> AsymptoticsReport:
    """Corner values on ``t_grid`` plus the central-difference ODE residual."""
    mu = check_mu(mu)
    t = np.asarray(t_grid, dtype=float)
    needed = np.concatenate([t, t - dt, t + dt])
    vals = corner_table(mu, needed, panels_per_unit, order)
    diag = np.array([vals[_key(x)][0] for x in t])
    corner = np.array([vals[_key(x)][1] for x in t])
    d_plus = np.array([vals[_key(x + dt)][0] for x in t])
    d_minus = np.array([vals[_key(x - dt)][0] for x in t])
    deriv = (d_plus - d_minus) / (2 * dt)
    resid = np.abs(deriv - 2 * corner**2)
    a, b = painleve_constants(mu) if mu > 0 else (0.0, 0.0)
    return AsymptoticsReport(
        mu=mu, t_grid=t, diag=diag, corner=corner, sigma=-2 * t * diag,
        ode_residual=resid, a=a, b=b, dt=float(dt),
    )


def tw_ode_residual(mu: float, t_grid, dt: float = 0.05, **grid_kw) -> float:
    """Max over ``t_grid`` of ``|d/dt diag - 2 corner^2|`` (central differences)."""
    if dt > 0.1:
        raise ValueError("dt must be <= 0.1")
    return asymptotics_report(mu, t_grid, dt, **grid_kw).max_ode_residual


def local_maxima(t, y) -> tuple[np.ndarray, np.ndarray]:
    """Three-point local maxima refined by a parabola through the neighbours."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    idx = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
    h = t[1] - t[0]
    ym, y0, yp = y[idx - 1], y[idx], y[idx + 1]
    denom = ym - 2 * y0 + yp
    with np.errstate(invalid="ignore", divide="ignore"):
        shift = np.where(denom != 0, 0.5 * (ym - yp) / denom, 0.0)
    tp = t[idx] + shift * h
    yv = y0 - 0.25 * (ym - yp) * shift
    return tp, yv


@dataclass(frozen=True, eq=False)
class DiagonalLimitReport:
    t: np.ndarray
    diag: np.ndarray
    raw_deviation: np.ndarray
    corrected_deviation: np.ndarray
    target: float


def diagonal_limit_report(mu: float, t_grid, **grid_kw) -> DiagonalLimitReport:
    """Deviation of ``diag(t)`` from ``-a pi`` and from ``-a pi - b/(2t)``."""
    a, b = painleve_constants(mu)
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 2):
        raise ValueError("diagonal limit report needs t >= 2")
    diag = np.array([corner_values(mu, x, **grid_kw)[0] for x in t])
    target = -a * np.pi
    return DiagonalLimitReport(
        t=t, diag=diag,
        raw_deviation=np.abs(diag - target),
        corrected_deviation=np.abs(diag - (target - b / (2 * t))),
        target=float(target),
    )


@dataclass(frozen=True, eq=False)
class CornerEnvelope:
    mu: float
    a: float
    peak_t: np.ndarray
    peak_heights: np.ndarray
    zeros: np.ndarray
    first_extremum_sign: int

    @property
    def zero_spacings(self) -> np.ndarray:
        return np.diff(self.zeros)


def corner_envelope(
    mu: float, t_min: float = 10.0, t_max: float = 20.0, step: float = 0.01,
    table=None, B_exact=None,
) -> CornerEnvelope:
    """Peaks of ``t |B(t)|`` and zeros of ``B`` on ``[t_min, t_max]``.

    Peaks are scanned on a uniform grid of the tabulated ``B`` (cubic
    interpolant).  Zeros are bracketed on the same grid and then located
    by bisection on ``B_exact`` -- by default a fresh section on ``[0, t]``
    read at its corner.
    """
    from .krein_system import sample_B

    if step > 0.1:
        raise ValueError("step must be <= 0.1 to resolve the oscillation")
    a, _ = painleve_constants(mu)
    if table is None:
        table = sample_B(mu, float(np.ceil(t_max)))
    if B_exact is None:
        def B_exact(x):
            return section_endpoint_values(mu, x).corner
    t = uniform_grid(t_min, t_max, step)
    B = table.B_at(t)
    tp, heights = local_maxima(t, t * np.abs(B))
    zeros = []
    sgn = np.sign(B)
    for k in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        zeros.append(brentq(B_exact, t[k], t[k + 1], xtol=1e-10))
    first = int(np.sign(table.B_at(tp[0]))) if len(tp) else 0
    return CornerEnvelope(
        mu=float(mu), a=a, peak_t=tp, peak_heights=heights,
        zeros=np.array(zeros), first_extremum_sign=first,
    )
