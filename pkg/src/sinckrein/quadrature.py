"""Composite Gauss-Legendre grids on [0, xi] and the sinc kernel."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError

DEFAULT_ORDER = 10
DEFAULT_PANELS_PER_UNIT = 2

_TAYLOR_SWITCH = 1e-4


@lru_cache(maxsize=64)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the ``n``-point Gauss-Legendre rule on [-1, 1].

    The rule integrates polynomials of degree ``2n - 1`` exactly.
    """
    if int(n) != n or n < 1:
        raise ConfigError(f"Gauss-Legendre rule needs n >= 1, got {n!r}")
    x, w = _legendre(int(n))
    return x.copy(), w.copy()


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Composite Gauss-Legendre rule on [0, xi].

    ``panel_boundaries`` holds ``0 = b_0 < ... < b_P = xi``; every panel
    carries exactly ``order`` nodes, stored in ascending order.
    """

    xi: float
    nodes: np.ndarray
    weights: np.ndarray
    panel_boundaries: np.ndarray
    order: int

    def __post_init__(self):
        for arr in (self.nodes, self.weights, self.panel_boundaries):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def n_panels(self) -> int:
        return len(self.panel_boundaries) - 1

    @property
    def panel_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_panels), self.order)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def integrate(self, values) -> float:
        """Apply the rule to samples (or a callable) on the nodes."""
        if callable(values):
            values = values(self.nodes)
        return float(np.dot(self.weights, values))

    def endpoint_offsets(self) -> np.ndarray:
        """Offset of each node from the right end of its partial panel.

        Truncating the rule after node ``i`` leaves a rule that integrates
        up to ``b_p + sum_{k <= i} w_k``; this returns that endpoint minus
        ``s_i + w_i / 2`` for every node.
        """
        x, w = _legendre(self.order)
        unit = np.cumsum(w) - w / 2 - 1.0 - x
        half = np.diff(self.panel_boundaries) / 2
        return np.tile(unit, self.n_panels) * np.repeat(half, self.order)

    def truncated(self, n_panels: int) -> QuadratureGrid:
        """Grid made of the first ``n_panels`` panels (a leading sub-rule)."""
        if not 1 <= n_panels <= self.n_panels:
            raise ConfigError(f"cannot keep {n_panels} of {self.n_panels} panels")
        n = n_panels * self.order
        b = self.panel_boundaries[: n_panels + 1].copy()
        return QuadratureGrid(
            xi=float(b[-1]),
            nodes=self.nodes[:n].copy(),
            weights=self.weights[:n].copy(),
            panel_boundaries=b,
            order=self.order,
        )


def panel_grid(boundaries, order: int) -> QuadratureGrid:
    """Map an ``order``-point Gauss rule into each panel of ``boundaries``."""
    b = np.asarray(boundaries, dtype=float)
    if b.ndim != 1 or len(b) < 2 or b[0] != 0 or np.any(np.diff(b) <= 0):
        raise ConfigError("panel boundaries must start at 0 and increase strictly")
    if order < 2:
        raise ConfigError(f"order must be >= 2, got {order}")
    x, w = _legendre(int(order))
    half = np.diff(b)[:, None] / 2
    mid = (b[:-1] + b[1:])[:, None] / 2
    nodes = (half * x[None, :] + mid).ravel()
    weights = (half * w[None, :]).ravel()
    return QuadratureGrid(
        xi=float(b[-1]),
        nodes=nodes,
        weights=weights,
        panel_boundaries=b,
        order=int(order),
    )


def composite_grid(
    xi: float,
    panels_per_unit: int = DEFAULT_PANELS_PER_UNIT,
    order: int = DEFAULT_ORDER,
) -> QuadratureGrid:
    """Uniform panels of width ``1/panels_per_unit`` on [0, xi].

    The last panel is shorter when ``xi * panels_per_unit`` is not an
    integer (slivers below 1e-9 are merged into the previous panel).
    """
    if not np.isfinite(xi) or xi <= 0:
        raise ConfigError(f"xi must be > 0, got {xi}")
    if int(panels_per_unit) != panels_per_unit or panels_per_unit < 1:
        raise ConfigError(f"panels_per_unit must be a positive integer, got {panels_per_unit}")
    width = 1.0 / panels_per_unit
    n_full = int(np.floor(xi / width + 1e-9))
    b = np.arange(n_full + 1) * width
    if xi - b[-1] > 1e-9:
        b = np.append(b, xi)
    else:
        b[-1] = xi
    return panel_grid(b, order)


def sinc_kernel(x):
    """``sin(pi x) / (pi x)`` with a Taylor branch near the origin."""
    x = np.asarray(x, dtype=float)
    px = np.pi * x
    small = np.abs(x) < _TAYLOR_SWITCH
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(small, 0.0, np.sin(px) / np.where(small, 1.0, px))
    px2 = px * px
    out = np.where(small, 1.0 - px2 / 6.0 + px2 * px2 / 120.0, out)
    return out if out.ndim else float(out)


def sine_integral_over_pi(x, order: int = 16):
    """``int_0^x sinc(s) ds`` by composite Gauss panels of unit width.

    Vectorized over ``x``; signs follow ``x`` (the integrand is even).
    """
    x = np.asarray(x, dtype=float)
    flat = np.abs(x).ravel()
    gx, gw = _legendre(order)
    out = np.empty_like(flat)
    for k, a in enumerate(flat):
        if a == 0.0:
            out[k] = 0.0
            continue
        n = max(1, int(np.ceil(a)))
        b = np.linspace(0.0, a, n + 1)
        half = np.diff(b)[:, None] / 2
        pts = half * gx[None, :] + (b[:-1] + b[1:])[:, None] / 2
        out[k] = float(np.sum(half * gw[None, :] * sinc_kernel(pts)))
    out = np.sign(x.ravel()) * out
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)
