"""Grids, calculus on sampled functions, quadrature, and special functions.

Everything downstream works with real functions tabulated on a shared uniform
grid.  Differentiation is second-order central (one-sided at the endpoints),
integration is trapezoidal, so all derived quantities carry O(h^2) accuracy
unless an analytic shortcut is available.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.special import ellipeinc

from .errors import (
    DegenerateFunctionError,
    DomainError,
    GridMismatchError,
    InvalidArgumentError,
)

MIN_GRID_POINTS = 16
_UNIFORMITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on [x_min, x_max] with at least MIN_GRID_POINTS nodes."""

    x_min: float
    x_max: float
    n_points: int
    points: np.ndarray = field(repr=False)

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.x_min == other.x_min
            and self.x_max == other.x_max
            and self.n_points == other.n_points
        )

    def __hash__(self) -> int:
        return hash((self.x_min, self.x_max, self.n_points))

    def index_of(self, x: float) -> int:
        """Index of the grid node closest to x."""
        return int(round((x - self.x_min) / self.spacing))


def build_grid(x_min: float, x_max: float, n_points: int) -> Grid:
    """Construct a uniform grid; rejects reversed bounds and short grids."""
    if not np.isfinite(x_min) or not np.isfinite(x_max):
        raise InvalidArgumentError("grid bounds must be finite")
    if x_min >= x_max:
        raise InvalidArgumentError(
            f"grid needs x_min < x_max, got [{x_min}, {x_max}]"
        )
    n_points = int(n_points)
    if n_points < MIN_GRID_POINTS:
        raise InvalidArgumentError(
            f"grid needs at least {MIN_GRID_POINTS} points, got {n_points}"
        )
    points = np.linspace(x_min, x_max, n_points)
    h = points[1] - points[0]
    # uniformity up to the float64 representation floor of the coordinates
    tol = max(_UNIFORMITY_TOL, 8 * np.finfo(float).eps * max(abs(x_min), abs(x_max)) / h)
    if np.max(np.abs(np.diff(points) - h)) / h >= tol:
        raise InvalidArgumentError("grid spacing is not uniform")
    return Grid(float(x_min), float(x_max), n_points, points)


def subgrid(grid: Grid, i_lo: int, i_hi: int) -> Grid:
    """Grid restricted to the node range [i_lo, i_hi] (inclusive)."""
    if not (0 <= i_lo < i_hi <= grid.n_points - 1):
        raise InvalidArgumentError(f"bad node range [{i_lo}, {i_hi}]")
    pts = grid.points[i_lo : i_hi + 1]
    if len(pts) < MIN_GRID_POINTS:
        raise InvalidArgumentError("subgrid would have too few points")
    return Grid(float(pts[0]), float(pts[-1]), len(pts), pts)


@dataclass(eq=False)
class SampledFunction:
    """A real function tabulated on a grid.

    ``mask`` marks nodes whose values are meaningless (poles of a singular
    partner potential, for instance); masked entries may be non-finite and
    are excluded from norms and residuals.
    """

    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_points,):
            raise InvalidArgumentError(
                f"values have shape {self.values.shape}, "
                f"grid has {self.grid.n_points} points"
            )
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.values.shape:
                raise InvalidArgumentError("mask shape does not match values")
            if not self.mask.any():
                self.mask = None
        ok = self.values if self.mask is None else self.values[~self.mask]
        if not np.all(np.isfinite(ok)):
            raise InvalidArgumentError(
                "non-finite values outside the singularity mask"
            )

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    def mask_array(self) -> np.ndarray:
        if self.mask is None:
            return np.zeros(self.grid.n_points, dtype=bool)
        return self.mask

    def with_values(self, values, mask=None) -> "SampledFunction":
        return SampledFunction(self.grid, values, mask)


def require_same_grid(*functions: SampledFunction) -> Grid:
    grid = functions[0].grid
    for f in functions[1:]:
        if f.grid is not grid and f.grid != grid:
            raise GridMismatchError("sampled functions do not share a grid")
    return grid


def default_anchor(grid: Grid) -> float:
    """Anchor convention for antiderivatives: 0 when in range, else x_min."""
    if grid.x_min <= 0.0 <= grid.x_max:
        return 0.0
    return grid.x_min


def _diff_values(values: np.ndarray, h: float, order: int) -> np.ndarray:
    out = np.empty_like(values)
    if order == 1:
        out[1:-1] = (values[2:] - values[:-2]) / (2 * h)
        out[0] = (-3 * values[0] + 4 * values[1] - values[2]) / (2 * h)
        out[-1] = (3 * values[-1] - 4 * values[-2] + values[-3]) / (2 * h)
    elif order == 2:
        out[1:-1] = (values[2:] - 2 * values[1:-1] + values[:-2]) / h**2
        out[0] = (
            2 * values[0] - 5 * values[1] + 4 * values[2] - values[3]
        ) / h**2
        out[-1] = (
            2 * values[-1] - 5 * values[-2] + 4 * values[-3] - values[-4]
        ) / h**2
    else:
        raise InvalidArgumentError(f"derivative order must be 1 or 2, got {order}")
    return out


def _widen_mask(mask: np.ndarray | None, cells: int) -> np.ndarray | None:
    if mask is None or not mask.any():
        return mask
    out = mask.copy()
    for _ in range(cells):
        out[1:] |= out[:-1]
        out[:-1] |= out[1:]
    return out


def derivative(f: SampledFunction, order: int = 1) -> SampledFunction:
    """Central-difference derivative, one-sided at the endpoints, O(h^2)."""
    if f.grid.n_points < 5:
        raise InvalidArgumentError("derivative needs at least 5 grid points")
    vals = f.values
    if f.mask is not None:
        vals = np.where(f.mask, np.nan, vals)
    out = _diff_values(vals, f.grid.spacing, order)
    mask = _widen_mask(f.mask, order)
    if mask is not None:
        out = np.where(mask, np.nan, out)
    return SampledFunction(f.grid, out, mask)


def integrate_cumulative(f: SampledFunction, anchor: float | None = None) -> SampledFunction:
    """Trapezoidal antiderivative F with F(anchor) = 0 and F' = f.

    The anchor resolves the free integration constant; by default it follows
    :func:`default_anchor`.
    """
    if f.mask is not None:
        raise InvalidArgumentError("cannot integrate a masked function")
    grid = f.grid
    if anchor is None:
        anchor = default_anchor(grid)
    if not (grid.x_min <= anchor <= grid.x_max):
        raise InvalidArgumentError(
            f"anchor {anchor} lies outside [{grid.x_min}, {grid.x_max}]"
        )
    raw = cumulative_trapezoid(f.values, grid.points, initial=0.0)
    offset = float(np.interp(anchor, grid.points, raw))
    return SampledFunction(grid, raw - offset)


def _elliptic_k_gt1(phi: float, k: float) -> float:
    # real branch ends where 1 - k sin^2(theta) crosses zero
    phi_max = float(np.arcsin(1.0 / np.sqrt(k)))
    if abs(phi) > phi_max + 1e-15:
        raise DomainError(
            f"E[phi, k] with k={k} > 1 is real only for |phi| <= {phi_max:.6g}"
        )
    val, _ = quad(
        lambda t: np.sqrt(max(1.0 - k * np.sin(t) ** 2, 0.0)), 0.0, abs(phi),
        limit=200,
    )
    return float(np.copysign(val, phi))


def incomplete_elliptic_e(phi, k: float):
    """Incomplete elliptic integral of the second kind, parameter convention.

    E[phi, k] = integral_0^phi sqrt(1 - k sin^2 theta) d theta, i.e. ``k``
    multiplies sin^2 directly (it is the *parameter*, not the modulus).  For
    any real phi the quasi-periodic extension E[phi + pi, k] = E[phi, k] +
    2 E[pi/2, k] applies; the function is odd in phi.
    """
    k = float(k)
    if k <= 1.0:
        out = ellipeinc(phi, k)
        if np.any(~np.isfinite(out)):
            raise DomainError(f"elliptic integral not real for k={k}")
        return float(out) if np.isscalar(phi) else out
    if np.isscalar(phi):
        return _elliptic_k_gt1(float(phi), k)
    return np.array([_elliptic_k_gt1(float(p), k) for p in np.asarray(phi)])


def wronskian(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """Pointwise f g' - f' g, with derivatives by central differences."""
    grid = require_same_grid(f, g)
    df = derivative(f)
    dg = derivative(g)
    values = f.values * dg.values - df.values * g.values
    mask = None
    if f.mask is not None or g.mask is not None or df.mask is not None:
        mask = df.mask_array() | dg.mask_array()
        values = np.where(mask, np.nan, values)
    return SampledFunction(grid, values, mask)


def inner_product(f: SampledFunction, g: SampledFunction) -> float:
    """Trapezoid-rule L2 inner product on the shared grid."""
    grid = require_same_grid(f, g)
    return float(np.trapezoid(f.values * g.values, grid.points))


def l2_norm(f: SampledFunction) -> float:
    return float(np.sqrt(np.trapezoid(f.values**2, f.grid.points)))


def l2_normalize(f: SampledFunction) -> SampledFunction:
    """Scale to unit L2 norm (trapezoid rule).

    Sign convention: the value at the first node where |f| exceeds
    1e-8 max|f| is made positive.  Identically-zero input is rejected.
    """
    if f.mask is not None:
        raise InvalidArgumentError("cannot normalize a masked function; "
                                   "normalize per regular subdomain instead")
    nrm = l2_norm(f)
    peak = np.max(np.abs(f.values))
    if nrm == 0.0 or peak == 0.0:
        raise DegenerateFunctionError("cannot normalize an identically-zero function")
    values = f.values / nrm
    lead = np.argmax(np.abs(values) > 1e-8 * np.max(np.abs(values)))
    if values[lead] < 0:
        values = -values
    return SampledFunction(f.grid, values)
