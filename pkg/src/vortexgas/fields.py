"""Uniform 2D grids, synthetic vortex fields and the discrete vertical curl.

Arrays are stored with shape ``(ny, nx)``: row ``j`` holds the nodes at
``y = y0 + j*dy`` and column ``i`` the nodes at ``x = x0 + i*dx``. All
quantities are SI.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ResolutionError, ValidationError


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple[float, float] = (0.0, 0.0)
    values: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise GeometryError(f"grid needs nx, ny >= 2, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise GeometryError(f"grid spacing must be positive, got dx={self.dx}, dy={self.dy}")
        vals = self.values
        if vals is None:
            vals = np.zeros((self.ny, self.nx))
        vals = np.array(vals, dtype=float)
        if vals.size != self.nx * self.ny:
            raise GeometryError(f"values has {vals.size} entries, expected {self.nx * self.ny}")
        vals = vals.reshape(self.ny, self.nx)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def x(self):
        return self.origin[0] + self.dx * np.arange(self.nx)

    @property
    def y(self):
        return self.origin[1] + self.dy * np.arange(self.ny)

    def meshgrid(self):
        return np.meshgrid(self.x, self.y)

    def same_geometry(self, other: "Grid2D") -> bool:
        return (self.nx, self.ny, self.dx, self.dy, self.origin) == (
            other.nx, other.ny, other.dx, other.dy, other.origin)

    def with_values(self, values) -> "Grid2D":
        return Grid2D(self.nx, self.ny, self.dx, self.dy, self.origin, values)

    def nearest_node(self, x, y):
        """Index ``(i, j)`` of the node closest to ``(x, y)``, clipped to the grid."""
        i = int(np.clip(np.rint((x - self.origin[0]) / self.dx), 0, self.nx - 1))
        j = int(np.clip(np.rint((y - self.origin[1]) / self.dy), 0, self.ny - 1))
        return i, j

    def node_position(self, i, j):
        return self.origin[0] + i * self.dx, self.origin[1] + j * self.dy

    def center_node(self):
        return self.nx // 2, self.ny // 2


def make_grid(nx, ny, dx, dy=None, origin=(0.0, 0.0)) -> Grid2D:
    return Grid2D(nx, ny, dx, dx if dy is None else dy, origin)


@dataclass(frozen=True)
class ScalarField2D:
    grid: Grid2D
    quantity: str = "generic"
    units: str = ""

    def __post_init__(self):
        if not np.all(np.isfinite(self.grid.values)):
            raise ValidationError(f"{self.quantity} field contains non-finite values")

    @property
    def values(self):
        return self.grid.values


@dataclass(frozen=True)
class VectorField2D:
    u: Grid2D
    v: Grid2D

    def __post_init__(self):
        if not self.u.same_geometry(self.v):
            raise GeometryError("u and v grids have different geometry")
        if not (np.all(np.isfinite(self.u.values)) and np.all(np.isfinite(self.v.values))):
            raise ValidationError("velocity field contains non-finite values")

    @property
    def grid(self):
        return self.u

    def speed(self):
        return np.hypot(self.u.values, self.v.values)


def vorticity_field(grid: Grid2D, values) -> ScalarField2D:
    return ScalarField2D(grid.with_values(values), "vorticity", "s^-1")


def curl_z(field: VectorField2D) -> ScalarField2D:
    """Vertical vorticity dv/dx - du/dy.

    Second-order centered differences in the interior, first-order one-sided
    differences on the outer rows and columns.
    """
    g = field.u
    if g.nx < 3 or g.ny < 3:
        raise GeometryError("curl_z needs at least 3 nodes in each direction")
    dvdx = np.gradient(field.v.values, g.dx, axis=1, edge_order=1)
    dudy = np.gradient(field.u.values, g.dy, axis=0, edge_order=1)
    return vorticity_field(g, dvdx - dudy)


def _snapped_center(grid, center):
    if center is None:
        i, j = grid.center_node()
    else:
        i, j = grid.nearest_node(*center)
    return grid.node_position(i, j)


def _radius(grid, center):
    cx, cy = _snapped_center(grid, center)
    X, Y = grid.meshgrid()
    return X - cx, Y - cy


def rankine_speed(r, v_max, R, b):
    """Azimuthal speed of the modified Rankine profile."""
    r = np.asarray(r, dtype=float)
    inner = v_max * r / R
    with np.errstate(divide="ignore"):
        outer = v_max * (R / np.where(r > 0, r, R)) ** b
    return np.where(r <= R, inner, outer)


def make_modified_rankine(v_max, R, b, grid: Grid2D, center=None) -> VectorField2D:
    """Counterclockwise modified Rankine vortex.

    Solid-body rotation ``v = v_max*r/R`` inside the core and ``v_max*(R/r)**b``
    outside. The center snaps to the nearest grid node (grid center by default).
    """
    if not (v_max > 0 and R > 0 and b > 0):
        raise ValidationError("make_modified_rankine needs v_max > 0, R > 0, b > 0")
    if R < 2 * max(grid.dx, grid.dy):
        raise ResolutionError(f"core radius {R} m is under two grid spacings")
    X, Y = _radius(grid, center)
    r = np.hypot(X, Y)
    speed = rankine_speed(r, v_max, R, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(r > 0, -speed * Y / r, 0.0)
        v = np.where(r > 0, speed * X / r, 0.0)
    return VectorField2D(grid.with_values(u), grid.with_values(v))


def power_law_profile(r, zeta_core, R, b):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        outer = zeta_core * (np.where(r > 0, r, R) / R) ** b
    return np.where(r <= R, zeta_core, outer)


def make_power_law_vorticity(zeta_core, R, b, grid: Grid2D, center=None, supersample=1) -> ScalarField2D:
    """Vorticity that is flat inside radius ``R`` and decays like ``r**b`` outside.

    With ``supersample > 1`` each node holds the mean of the profile over its
    cell, sampled on a ``supersample x supersample`` sub-grid. That keeps a
    sub-grid core (``R`` well below ``dx``) from putting an arbitrarily large
    value on the center node.
    """
    if not (zeta_core > 0 and R > 0 and b < 0):
        raise ValidationError("make_power_law_vorticity needs zeta_core > 0, R > 0, b < 0")
    if supersample < 1:
        raise ValidationError("supersample must be >= 1")
    X, Y = _radius(grid, center)
    offsets = (np.arange(supersample) + 0.5) / supersample - 0.5
    acc = np.zeros(grid.shape)
    for oy in offsets:
        for ox in offsets:
            acc += power_law_profile(np.hypot(X + ox * grid.dx, Y + oy * grid.dy), zeta_core, R, b)
    return vorticity_field(grid, acc / supersample ** 2)


def make_vortex_sheet(length, h, zeta_sheet, grid: Grid2D, center=None, angle=0.0) -> ScalarField2D:
    """Straight band of uniform vorticity.

    The band has thickness ``h`` across and ``length`` along the direction
    ``angle`` (radians from the x axis). Node membership is half-open on both
    axes so a band an integer number of cells wide covers exactly that many
    rows of nodes.
    """
    if h < 2 * min(grid.dx, grid.dy):
        raise ResolutionError(f"sheet thickness {h} m is under two grid spacings")
    if length <= 0:
        raise ValidationError("sheet length must be positive")
    X, Y = _radius(grid, center)
    c, s = np.cos(angle), np.sin(angle)
    along = X * c + Y * s
    across = -X * s + Y * c
    eps = 1e-9 * max(grid.dx, grid.dy)
    inside = (along >= -length / 2 - eps) & (along < length / 2 - eps) & \
             (across >= -h / 2 - eps) & (across < h / 2 - eps)
    cx, cy = _snapped_center(grid, center)
    corners = [(cx + a * c - q * s, cy + a * s + q * c)
               for a in (-length / 2, length / 2) for q in (-h / 2, h / 2)]
    x_lo, y_lo = grid.origin
    x_hi, y_hi = grid.x[-1], grid.y[-1]
    for px, py in corners:
        if not (x_lo - eps <= px <= x_hi + grid.dx and y_lo - eps <= py <= y_hi + grid.dy):
            raise GeometryError("vortex sheet extends past the grid")
    return vorticity_field(grid, np.where(inside, float(zeta_sheet), 0.0))


def circulation(field: ScalarField2D) -> float:
    g = field.grid
    return float(field.values.sum() * g.dx * g.dy)
