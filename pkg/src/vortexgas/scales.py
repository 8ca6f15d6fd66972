"""Multi-scale vorticity diagnostics.

Cressman smoothing at a sequence of scales, the maximum filtered vorticity
per scale, and the log-log regression ("vorticity line") through those
maxima. Also pseudovorticity from a radial-velocity field, the exponent of
an azimuthal velocity profile and the tornadic slope classifier.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

from .errors import (DegeneracyError, GeometryError, LogDomainError, ResolutionError, ScaleRangeError,
                     VortexGasError)
from .fields import ScalarField2D, VectorField2D
from .spectra import linear_fit

DEFAULT_EPSILONS = (300.0, 600.0, 1200.0, 2400.0, 4800.0, 9600.0)
DEFAULT_FIT_RANGE = (300.0, 9600.0)
TORNADIC_SLOPE = -1.6
DEFAULT_WINDOW_RADIUS = 10_000.0

STRONG_TORNADIC = "strong-tornadic"
NON_TORNADIC = "non-tornadic"


def cressman_weight(r, R):
    """``(R^2 - r^2) / (R^2 + r^2)`` inside the cutoff, zero beyond it."""
    r = np.asarray(r, dtype=float)
    w = (R * R - r * r) / (R * R + r * r)
    return np.where(r <= R, w, 0.0)


def _cressman_kernel(R, dx, dy):
    hx = int(np.floor(R / dx))
    hy = int(np.floor(R / dy))
    X, Y = np.meshgrid(dx * np.arange(-hx, hx + 1), dy * np.arange(-hy, hy + 1))
    return cressman_weight(np.hypot(X, Y), R)


def cressman_filter(field: ScalarField2D, epsilon: float) -> ScalarField2D:
    """Cressman-weighted mean of ``field`` with cutoff radius ``2*epsilon``.

    Near the edges only in-grid nodes contribute and the weights are
    renormalized over them.
    """
    g = field.grid
    if epsilon < max(g.dx, g.dy):
        raise ResolutionError(f"epsilon {epsilon} m is below the grid resolution")
    kernel = _cressman_kernel(2.0 * epsilon, g.dx, g.dy)
    num = signal.fftconvolve(field.values, kernel, mode="same")
    den = signal.fftconvolve(np.ones(g.shape), kernel, mode="same")
    return ScalarField2D(g.with_values(num / den), field.quantity, field.units)


@dataclass(frozen=True)
class Window:
    """Disc-shaped analysis window."""

    center: tuple[float, float]
    radius: float

    def mask(self, grid):
        X, Y = grid.meshgrid()
        return np.hypot(X - self.center[0], Y - self.center[1]) <= self.radius


def default_window(field: ScalarField2D, radius=DEFAULT_WINDOW_RADIUS) -> Window:
    """Disc of ``radius`` about the node holding the field maximum."""
    j, i = np.unravel_index(np.argmax(field.values), field.grid.shape)
    return Window(field.grid.node_position(i, j), radius)


@dataclass(frozen=True)
class ScaleSeries:
    epsilons: np.ndarray
    zeta_max: np.ndarray
    window: Window | None = None

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        zm = np.asarray(self.zeta_max, dtype=float)
        if eps.shape != zm.shape:
            raise ValueError("epsilons and zeta_max differ in length")
        if np.any(eps <= 0) or np.any(np.diff(eps) <= 0):
            raise ValueError("epsilons must be positive and strictly increasing")
        if np.any(zm < 0):
            raise ValueError("zeta_max must be non-negative")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "zeta_max", zm)


def max_filtered_vorticity(field: ScalarField2D, epsilons=DEFAULT_EPSILONS, window: Window | None = None) -> ScaleSeries:
    if window is None:
        window = default_window(field)
    mask = window.mask(field.grid)
    if not mask.any():
        raise GeometryError("analysis window contains no grid nodes")
    eps = np.asarray(sorted(epsilons), dtype=float)
    zmax = [cressman_filter(field, e).values[mask].max() for e in eps]
    # roundoff in the FFT convolution can leave -1e-17 on an all-zero field
    zmax = np.maximum(np.asarray(zmax), 0.0)
    return ScaleSeries(eps, zmax, window)


@dataclass(frozen=True)
class VorticityLine:
    slope: float
    intercept: float
    r_squared: float
    fit_range: tuple[float, float]
    points_used: tuple[float, ...]
    points_excluded: tuple[float, ...] = field(default=())


def vorticity_line(series: ScaleSeries, fit_range=DEFAULT_FIT_RANGE) -> VorticityLine:
    """Least-squares line through ``(ln eps, ln zeta_max)`` inside ``fit_range``."""
    lo, hi = fit_range
    if not lo < hi:
        raise ValueError("fit range must have eps_min < eps_max")
    tol = 1e-9 * hi
    inside = (series.epsilons >= lo - tol) & (series.epsilons <= hi + tol)
    if inside.sum() < 3:
        raise ScaleRangeError(f"only {int(inside.sum())} scales inside {fit_range}; need 3")
    eps, zm = series.epsilons[inside], series.zeta_max[inside]
    bad = eps[zm <= 0]
    if bad.size:
        raise LogDomainError(f"zeta_max is zero at epsilon = {bad[0]:g} m")
    fit = linear_fit(np.log(eps), np.log(zm))
    return VorticityLine(fit.slope, fit.intercept, fit.r_squared, (float(lo), float(hi)),
                         tuple(eps.tolist()), tuple(series.epsilons[~inside].tolist()))


def classify_slope(line: VorticityLine) -> str:
    return STRONG_TORNADIC if line.slope <= TORNADIC_SLOPE else NON_TORNADIC


@dataclass(frozen=True)
class Pseudovorticity:
    zeta_pv: float
    v_max_loc: tuple[float, float]
    v_min_loc: tuple[float, float]
    length: float
    delta_v: float


def pseudovorticity(radial_velocity: ScalarField2D) -> Pseudovorticity:
    """``(V_max - V_min) / L`` with ``L`` the distance between the two extrema."""
    g = radial_velocity.grid
    vals = radial_velocity.values
    jmax, imax = np.unravel_index(np.argmax(vals), g.shape)
    jmin, imin = np.unravel_index(np.argmin(vals), g.shape)
    dv = float(vals[jmax, imax] - vals[jmin, imin])
    if dv == 0.0:
        raise DegeneracyError("radial velocity field is constant")
    pmax = g.node_position(imax, jmax)
    pmin = g.node_position(imin, jmin)
    L = float(np.hypot(pmax[0] - pmin[0], pmax[1] - pmin[1]))
    if L == 0.0:
        raise DegeneracyError("velocity extrema fall on the same node")
    return Pseudovorticity(dv / L, pmax, pmin, L, dv)


def doppler_projection(field: VectorField2D, view_angle: float) -> ScalarField2D:
    """Velocity component along a uniform viewing direction.

    Emulates a distant radar looking along ``(cos a, sin a)``.
    """
    c, s = np.cos(view_angle), np.sin(view_angle)
    vr = field.u.values * c + field.v.values * s
    return ScalarField2D(field.u.with_values(vr), "radial_velocity", "m s^-1")


def azimuthal_mean_speed(field: VectorField2D, center, radii, n_azimuth=360):
    """Speed averaged over circles, bilinearly interpolated from the grid."""
    g = field.grid
    theta = 2 * np.pi * np.arange(n_azimuth) / n_azimuth
    speed = field.speed()
    out = []
    for r in np.atleast_1d(radii):
        px = center[0] + r * np.cos(theta)
        py = center[1] + r * np.sin(theta)
        ci = (px - g.origin[0]) / g.dx
        cj = (py - g.origin[1]) / g.dy
        if ci.min() < 0 or cj.min() < 0 or ci.max() > g.nx - 1 or cj.max() > g.ny - 1:
            raise GeometryError(f"shell of radius {r} m leaves the grid")
        out.append(ndimage.map_coordinates(speed, [cj, ci], order=1).mean())
    return np.asarray(out)


def velocity_exponent(field: VectorField2D, center, r_range, n_shells=16) -> float:
    """Exponent of ``v ~ r**b`` from azimuthally averaged speed on log-spaced shells."""
    if n_shells < 3:
        raise ScaleRangeError("need at least 3 radial shells")
    r_lo, r_hi = r_range
    if not 0 < r_lo < r_hi:
        raise ScaleRangeError(f"invalid radial range {r_range}")
    radii = np.geomspace(r_lo, r_hi, n_shells)
    v = azimuthal_mean_speed(field, center, radii)
    return linear_fit(np.log(radii), np.log(v)).slope


@dataclass(frozen=True)
class SlopeSeries:
    times: tuple[float, ...]
    slopes: tuple[float, ...]
    classes: tuple[str, ...]
    first_tornadic: int | None


def slope_time_series(fields, epsilons=DEFAULT_EPSILONS, fit_range=DEFAULT_FIT_RANGE,
                      window: Window | None = None, times=None) -> SlopeSeries:
    """Vorticity-line slope per frame plus the first frame classified tornadic."""
    fields = list(fields)
    if len(fields) < 2:
        raise ValueError("need at least two frames")
    if times is None:
        times = range(len(fields))
    slopes, classes = [], []
    for k, f in enumerate(fields):
        try:
            line = vorticity_line(max_filtered_vorticity(f, epsilons, window), fit_range)
        except VortexGasError as exc:
            raise type(exc)(f"frame {k}: {exc}") from exc
        slopes.append(line.slope)
        classes.append(classify_slope(line))
    first = next((k for k, c in enumerate(classes) if c == STRONG_TORNADIC), None)
    return SlopeSeries(tuple(float(t) for t in times), tuple(slopes), tuple(classes), first)
