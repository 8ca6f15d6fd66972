"""Power-law fits, box-counting dimension and radial energy spectra."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import GeometryError, LogDomainError, ScaleRangeError, ValidationError
from .fields import VectorField2D

SHEET_AREA_EXPONENT = 1.55
KOLMOGOROV_EXPONENT = -5.0 / 3.0
MEAN_FIELD_EXPONENT = -2.0


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    n: int

    def slope_ci(self, level=0.95):
        if self.n <= 2:
            return (float("-inf"), float("inf"))
        t = stats.t.ppf(0.5 + level / 2, self.n - 2)
        return (self.slope - t * self.slope_stderr, self.slope + t * self.slope_stderr)


def linear_fit(x, y) -> LinearFit:
    """Ordinary least squares ``y = slope*x + intercept``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ScaleRangeError("need at least two points for a fit")
    if np.ptp(y) == 0.0:
        return LinearFit(0.0, float(y[0]), 1.0, 0.0, x.size)
    res = stats.linregress(x, y)
    return LinearFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2),
                     float(res.stderr), x.size)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float
    stderr: float
    n: int


def _in_range(x, y, fit_range):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if fit_range is not None:
        lo, hi = fit_range
        keep = (x >= lo) & (x <= hi)
        x, y = x[keep], y[keep]
    if x.size < 3:
        raise ScaleRangeError(f"{x.size} points in range; need at least 3")
    if np.any(x <= 0) or np.any(y <= 0):
        raise LogDomainError("power-law fit needs positive x and y in range")
    return x, y


def fit_power_law(x, y, fit_range=None) -> PowerLawFit:
    """Fit ``y = prefactor * x**exponent`` by least squares in natural-log space."""
    x, y = _in_range(x, y, fit_range)
    fit = linear_fit(np.log(x), np.log(y))
    return PowerLawFit(fit.slope, float(np.exp(fit.intercept)), fit.r_squared, fit.slope_stderr, fit.n)


def fixed_exponent_residual(x, y, exponent, fit_range=None):
    """RMS log-residual of the best fit with the exponent held fixed."""
    x, y = _in_range(x, y, fit_range)
    resid = np.log(y) - exponent * np.log(x)
    return float(np.sqrt(np.mean((resid - resid.mean()) ** 2)))


def compare_dissipation_laws(k, E, fit_range=None):
    """Residuals of the k^-5/3 and k^-2 candidates; no verdict is drawn."""
    return {
        "kolmogorov_-5/3": fixed_exponent_residual(k, E, KOLMOGOROV_EXPONENT, fit_range),
        "mean_field_-2": fixed_exponent_residual(k, E, MEAN_FIELD_EXPONENT, fit_range),
    }


# -- box counting ------------------------------------------------------------

@dataclass(frozen=True)
class BoxCountResult:
    dimension: float
    ci: tuple[float, float]
    scales: np.ndarray
    counts: np.ndarray
    r_squared: float


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValidationError("point set must be an (n, d) array with n >= 2")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("point set contains non-finite coordinates")
    if np.all(np.ptp(pts, axis=0) == 0):
        raise ValidationError("point set needs at least two distinct points")
    return pts


def default_box_scales(points, levels=range(2, 9)):
    """Dyadic box sizes ``L/2**k`` with ``L`` the largest bounding-box side.

    The default skips ``k = 1``: with only two boxes across the set the count
    mostly reflects the bounding-box aspect ratio, not the set's roughness.
    """
    L = np.ptp(_as_points(points), axis=0).max()
    return np.array([L / 2.0 ** k for k in levels])


def box_counts(points, scales):
    """Occupied boxes per size, grid anchored at the bounding-box corner.

    Boxes are closed on the far side of the bounding box, so a set spanning
    exactly ``m`` box widths occupies at most ``m`` boxes along that axis.
    """
    pts = _as_points(points)
    lo = pts.min(axis=0)
    span = np.ptp(pts, axis=0)
    counts = []
    for s in scales:
        last = np.maximum(np.ceil(span / s * (1 - 1e-12)).astype(np.int64) - 1, 0)
        idx = np.minimum(np.floor((pts - lo) / s).astype(np.int64), last)
        counts.append(len(np.unique(idx, axis=0)))
    return np.asarray(counts)


def box_counting_dimension(points, scales=None, min_span_decades=2.0, level=0.95) -> BoxCountResult:
    """Slope of ``ln N(s)`` against ``ln(1/s)`` over the given box sizes.

    ``scales`` default to seven dyadic sizes, ``L/4`` down to ``L/256``. At
    least four scales are needed and the smallest must sit
    ``min_span_decades`` below the set's diameter.
    """
    pts = _as_points(points)
    if scales is None:
        scales = default_box_scales(pts)
    scales = np.sort(np.asarray(scales, dtype=float))[::-1]
    if scales.size < 4:
        raise ScaleRangeError(f"{scales.size} box sizes given; need at least 4")
    diameter = float(np.linalg.norm(np.ptp(pts, axis=0)))
    if diameter / scales.min() < 10.0 ** min_span_decades * (1 - 1e-9):
        raise ScaleRangeError(
            f"box sizes reach only {np.log10(diameter / scales.min()):.2f} decades below the diameter")
    counts = box_counts(pts, scales)
    fit = linear_fit(np.log(1.0 / scales), np.log(counts))
    return BoxCountResult(fit.slope, fit.slope_ci(level), scales, counts, fit.r_squared)


def koch_curve(level: int, length=1.0):
    """Vertices of the Koch curve after ``level`` refinements."""
    pts = np.array([[0.0, 0.0], [length, 0.0]])
    rot = np.array([[0.5, -np.sqrt(3) / 2], [np.sqrt(3) / 2, 0.5]])
    for _ in range(level):
        a, b = pts[:-1], pts[1:]
        d = (b - a) / 3.0
        p1 = a + d
        p2 = p1 + d @ rot.T
        p3 = a + 2 * d
        new = np.empty((4 * len(a) + 1, 2))
        new[0:-1:4] = a
        new[1::4] = p1
        new[2::4] = p2
        new[3::4] = p3
        new[-1] = pts[-1]
        pts = new
    return pts


def densify(polyline, spacing):
    """Resample a polyline so consecutive points are at most ``spacing`` apart."""
    poly = np.asarray(polyline, dtype=float)
    out = [poly[:1]]
    for a, b in zip(poly[:-1], poly[1:]):
        n = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
        t = np.arange(1, n + 1)[:, None] / n
        out.append(a + t * (b - a))
    return np.vstack(out)


def twindragon_boundary(level=18, resolution=512):
    """Boundary pixels of the twindragon tile, as points in tile coordinates.

    The tile is the attractor of ``z -> z/(1+i)`` and ``z -> (z+1)/(1+i)``
    (dragon pair); it is rasterized by the chaos game and its boundary
    extracted as occupied pixels with an empty 4-neighbour.
    """
    rng = np.random.default_rng(0)
    n = 4 * resolution * resolution
    w = 1.0 / (1.0 + 1j)
    z = np.zeros(n, dtype=complex)
    digits = rng.integers(0, 2, size=(level, n))
    for d in digits:
        z = (z + d) * w
    xs, ys = z.real, z.imag
    lo = np.array([xs.min(), ys.min()])
    span = max(np.ptp(xs), np.ptp(ys))
    ij = np.floor((np.column_stack([xs, ys]) - lo) / span * (resolution - 1)).astype(int)
    img = np.zeros((resolution + 2, resolution + 2), dtype=bool)
    img[ij[:, 1] + 1, ij[:, 0] + 1] = True
    inner = img[1:-1, 1:-1]
    edge = inner & ~(img[:-2, 1:-1] & img[2:, 1:-1] & img[1:-1, :-2] & img[1:-1, 2:])
    jj, ii = np.nonzero(edge)
    return np.column_stack([ii, jj]).astype(float)


# -- spectra -------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumSeries:
    k: np.ndarray
    energy: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        e = np.asarray(self.energy, dtype=float)
        if k.shape != e.shape:
            raise ValidationError("k and E differ in length")
        if np.any(k <= 0) or np.any(np.diff(k) <= 0):
            raise ValidationError("wavenumbers must be positive and increasing")
        if np.any(e < 0):
            raise ValidationError("spectral energies must be non-negative")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "energy", e)

    @property
    def total(self):
        return float(self.energy.sum())


def _wave_index(n):
    return np.fft.fftfreq(n, d=1.0 / n)


def radial_energy_spectrum(field: VectorField2D) -> SpectrumSeries:
    """Kinetic energy per unit-width annulus of integer wavenumber index.

    ``E`` in bin ``m`` holds the energy of all Fourier modes whose index
    magnitude rounds to ``m``; summing the bins gives ``0.5*mean(u^2+v^2)``
    of the mean-removed field. Wavenumbers are reported in rad/m.
    """
    g = field.grid
    if g.nx != g.ny or g.dx != g.dy:
        raise GeometryError("radial spectrum needs a square grid with dx == dy")
    n = g.nx
    u = field.u.values - field.u.values.mean()
    v = field.v.values - field.v.values.mean()
    U = np.fft.fft2(u)
    V = np.fft.fft2(v)
    e2d = 0.5 * (np.abs(U) ** 2 + np.abs(V) ** 2) / float(n) ** 4
    kk = _wave_index(n)
    KX, KY = np.meshgrid(kk, kk)
    idx = np.rint(np.hypot(KX, KY)).astype(np.int64)
    energy = np.bincount(idx.ravel(), weights=e2d.ravel())
    m = np.arange(1, energy.size)
    dk = 2 * np.pi / (n * g.dx)
    return SpectrumSeries(m * dk, energy[1:])


def physical_energy(field: VectorField2D) -> float:
    u = field.u.values - field.u.values.mean()
    v = field.v.values - field.v.values.mean()
    return float(0.5 * np.mean(u * u + v * v))


def synthesize_power_law_field(n, exponent, rng, dx=1.0) -> VectorField2D:
    """Random-phase incompressible field whose shell spectrum goes like ``k**exponent``.

    Built from a stream function with ``|psi_k|^2 ~ k**(exponent - 3)``: each
    annulus holds ~2*pi*k modes carrying ``k^2 |psi_k|^2`` each.
    """
    from .fields import make_grid

    kk = _wave_index(n)
    KX, KY = np.meshgrid(kk, kk)
    K = np.hypot(KX, KY)
    amp = np.zeros_like(K)
    amp[K > 0] = K[K > 0] ** ((exponent - 3.0) / 2.0)
    if n % 2 == 0:
        # Nyquist rows have no signed derivative; dropping them keeps div u = 0
        amp[:, n // 2] = 0.0
        amp[n // 2, :] = 0.0
    phase = np.exp(2j * np.pi * rng.random(K.shape))
    psi_hat = amp * phase
    psi = np.real(np.fft.ifft2(psi_hat))
    psi_hat = np.fft.fft2(psi)  # restores Hermitian symmetry
    L = n * dx
    u = np.real(np.fft.ifft2(1j * (2 * np.pi / L) * KY * psi_hat))
    v = np.real(np.fft.ifft2(-1j * (2 * np.pi / L) * KX * psi_hat))
    grid = make_grid(n, n, dx)
    return VectorField2D(grid.with_values(u), grid.with_values(v))


# -- scaling relations ---------------------------------------------------------

@dataclass(frozen=True)
class SpectrumExponent:
    gamma: float
    in_tornado_band: bool


def spectrum_exponent_relation(d_sigma: float) -> SpectrumExponent:
    """Spectral decay exponent ``gamma`` with ``E(k) ~ k**-gamma`` for cross-section dimension ``d_sigma``."""
    if not 0 < d_sigma <= 2:
        raise ValidationError(f"cross-section dimension {d_sigma} outside (0, 2]")
    gamma = d_sigma + 1.0
    # the band test is done on d_sigma so rounding in the sum cannot move it
    return SpectrumExponent(gamma, 1.0 < d_sigma <= 2.0)


def cross_section_dimension(gamma: float) -> float:
    if not 1 < gamma <= 3:
        raise ValidationError(f"spectral exponent {gamma} outside (1, 3]")
    return gamma - 1.0


def total_dimension(d_center: float, d_sigma: float):
    """``D_c + D_sigma``; the second item flags that additivity is assumed, not checked."""
    return d_center + d_sigma, True


def sheet_thickness_scaling(h, C):
    """Vortex area ``h**1.55`` and vorticity ``C/area`` for sheet thickness ``h``."""
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0) or C <= 0:
        raise ValidationError("sheet scaling needs h > 0 and C > 0")
    area = h ** SHEET_AREA_EXPONENT
    return area, C / area
