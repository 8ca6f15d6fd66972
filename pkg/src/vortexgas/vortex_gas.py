"""Maximum-entropy statistics of a vortex gas over discrete (E, I) levels.

The entropy ``S = -sum p_j ln p_j`` is maximized subject to fixed mean
energy and mean moment of inertia, which gives

    p_j = exp(-beta*E_j - gamma*I_j) / Z,    Z = sum_j exp(-beta*E_j - gamma*I_j).

The normalization multiplier never appears on its own: it is absorbed into
``Z``. ``beta`` and ``gamma`` are found by damped Newton on the convex dual
``ln Z + beta*<E> + gamma*<I>``, whose Hessian is the covariance of (E, I).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegeneracyError, InfeasibleError, RangeError, ValidationError

HULL_MARGIN = 1e-9
NEWTON_TOL = 1e-10


@dataclass(frozen=True)
class EnsembleSpec:
    energies: np.ndarray
    inertias: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.energies, dtype=float).ravel()
        I = np.zeros_like(E) if self.inertias is None else np.asarray(self.inertias, dtype=float).ravel()
        if E.size < 2:
            raise ValidationError("an ensemble needs at least two levels")
        if E.shape != I.shape:
            raise ValidationError("energies and inertias differ in length")
        if not (np.all(np.isfinite(E)) and np.all(np.isfinite(I))):
            raise ValidationError("levels must be finite")
        object.__setattr__(self, "energies", E)
        object.__setattr__(self, "inertias", I)

    @classmethod
    def from_energies(cls, energies):
        return cls(np.asarray(energies, dtype=float), None)

    @property
    def k(self):
        return self.energies.size

    @property
    def beta_identifiable(self):
        return np.ptp(self.energies) > 0

    @property
    def inertia_varies(self):
        return np.ptp(self.inertias) > 0


def _exponents(levels, beta, gamma):
    return -beta * levels.energies - gamma * levels.inertias


def log_partition_function(levels: EnsembleSpec, beta, gamma=0.0) -> float:
    x = _exponents(levels, beta, gamma)
    if not np.all(np.isfinite(x)):
        raise RangeError("non-finite Boltzmann exponent")
    m = x.max()
    return float(m + np.log(np.sum(np.exp(x - m))))


def partition_function(levels: EnsembleSpec, beta, gamma=0.0) -> float:
    """``Z = sum exp(-beta*E_j - gamma*I_j)``, evaluated with a max shift."""
    lz = log_partition_function(levels, beta, gamma)
    if lz > np.log(np.finfo(float).max):
        raise RangeError(f"partition function overflows (ln Z = {lz:.6g})")
    return float(np.exp(lz))


def probabilities(levels: EnsembleSpec, beta, gamma=0.0) -> np.ndarray:
    x = _exponents(levels, beta, gamma)
    if not np.all(np.isfinite(x)):
        raise RangeError("non-finite Boltzmann exponent")
    w = np.exp(x - x.max())
    return w / w.sum()


def entropy(p) -> float:
    """Shannon entropy with ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError("entropy needs a probability vector")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


@dataclass(frozen=True)
class MultiplierSolution:
    beta: float
    gamma: float
    Z: float
    log_Z: float
    p: np.ndarray
    S: float
    iterations: int

    @property
    def T(self) -> float:
        """Signed temperature; ``beta == 0`` maps to ``inf``."""
        return temperature(self.beta)


def temperature(beta: float) -> float:
    return float("inf") if beta == 0 else 1.0 / beta


def _check_feasible(levels, target, use_inertia):
    E, I = levels.energies, levels.inertias
    if not use_inertia:
        lo, hi = E.min(), E.max()
        margin = HULL_MARGIN * max(1.0, hi - lo)
        if not (lo + margin < target[0] < hi - margin):
            raise InfeasibleError(f"<E> = {target[0]} is not strictly inside ({lo}, {hi})")
        return
    pts = np.column_stack([E, I])
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegeneracyError("(E, I) levels are collinear; multipliers are not identifiable") from exc
    # hull.equations rows are (unit normal, offset) with normal.x + offset <= 0 inside
    dist = -(hull.equations[:, :2] @ np.asarray(target) + hull.equations[:, 2])
    scale = max(1.0, np.ptp(E), np.ptp(I))
    if dist.min() <= HULL_MARGIN * scale:
        raise InfeasibleError(f"target {tuple(target)} is not strictly inside the attainable moments")


def solve_multipliers(levels: EnsembleSpec, mean_energy: float, mean_inertia: float | None = None,
                      tol=NEWTON_TOL, max_iter=200) -> MultiplierSolution:
    """Lagrange multipliers reproducing ``<E>`` (and ``<I>`` if given).

    The inertia constraint is skipped when ``mean_inertia`` is None or when
    all ``I_j`` are equal. ``beta`` may come out negative.
    """
    if not levels.beta_identifiable:
        raise DegeneracyError("all energy levels are equal; beta is not identifiable")
    use_I = mean_inertia is not None and levels.inertia_varies
    if mean_inertia is not None and not levels.inertia_varies:
        if abs(mean_inertia - levels.inertias[0]) > HULL_MARGIN * max(1.0, abs(mean_inertia)):
            raise InfeasibleError("<I> differs from the single available inertia level")
    target = np.array([mean_energy, mean_inertia]) if use_I else np.array([mean_energy])
    _check_feasible(levels, target, use_I)

    F = np.column_stack([levels.energies, levels.inertias]) if use_I else levels.energies[:, None]
    lam = np.zeros(F.shape[1])

    def dual(l):
        x = -F @ l
        m = x.max()
        return m + np.log(np.sum(np.exp(x - m))) + l @ target

    it = 0
    for it in range(1, max_iter + 1):
        x = -F @ lam
        w = np.exp(x - x.max())
        p = w / w.sum()
        mean = p @ F
        grad = target - mean
        if np.linalg.norm(grad) < tol:
            break
        centered = F - mean
        hess = (centered * p[:, None]).T @ centered
        try:
            cond = np.linalg.cond(hess)
        except np.linalg.LinAlgError:
            cond = np.inf
        if not np.isfinite(cond) or cond > 1e14:
            raise DegeneracyError("moment covariance is singular; levels are degenerate")
        step = -np.linalg.solve(hess, grad)
        f0 = dual(lam)
        slope = grad @ step
        t = 1.0
        # once the predicted decrease is below roundoff in f the Armijo test is
        # meaningless; Newton is then in its quadratic regime and takes full steps
        if abs(slope) > 1e-12 * max(1.0, abs(f0)):
            while dual(lam + t * step) > f0 + 1e-4 * t * slope and t > 1e-12:
                t *= 0.5
        lam = lam + t * step
    else:
        raise DegeneracyError(f"Newton did not converge in {max_iter} iterations")

    beta = float(lam[0])
    gamma = float(lam[1]) if use_I else 0.0
    p = probabilities(levels, beta, gamma)
    lz = log_partition_function(levels, beta, gamma)
    Z = float(np.exp(lz)) if lz < np.log(np.finfo(float).max) else float("inf")
    return MultiplierSolution(beta, gamma, Z, lz, p, entropy(p), it)


@dataclass(frozen=True)
class TemperatureCheck:
    beta: float
    dS_dE: float

    @property
    def gap(self):
        return abs(self.beta - self.dS_dE)


def temperature_identity_check(levels: EnsembleSpec, mean_energy: float, h: float,
                               mean_inertia: float | None = None) -> TemperatureCheck:
    """``beta`` beside the centered difference ``(S(<E>+h) - S(<E>-h)) / 2h``."""
    mid = solve_multipliers(levels, mean_energy, mean_inertia)
    try:
        lo = solve_multipliers(levels, mean_energy - h, mean_inertia)
        hi = solve_multipliers(levels, mean_energy + h, mean_inertia)
    except InfeasibleError as exc:
        raise InfeasibleError(f"step h = {h} leaves the feasible range: {exc}") from exc
    return TemperatureCheck(mid.beta, (hi.S - lo.S) / (2 * h))


SYSTEM_1_LOSES = "system-1-loses"
SYSTEM_2_LOSES = "system-2-loses"
EQUILIBRIUM = "equilibrium"


def heat_flow_direction(T1: float, T2: float) -> str:
    """Which of two combined systems gives up mean energy.

    Hotness runs 0+ -> +inf = -inf -> 0-, i.e. hotter means smaller
    ``beta = 1/T``. Infinite temperatures are accepted (``beta = 0``).
    """
    if T1 == 0 or T2 == 0:
        raise ValidationError("zero temperature is excluded")
    b1 = 0.0 if np.isinf(T1) else 1.0 / T1
    b2 = 0.0 if np.isinf(T2) else 1.0 / T2
    if b1 == b2:
        return EQUILIBRIUM
    return SYSTEM_2_LOSES if b2 < b1 else SYSTEM_1_LOSES
