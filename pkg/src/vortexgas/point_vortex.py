"""Point-vortex dynamics in the plane and the half-plane ``y > 0``.

Vortex ``j`` with circulation ``G_j`` induces at ``x`` the velocity

    V_j(x) = G_j / (2 pi r^2) * (y_j - y, -(x_j - x)),   r = |x - x_j|.

In the half-plane every vortex has a mirror image at ``(x_j, -y_j)`` with
circulation ``-G_j``; images are never stored, only summed on the fly.
Time stepping is classical fixed-step RK4 run inside a numba kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import IntegrationAbort, SingularityError, ValidationError

FULL_PLANE = "full"
HALF_PLANE = "half"


@dataclass(frozen=True)
class PointVortex:
    x: float
    y: float
    gamma: float

    def __post_init__(self):
        if self.gamma == 0:
            raise ValidationError("point vortex circulation must be non-zero")
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.gamma)):
            raise ValidationError("point vortex position and circulation must be finite")


@dataclass(frozen=True)
class VortexSystem:
    vortices: tuple[PointVortex, ...]
    domain: str = FULL_PLANE
    core: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "vortices", tuple(self.vortices))
        if not self.vortices:
            raise ValidationError("a vortex system needs at least one vortex")
        if self.domain not in (FULL_PLANE, HALF_PLANE):
            raise ValidationError(f"unknown domain {self.domain!r}")
        if self.core < 0:
            raise ValidationError("core cutoff must be >= 0")
        pos = self.positions
        if self.domain == HALF_PLANE and np.any(pos[:, 1] <= 0):
            raise ValidationError("half-plane vortices must lie strictly above y = 0")
        if len(pos) > 1:
            d = _pair_distances(pos)
            if np.min(d[np.triu_indices(len(pos), 1)]) == 0:
                raise ValidationError("two vortices coincide")

    @classmethod
    def from_arrays(cls, positions, gammas, domain=FULL_PLANE, core=0.0):
        pos = np.asarray(positions, dtype=float).reshape(-1, 2)
        gam = np.broadcast_to(np.asarray(gammas, dtype=float), (len(pos),))
        return cls(tuple(PointVortex(float(x), float(y), float(g)) for (x, y), g in zip(pos, gam)),
                   domain, core)

    @property
    def positions(self):
        return np.array([[v.x, v.y] for v in self.vortices])

    @property
    def gammas(self):
        return np.array([v.gamma for v in self.vortices])

    @property
    def n(self):
        return len(self.vortices)

    def with_positions(self, positions):
        return VortexSystem.from_arrays(positions, self.gammas, self.domain, self.core)

    def with_gammas(self, gammas):
        return VortexSystem.from_arrays(self.positions, gammas, self.domain, self.core)


def _pair_distances(pos):
    diff = pos[:, None, :] - pos[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def induced_velocity(system: VortexSystem, point, exclude=None):
    """Velocity ``(u, v)`` at ``point`` from all vortices (and images) but ``exclude``."""
    px, py = float(point[0]), float(point[1])
    if not (math.isfinite(px) and math.isfinite(py)):
        raise ValidationError("evaluation point must be finite")
    core2 = system.core ** 2
    u = v = 0.0
    sources = [(j, vx.x, vx.y, vx.gamma) for j, vx in enumerate(system.vortices)]
    if system.domain == HALF_PLANE:
        sources += [(None, vx.x, -vx.y, -vx.gamma) for vx in system.vortices]
    for j, xj, yj, gj in sources:
        if j is not None and j == exclude:
            continue
        dx, dy = xj - px, yj - py
        r2 = dx * dx + dy * dy
        if r2 == 0.0 and core2 == 0.0:
            raise SingularityError(f"point {point} coincides with vortex {j}")
        r2 = max(r2, core2)
        u += gj * dy / (2 * np.pi * r2)
        v += -gj * dx / (2 * np.pi * r2)
    return u, v


@njit(cache=True)
def _rhs(pos, gam, half, core2, out):
    n = pos.shape[0]
    for i in range(n):
        u = 0.0
        v = 0.0
        xi = pos[i, 0]
        yi = pos[i, 1]
        for j in range(n):
            if half:
                dx = pos[j, 0] - xi
                dy = -pos[j, 1] - yi
                r2 = max(dx * dx + dy * dy, core2)
                u -= gam[j] * dy / r2
                v += gam[j] * dx / r2
            if j == i:
                continue
            dx = pos[j, 0] - xi
            dy = pos[j, 1] - yi
            r2 = max(dx * dx + dy * dy, core2)
            u += gam[j] * dy / r2
            v -= gam[j] * dx / r2
        out[i, 0] = u / (2.0 * np.pi)
        out[i, 1] = v / (2.0 * np.pi)


@njit(cache=True)
def _check(pos, half, min_dist):
    # 0 ok, 1 near collision, 2 left the half-plane, 3 non-finite
    n = pos.shape[0]
    for i in range(n):
        if not (np.isfinite(pos[i, 0]) and np.isfinite(pos[i, 1])):
            return 3
        if half and pos[i, 1] <= 0.0:
            return 2
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            d = np.sqrt(dx * dx + dy * dy)
            if d <= min_dist:
                return 1
    return 0


@njit(cache=True)
def _rk4(pos, gam, half, core2, dt, nsteps, record_every, frames, min_dist):
    """Integrate in place; returns (status, step at which it stopped)."""
    n = pos.shape[0]
    k1 = np.empty((n, 2))
    k2 = np.empty((n, 2))
    k3 = np.empty((n, 2))
    k4 = np.empty((n, 2))
    tmp = np.empty((n, 2))
    frames[0] = pos
    for step in range(1, nsteps + 1):
        _rhs(pos, gam, half, core2, k1)
        for i in range(n):
            for a in range(2):
                tmp[i, a] = pos[i, a] + 0.5 * dt * k1[i, a]
        _rhs(tmp, gam, half, core2, k2)
        for i in range(n):
            for a in range(2):
                tmp[i, a] = pos[i, a] + 0.5 * dt * k2[i, a]
        _rhs(tmp, gam, half, core2, k3)
        for i in range(n):
            for a in range(2):
                tmp[i, a] = pos[i, a] + dt * k3[i, a]
        _rhs(tmp, gam, half, core2, k4)
        for i in range(n):
            for a in range(2):
                pos[i, a] += dt / 6.0 * (k1[i, a] + 2.0 * k2[i, a] + 2.0 * k3[i, a] + k4[i, a])
        status = _check(pos, half, min_dist)
        if status != 0:
            return status, step
        if step % record_every == 0:
            frames[step // record_every] = pos
    return 0, nsteps


def velocities(system: VortexSystem):
    """Right-hand side of the vortex ODEs, shape ``(n, 2)``."""
    out = np.empty((system.n, 2))
    _rhs(system.positions, system.gammas, system.domain == HALF_PLANE, system.core ** 2, out)
    return out


def hamiltonian(system: VortexSystem) -> float:
    """``-1/(4 pi) sum_{i != j} G_i G_j ln|x_i - x_j|`` plus image terms in the half-plane.

    The half-plane adds ``+1/(4 pi) sum_{i,j} G_i G_j ln|x_i - xbar_j|`` with
    ``xbar`` the mirror point, which makes ``G_i dx_i/dt = dH/dy_i`` hold there too.
    """
    return float(_hamiltonian_frames(system.positions[None], system.gammas, system.domain)[0])


def _hamiltonian_frames(frames, gam, domain):
    frames = np.asarray(frames, dtype=float)
    n = frames.shape[1]
    gg = gam[:, None] * gam[None, :]
    iu = np.triu_indices(n, 1)
    diff = frames[:, :, None, :] - frames[:, None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    if n > 1 and np.any(r[:, iu[0], iu[1]] == 0):
        raise SingularityError("coincident vortices make the Hamiltonian singular")
    H = -2.0 / (4 * np.pi) * np.sum(gg[iu] * np.log(r[:, iu[0], iu[1]]), axis=1) if n > 1 else np.zeros(len(frames))
    if domain == HALF_PLANE:
        mirror = frames * np.array([1.0, -1.0])
        d = frames[:, :, None, :] - mirror[:, None, :, :]
        rb = np.hypot(d[..., 0], d[..., 1])
        H = H + np.sum(gg[None] * np.log(rb), axis=(1, 2)) / (4 * np.pi)
    return H


@dataclass(frozen=True)
class Conserved:
    gamma_total: float
    center: tuple[float, float] | None
    inertia: float
    center_undefined: bool = False


def conserved_quantities(system: VortexSystem, tol=1e-12) -> Conserved:
    """Total circulation, center of vorticity and moment of inertia.

    When the total circulation vanishes the center is reported as ``None``
    and the moment of inertia is taken about the plain centroid instead.
    """
    return _conserved(system.positions, system.gammas, tol)


def _conserved(pos, gam, tol=1e-12):
    G = float(gam.sum())
    if abs(G) <= tol * np.abs(gam).sum():
        c = pos.mean(axis=0)
        I = float(np.sum(gam * np.sum((pos - c) ** 2, axis=1)))
        return Conserved(G, None, I, True)
    M = (gam[:, None] * pos).sum(axis=0) / G
    I = float(np.sum(gam * np.sum((pos - M) ** 2, axis=1)))
    return Conserved(G, (float(M[0]), float(M[1])), I, False)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (n_times, n_vortices, 2)
    gammas: np.ndarray
    domain: str
    H: np.ndarray
    gamma_total: np.ndarray
    Mx: np.ndarray
    My: np.ndarray
    I: np.ndarray
    wall_impulse: np.ndarray = field(repr=False)

    @property
    def n_vortices(self):
        return self.positions.shape[1]

    def final_system(self, core=0.0):
        return VortexSystem.from_arrays(self.positions[-1], self.gammas, self.domain, core)


def _diagnostics(frames, gam, domain):
    H = _hamiltonian_frames(frames, gam, domain)
    G = float(gam.sum())
    Gt = np.full(len(frames), G)
    if abs(G) > 1e-12 * np.abs(gam).sum():
        M = np.einsum("j,tja->ta", gam, frames) / G
    else:
        M = np.full((len(frames), 2), np.nan)
    center = np.where(np.isnan(M), frames.mean(axis=1), M)
    I = np.einsum("j,tj->t", gam, np.sum((frames - center[:, None, :]) ** 2, axis=2))
    wall = np.einsum("j,tj->t", gam, frames[:, :, 1])
    return H, Gt, M[:, 0], M[:, 1], I, wall


def integrate(system: VortexSystem, dt: float, t_end: float, record_every: int = 1) -> Trajectory:
    """RK4 trajectory from ``t = 0`` to ``t_end``.

    The step is shrunk to ``t_end / ceil(t_end / dt)`` so the run lands on
    ``t_end`` exactly. Raises :class:`IntegrationAbort` on a near collision
    (pair closer than ``core/10``, or coincident when ``core == 0``) or when a
    half-plane vortex reaches the wall.
    """
    if not (dt > 0 and t_end > 0):
        raise ValidationError("integrate needs dt > 0 and t_end > 0")
    if record_every < 1:
        raise ValidationError("record_every must be >= 1")
    nsteps = max(1, math.ceil(t_end / dt - 1e-9))
    h = t_end / nsteps
    n_frames = nsteps // record_every + 1
    frames = np.zeros((n_frames, system.n, 2))
    pos = system.positions.copy()
    gam = system.gammas
    status, stop = _rk4(pos, gam, system.domain == HALF_PLANE, system.core ** 2, h, nsteps,
                        record_every, frames, system.core / 10.0)
    if status:
        t_stop = stop * h
        reason = {1: "near collision", 2: "vortex reached the wall", 3: "non-finite state"}[status]
        raise IntegrationAbort(f"{reason} at t = {t_stop:.6g} s", t_stop)
    times = h * record_every * np.arange(n_frames)
    H, Gt, Mx, My, I, wall = _diagnostics(frames, gam, system.domain)
    return Trajectory(times, frames, gam.copy(), system.domain, H, Gt, Mx, My, I, wall)


def relative_drift(trace, scale=0.0) -> float:
    """``max|q(t) - q(0)| / max(|q(0)|, scale)``."""
    q = np.asarray(trace, dtype=float)
    return float(np.max(np.abs(q - q[0])) / max(abs(q[0]), scale))


def drift_report(traj: Trajectory) -> dict:
    """Relative drift of H, total circulation, center of vorticity and inertia.

    Each quantity is normalized by ``max(|q(0)|, natural scale)`` so that a
    value that happens to start near zero does not blow up the ratio.
    """
    gam = traj.gammas
    pos0 = traj.positions[0]
    n = len(gam)
    gg = np.abs(gam[:, None] * gam[None, :])
    h_scale = (gg.sum() - np.trace(gg)) / (4 * np.pi)
    length = float(np.sqrt(np.mean(np.sum((pos0 - pos0.mean(axis=0)) ** 2, axis=1)))) or 1.0
    i_scale = float(np.sum(np.abs(gam) * np.sum((pos0 - pos0.mean(axis=0)) ** 2, axis=1)))
    out = {
        "H": relative_drift(traj.H, h_scale if n > 1 else 1.0),
        "Gamma": relative_drift(traj.gamma_total, np.abs(gam).sum()),
        "I": relative_drift(traj.I, i_scale),
    }
    if traj.domain == FULL_PLANE and np.all(np.isfinite(traj.Mx)):
        M = np.column_stack([traj.Mx, traj.My])
        dM = np.max(np.linalg.norm(M - M[0], axis=1))
        out["M"] = float(dM / max(np.linalg.norm(M[0]), length))
    out["wall_impulse"] = relative_drift(traj.wall_impulse, np.abs(gam).sum() * length)
    return out


def characteristic_period(system: VortexSystem) -> float:
    """Co-rotation period ``2 pi^2 d^2 / G`` of the closest pair, with ``G`` the largest |circulation|."""
    pos = system.positions
    if system.n < 2:
        return 1.0
    d = _pair_distances(pos)[np.triu_indices(system.n, 1)].min()
    return 2 * np.pi ** 2 * d ** 2 / np.abs(system.gammas).max()


def corotation_period(gamma, d):
    """Period of an equal pair of circulation ``gamma`` at separation ``d``."""
    return 2 * np.pi ** 2 * d ** 2 / gamma


def pair_translation_speed(gamma, d):
    """Speed of a counter-rotating pair ``+-gamma`` at separation ``d``."""
    return abs(gamma) / (2 * np.pi * d)


def init_vortex_sheet(n: int, spacing: float, gamma_each: float, orientation: float = 0.0,
                      origin=(0.0, 0.0), domain=FULL_PLANE, core=0.0) -> VortexSystem:
    """``n`` equal vortices at ``origin + i*spacing*(cos a, sin a)``, ``i = 0..n-1``."""
    if n < 1 or spacing <= 0:
        raise ValidationError("vortex sheet needs n >= 1 and spacing > 0")
    i = np.arange(n)
    pos = np.column_stack([origin[0] + i * spacing * np.cos(orientation),
                           origin[1] + i * spacing * np.sin(orientation)])
    return VortexSystem.from_arrays(pos, gamma_each, domain, core)


def winding_angle(traj: Trajectory, index: int, about=None) -> np.ndarray:
    """Unwrapped polar angle of one vortex about a moving center.

    ``about=None`` uses the center of vorticity of the whole system; a
    sequence of indices uses the center of vorticity of just those vortices
    (e.g. the tip cluster of a rolling-up sheet).
    """
    if about is None:
        center = np.column_stack([traj.Mx, traj.My])
    else:
        idx = np.asarray(about)
        g = traj.gammas[idx]
        center = np.einsum("j,tja->ta", g, traj.positions[:, idx, :]) / g.sum()
    rel = traj.positions[:, index, :] - center
    return np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))


def pulse_train_response(zeta0: float, gammas, period: float, t: float) -> float:
    """Vorticity after the pulses at ``i*period`` (``i = 1, 2, ...``) up to time ``t``.

    Reduced model: advection and tilting are dropped, so each pulse adds its
    jump ``gammas[i-1]`` (s^-1) to the vorticity.
    """
    if period <= 0:
        raise ValidationError("pulse period must be positive")
    if t < 0:
        raise ValidationError("time must be non-negative")
    jumps = np.asarray(gammas, dtype=float)
    elapsed = min(int(math.floor(t / period + 1e-12)), len(jumps))
    return float(zeta0 + jumps[:elapsed].sum())


def pulse_train_series(zeta0, gammas, period, times):
    return np.array([pulse_train_response(zeta0, gammas, period, t) for t in times])
