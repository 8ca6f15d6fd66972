"""Lattice vortex filament: a self-avoiding walk on Z^3 sampled by Metropolis.

Each unit step of the walk carries unit vorticity along the step direction.
The interaction energy is

    E = 1/(8 pi) * sum_i sum_{j != i} (w_i . w_j) / |m_i - m_j|

with ``m_i`` the segment midpoints; the constant self-energy is dropped.
The hot loops live in numba kernels. Midpoints are handled in doubled
integer coordinates (``2*m_i = s_i + s_{i+1}``) so they stay exact.

Move set (chosen uniformly by site index ``k`` and a code ``c`` in 0..5):

* end pivot (``k`` is an end): the terminal step is replaced by direction
  ``DIRS[c]``; picking the current direction is a null proposal;
* corner flip (interior ``k``, ``c`` in {0, 1}): site ``k`` of an L-shaped
  corner jumps to the opposite corner of the unit square;
* crankshaft (interior ``k``, ``c`` in {2, 3} / {4, 5}): sites ``k`` and
  ``k+1`` of a U-shaped span rotate +90 / -90 degrees about the axis through
  sites ``k-1`` and ``k+2``.

Every move is undone by a proposal with the same probability, so the
proposal kernel is symmetric.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ScaleRangeError, ValidationError
from .spectra import linear_fit

DIRS = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.int64)
ENERGY_PREFACTOR = 1.0 / (8.0 * np.pi)

MOVE_NONE, MOVE_END, MOVE_CORNER, MOVE_CRANK = 0, 1, 2, 3


# -- numba kernels ---------------------------------------------------------------

@njit(cache=True)
def _pair_term(sites, i, j, cutoff2):
    # segment i spans sites[i] -> sites[i+1]
    d2 = 0
    dot = 0
    for a in range(3):
        wi = sites[i + 1, a] - sites[i, a]
        wj = sites[j + 1, a] - sites[j, a]
        dot += wi * wj
        dm = (sites[i, a] + sites[i + 1, a]) - (sites[j, a] + sites[j + 1, a])
        d2 += dm * dm
    if dot == 0:
        return 0.0
    if cutoff2 > 0.0 and d2 > 4.0 * cutoff2:
        return 0.0
    return dot / (0.5 * np.sqrt(d2))


@njit(cache=True)
def _full_energy(sites, cutoff2):
    nseg = sites.shape[0] - 1
    total = 0.0
    for i in range(nseg):
        for j in range(i + 1, nseg):
            total += _pair_term(sites, i, j, cutoff2)
    return 2.0 * total / (8.0 * np.pi)


@njit(cache=True)
def _changed_energy(sites, seg_lo, seg_hi, cutoff2):
    # energy of all pairs with at least one segment in [seg_lo, seg_hi]
    nseg = sites.shape[0] - 1
    total = 0.0
    for i in range(seg_lo, seg_hi + 1):
        for j in range(nseg):
            if j == i:
                continue
            t = _pair_term(sites, i, j, cutoff2)
            if seg_lo <= j <= seg_hi:
                total += 0.5 * t
            else:
                total += t
    return 2.0 * total / (8.0 * np.pi)


@njit(cache=True)
def _is_free(sites, pos, skip_lo, skip_hi):
    n1 = sites.shape[0]
    for s in range(n1):
        if skip_lo <= s <= skip_hi:
            continue
        if sites[s, 0] == pos[0] and sites[s, 1] == pos[1] and sites[s, 2] == pos[2]:
            return False
    return True


@njit(cache=True)
def _propose(sites, k, c, dirs, new_pos):
    """Fill ``new_pos`` for a proposal; return (move kind, first moved site, count)."""
    n = sites.shape[0] - 1
    if k == 0 or k == n:
        anchor = 1 if k == 0 else n - 1
        same = True
        for a in range(3):
            new_pos[0, a] = sites[anchor, a] + dirs[c, a]
            if new_pos[0, a] != sites[k, a]:
                same = False
        if same:
            return MOVE_NONE, k, 0
        if not _is_free(sites, new_pos[0], k, k):
            return MOVE_NONE, k, 0
        return MOVE_END, k, 1
    if c < 2:
        dot = 0
        for a in range(3):
            dot += (sites[k, a] - sites[k - 1, a]) * (sites[k + 1, a] - sites[k, a])
        if dot != 0:
            return MOVE_NONE, k, 0
        for a in range(3):
            new_pos[0, a] = sites[k - 1, a] + sites[k + 1, a] - sites[k, a]
        if not _is_free(sites, new_pos[0], k, k):
            return MOVE_NONE, k, 0
        return MOVE_CORNER, k, 1
    if k + 2 > n:
        return MOVE_NONE, k, 0
    ax = np.empty(3, dtype=np.int64)
    arm = np.empty(3, dtype=np.int64)
    norm1 = 0
    for a in range(3):
        ax[a] = sites[k + 2, a] - sites[k - 1, a]
        arm[a] = sites[k, a] - sites[k - 1, a]
        norm1 += abs(ax[a])
    if norm1 != 1:
        return MOVE_NONE, k, 0
    for a in range(3):
        if sites[k + 1, a] - sites[k, a] != ax[a]:
            return MOVE_NONE, k, 0
    sign = 1 if c < 4 else -1
    rot0 = sign * (ax[1] * arm[2] - ax[2] * arm[1])
    rot1 = sign * (ax[2] * arm[0] - ax[0] * arm[2])
    rot2 = sign * (ax[0] * arm[1] - ax[1] * arm[0])
    new_pos[0, 0] = sites[k - 1, 0] + rot0
    new_pos[0, 1] = sites[k - 1, 1] + rot1
    new_pos[0, 2] = sites[k - 1, 2] + rot2
    new_pos[1, 0] = sites[k + 2, 0] + rot0
    new_pos[1, 1] = sites[k + 2, 1] + rot1
    new_pos[1, 2] = sites[k + 2, 2] + rot2
    if not _is_free(sites, new_pos[0], k, k + 1) or not _is_free(sites, new_pos[1], k, k + 1):
        return MOVE_NONE, k, 0
    return MOVE_CRANK, k, 2


@njit(cache=True)
def _delta_energy(sites, first, count, new_pos, cutoff2):
    n = sites.shape[0] - 1
    seg_lo = max(first - 1, 0)
    seg_hi = min(first + count - 1, n - 1)
    old = _changed_energy(sites, seg_lo, seg_hi, cutoff2)
    saved = np.empty((2, 3), dtype=np.int64)
    for m in range(count):
        for a in range(3):
            saved[m, a] = sites[first + m, a]
            sites[first + m, a] = new_pos[m, a]
    new = _changed_energy(sites, seg_lo, seg_hi, cutoff2)
    for m in range(count):
        for a in range(3):
            sites[first + m, a] = saved[m, a]
    return new - old


@njit(cache=True)
def _metropolis_accept(beta, dE, u):
    x = -beta * dE
    if x >= 0.0:
        return True
    return u < np.exp(x)


@njit(cache=True)
def _run_block(sites, energy, beta, ks, cs, us, steps_per_sweep, sweep0, burn_in,
               record_every, rec_E, rec_R, rec_S, snapshots, snap_stride, cutoff2,
               check_every, step0):
    """Advance the chain over ``len(ks)`` proposals.

    Returns (energy, accepted, max_energy_error). Observables are written
    after every sweep whose global index ``sw`` satisfies
    ``sw >= burn_in`` and ``(sw - burn_in + 1) % record_every == 0``.
    """
    n = sites.shape[0] - 1
    new_pos = np.zeros((2, 3), dtype=np.int64)
    accepted = 0
    max_err = 0.0
    nsteps = ks.shape[0]
    for t in range(nsteps):
        kind, first, count = _propose(sites, ks[t], cs[t], DIRS, new_pos)
        if kind != MOVE_NONE:
            dE = _delta_energy(sites, first, count, new_pos, cutoff2)
            if _metropolis_accept(beta, dE, us[t]):
                for m in range(count):
                    for a in range(3):
                        sites[first + m, a] = new_pos[m, a]
                energy += dE
                accepted += 1
        gstep = step0 + t + 1
        if check_every > 0 and gstep % check_every == 0:
            err = abs(energy - _full_energy(sites, cutoff2))
            if err > max_err:
                max_err = err
        if (t + 1) % steps_per_sweep == 0:
            sw = sweep0 + (t + 1) // steps_per_sweep - 1
            if sw >= burn_in and (sw - burn_in + 1) % record_every == 0:
                r = (sw - burn_in + 1) // record_every - 1
                if r < rec_E.shape[0]:
                    rec_E[r] = energy
                    d2 = 0.0
                    for a in range(3):
                        d = sites[n, a] - sites[0, a]
                        d2 += d * d
                    rec_R[r] = np.sqrt(d2)
                    st = 0
                    for i in range(n - 1):
                        for a in range(3):
                            st += (sites[i + 1, a] - sites[i, a]) * (sites[i + 2, a] - sites[i + 1, a])
                    rec_S[r] = st / (n - 1)
                    if r % snap_stride == 0 and r // snap_stride < snapshots.shape[0]:
                        snapshots[r // snap_stride] = sites
    return energy, accepted, max_err




# -- walk type ---------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeWalk:
    sites: np.ndarray

    def __post_init__(self):
        s = np.array(self.sites, dtype=np.int64)
        if s.ndim != 2 or s.shape[1] != 3 or s.shape[0] < 2:
            raise ValidationError("walk sites must be an (n+1, 3) integer array with n >= 1")
        steps = np.diff(s, axis=0)
        if not np.all(np.abs(steps).sum(axis=1) == 1):
            raise ValidationError("consecutive sites must differ by one unit step")
        if len(np.unique(s, axis=0)) != len(s):
            raise ValidationError("walk is not self-avoiding")
        s.flags.writeable = False
        object.__setattr__(self, "sites", s)

    @property
    def n_segments(self):
        return self.sites.shape[0] - 1

    @property
    def segments(self):
        return np.diff(self.sites, axis=0)

    @property
    def midpoints(self):
        return 0.5 * (self.sites[:-1] + self.sites[1:])

    def end_to_end(self):
        return float(np.linalg.norm(self.sites[-1] - self.sites[0]))

    def straightness(self):
        seg = self.segments
        return float(np.mean(np.sum(seg[:-1] * seg[1:], axis=1))) if len(seg) > 1 else 1.0

    def reversed(self):
        return LatticeWalk(self.sites[::-1].copy())

    def transformed(self, matrix, shift=(0, 0, 0)):
        m = np.asarray(matrix, dtype=np.int64)
        return LatticeWalk(self.sites @ m.T + np.asarray(shift, dtype=np.int64))


def straight_walk(n_segments, direction=(1, 0, 0)) -> LatticeWalk:
    d = np.asarray(direction, dtype=np.int64)
    return LatticeWalk(np.arange(n_segments + 1)[:, None] * d[None, :])


def pinned_walk(n_segments, end_distance) -> LatticeWalk:
    """Walk of ``n_segments`` steps whose ends sit ``end_distance`` apart on the x axis.

    Built as a rectangular detour: up ``m``, across ``end_distance``, down ``m``.
    """
    extra = n_segments - end_distance
    if end_distance < 1 or extra < 0 or extra % 2:
        raise ValidationError("need n_segments - end_distance even and non-negative")
    m = extra // 2
    pts = [(0, j, 0) for j in range(m + 1)]
    pts += [(i, m, 0) for i in range(1, end_distance + 1)]
    pts += [(end_distance, j, 0) for j in range(m - 1, -1, -1)]
    return LatticeWalk(np.array(pts))


def segment_set_energy(tails, heads) -> float:
    """Interaction energy of arbitrary unit segments ``tails[i] -> heads[i]``.

    Plain numpy; handy for segment sets that do not form a single walk.
    """
    a = np.asarray(tails, dtype=float)
    b = np.asarray(heads, dtype=float)
    w = b - a
    m = 0.5 * (a + b)
    dist = np.linalg.norm(m[:, None, :] - m[None, :, :], axis=2)
    if np.any(dist[~np.eye(len(m), dtype=bool)] == 0):
        raise ValidationError("two segments share a midpoint")
    np.fill_diagonal(dist, np.inf)
    return float(ENERGY_PREFACTOR * np.sum((w @ w.T) / dist))


def walk_energy(walk: LatticeWalk, cutoff=None) -> float:
    cutoff2 = 0.0 if cutoff is None else float(cutoff) ** 2
    return float(_full_energy(np.ascontiguousarray(walk.sites), cutoff2))


# -- single moves --------------------------------------------------------------------

@dataclass(frozen=True)
class Proposal:
    walk: LatticeWalk
    rejected: bool
    kind: int
    delta_energy: float = 0.0


def _propose_choice(walk, k, c, cutoff=None):
    sites = np.array(walk.sites)
    new_pos = np.zeros((2, 3), dtype=np.int64)
    kind, first, count = _propose(sites, int(k), int(c), DIRS, new_pos)
    if kind == MOVE_NONE:
        return Proposal(walk, True, kind)
    cutoff2 = 0.0 if cutoff is None else float(cutoff) ** 2
    dE = _delta_energy(sites, first, count, new_pos, cutoff2)
    sites[first:first + count] = new_pos[:count]
    return Proposal(LatticeWalk(sites), False, kind, float(dE))


def proposal_choices(walk: LatticeWalk, pinned=False):
    """All equally likely ``(k, c)`` proposal draws for ``walk``."""
    n = walk.n_segments
    ks = range(1, n) if pinned else range(n + 1)
    return [(k, c) for k in ks for c in range(6)]


def propose_move(walk: LatticeWalk, rng: np.random.Generator, pinned=False) -> Proposal:
    """One uniformly drawn local move; illegal moves come back flagged ``rejected``."""
    n = walk.n_segments
    k = rng.integers(1, n) if pinned else rng.integers(0, n + 1)
    c = rng.integers(0, 6)
    return _propose_choice(walk, k, c)


def metropolis_step(walk: LatticeWalk, beta: float, rng: np.random.Generator, pinned=False):
    """Propose a move and accept it with probability ``min(1, exp(-beta*dE))``.

    Returns ``(walk, accepted)``.
    """
    prop = propose_move(walk, rng, pinned)
    u = rng.random()
    if prop.rejected:
        return walk, False
    if _metropolis_accept(float(beta), prop.delta_energy, u):
        return prop.walk, True
    return walk, False


# -- chains ----------------------------------------------------------------------------

@dataclass(frozen=True)
class McConfig:
    beta: float
    n_segments: int = 50
    sweeps: int = 10_000
    burn_in: int = 2_000
    seed: int = 0
    record_every: int = 1
    cutoff: float | None = None
    pinned_distance: int | None = None
    n_snapshots: int = 200
    check_every: int = 0

    def __post_init__(self):
        if self.n_segments < 3:
            raise ValidationError("n_segments must be at least 3")
        if not (self.sweeps > self.burn_in >= 0):
            raise ValidationError("need sweeps > burn_in >= 0")
        if self.record_every < 1:
            raise ValidationError("record_every must be >= 1")
        if not np.isfinite(self.beta):
            raise ValidationError("beta must be finite")


@dataclass(frozen=True)
class AxisDimension:
    estimate: float
    ci: tuple[float, float]
    samples: int
    per_walk: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class McStats:
    config: McConfig
    energy_trace: np.ndarray = field(repr=False)
    ree_trace: np.ndarray = field(repr=False)
    straightness_trace: np.ndarray = field(repr=False)
    acceptance_rate: float
    mean_ree: float
    mean_straightness: float
    mean_energy: float
    axis_dimension: AxisDimension | None
    max_energy_error: float
    snapshots: np.ndarray = field(repr=False)
    final_walk: LatticeWalk = field(repr=False)

    def stderr(self, name, n_batches=20):
        return batch_stderr(getattr(self, name), n_batches)


def batch_stderr(trace, n_batches=20):
    """Standard error of the mean from non-overlapping batch means."""
    x = np.asarray(trace, dtype=float)
    b = len(x) // n_batches
    if b < 1:
        raise ValueError("trace too short for batch means")
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def make_rng(seed, stream=0):
    """Counter-based generator; distinct ``stream`` values give disjoint streams."""
    ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


def run_chain(config: McConfig, rng: np.random.Generator | None = None, block_sweeps=1000) -> McStats:
    """Metropolis chain from a straight (or pinned detour) walk.

    One sweep is ``n_segments`` proposals. Output is a deterministic function
    of ``config`` (including its seed).
    """
    n = config.n_segments
    if rng is None:
        rng = make_rng(config.seed)
    pinned = config.pinned_distance is not None
    walk = pinned_walk(n, config.pinned_distance) if pinned else straight_walk(n)
    sites = np.array(walk.sites)
    cutoff2 = 0.0 if config.cutoff is None else float(config.cutoff) ** 2
    energy = float(_full_energy(sites, cutoff2))

    n_rec = (config.sweeps - config.burn_in) // config.record_every
    rec_E = np.zeros(n_rec)
    rec_R = np.zeros(n_rec)
    rec_S = np.zeros(n_rec)
    snap_stride = max(1, n_rec // max(config.n_snapshots, 1))
    n_snap = min(config.n_snapshots, -(-n_rec // snap_stride)) if n_rec else 0
    snapshots = np.zeros((n_snap, n + 1, 3), dtype=np.int64)

    accepted = 0
    max_err = 0.0
    k_lo, k_hi = (1, n) if pinned else (0, n + 1)
    sweep = 0
    while sweep < config.sweeps:
        block = min(block_sweeps, config.sweeps - sweep)
        m = block * n
        ks = rng.integers(k_lo, k_hi, size=m)
        cs = rng.integers(0, 6, size=m)
        us = rng.random(m)
        energy, acc, err = _run_block(sites, energy, float(config.beta), ks, cs, us, n, sweep,
                                      config.burn_in, config.record_every, rec_E, rec_R, rec_S,
                                      snapshots, snap_stride, cutoff2, config.check_every, sweep * n)
        accepted += acc
        max_err = max(max_err, err)
        sweep += block

    axis = None
    if n_snap >= 3:
        try:
            axis = estimate_axis_dimension(snapshots, min_samples=1)
        except ScaleRangeError:
            axis = None
    return McStats(
        config=config,
        energy_trace=rec_E,
        ree_trace=rec_R,
        straightness_trace=rec_S,
        acceptance_rate=accepted / (config.sweeps * n),
        mean_ree=float(rec_R.mean()) if n_rec else float("nan"),
        mean_straightness=float(rec_S.mean()) if n_rec else float("nan"),
        mean_energy=float(rec_E.mean()) if n_rec else float("nan"),
        axis_dimension=axis,
        max_energy_error=max_err,
        snapshots=snapshots,
        final_walk=LatticeWalk(sites),
    )


def run_ensemble(config: McConfig, n_chains: int):
    """Independent chains on disjoint random streams derived from ``config.seed``."""
    return [run_chain(config, make_rng(config.seed, stream=c)) for c in range(n_chains)]


# -- axis dimension --------------------------------------------------------------------

def axis_box_sizes(n_segments):
    sizes = []
    s = 1
    while s <= n_segments / 4:
        sizes.append(s)
        s *= 2
    return np.asarray(sizes, dtype=float)


def walk_axis_dimension(sites, sizes=None) -> float:
    """Box-counting slope of one walk's site set over dyadic box sizes."""
    pts = np.asarray(sites.sites if isinstance(sites, LatticeWalk) else sites)
    n = pts.shape[0] - 1
    if sizes is None:
        sizes = axis_box_sizes(n)
    if len(sizes) < 3:
        raise ScaleRangeError(f"only {len(sizes)} box sizes available for a {n}-segment walk")
    lo = pts.min(axis=0)
    counts = [len(np.unique(np.floor((pts - lo) / s).astype(np.int64), axis=0)) for s in sizes]
    return linear_fit(np.log(1.0 / np.asarray(sizes)), np.log(counts)).slope


def estimate_axis_dimension(walks, min_samples=100, level=0.95) -> AxisDimension:
    """Ensemble-mean box-counting dimension of walk center lines with a normal CI."""
    walks = list(walks)
    if len(walks) < min_samples:
        raise ValidationError(f"{len(walks)} walks given; need at least {min_samples}")
    dims = np.array([walk_axis_dimension(w) for w in walks])
    mean = float(dims.mean())
    if len(dims) > 1:
        from scipy import stats
        half = stats.norm.ppf(0.5 + level / 2) * dims.std(ddof=1) / np.sqrt(len(dims))
    else:
        half = 0.0
    return AxisDimension(mean, (mean - half, mean + half), len(dims), dims)
