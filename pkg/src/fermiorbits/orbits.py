"""Electron orbits: level curves of the dispersion on planes orthogonal
to the magnetic field, traced on the universal cover.

Tracing never folds points into the torus: a trajectory is Closed only
if it returns to its start in R^3, OpenPeriodic if it returns up to a
nonzero reciprocal-lattice translation, and otherwise classified from
windowed direction statistics of the traced chain.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import _kernels as K
from . import dispersion as dsp
from .lattice import FieldDirection, Irrationality, classify_direction, default_basis


class SeedOffSurface(ValueError):
    """Newton projection of the seed onto the constraint set failed."""


class StepCollapse(RuntimeError):
    """Curvature forced the step below min_step (near-singular orbit)."""


class NotDirected(ValueError):
    """Mean direction requested for a non-directed trajectory."""


class NonConnectedDetection(UserWarning):
    """Open-orbit energies detected non-connected at scan resolution."""


class TrajectoryClass(Enum):
    Closed = "closed"
    OpenPeriodic = "open_periodic"
    OpenQuasiperiodic = "open_quasiperiodic"
    ChaoticDirected = "chaotic_directed"
    ChaoticWandering = "chaotic_wandering"
    Singular = "singular"
    Undecided = "undecided"


DIRECTED = (TrajectoryClass.OpenPeriodic, TrajectoryClass.OpenQuasiperiodic,
            TrajectoryClass.ChaoticDirected)
STABLE_OPEN = (TrajectoryClass.OpenPeriodic, TrajectoryClass.OpenQuasiperiodic)


@dataclass(frozen=True)
class StepControls:
    """Predictor-corrector stepping knobs (cell units / radians)."""

    step_init: float = 0.02
    min_step: float = 1e-7
    max_step: float = 0.06
    max_turn: float = 0.45
    trace_tol: float = 1e-9
    closure_tol: float = 1e-6
    record_ds: float = 0.02
    critical_radius: float = 1e-3

    @property
    def singular_sin_tol(self):
        # angle between grad(eps) and the field covector below which the
        # point counts as inside the critical neighborhood
        return 20.0 * self.critical_radius


@dataclass(frozen=True)
class ClassifyThresholds:
    """Decision thresholds for the orbit classifier."""

    min_arc: float = 100.0
    dir_tol: float = 1e-2
    growth_factor: float = 1.5
    wander_spread: float = 0.5
    wander_growth: float = 1.25


@dataclass(frozen=True)
class PlaneSlice:
    """A plane orthogonal to B at height h = B.p, with an in-plane frame."""

    b: FieldDirection
    h: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        u.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)


def make_slice(b, h, eta_hint=None) -> PlaneSlice:
    """Build a slice frame; the x-axis follows the known mean open-orbit
    direction when given, otherwise a fixed axis-based rule."""
    if not isinstance(b, FieldDirection):
        b = FieldDirection(np.asarray(b, dtype=float))
    n = b.unit
    if eta_hint is not None:
        u = np.asarray(eta_hint, dtype=float)
        u = u - (u @ n) * n
    else:
        pick = np.argmin(np.abs(n))
        u = np.zeros(3)
        u[pick] = 1.0
        u = u - (u @ n) * n
    u = u / np.linalg.norm(u)
    v = np.cross(n, u)
    return PlaneSlice(b=b, h=float(h), u=u, v=v)


@dataclass
class Trajectory:
    """A traced orbit: ordered chain on the universal cover plus labels."""

    slice: PlaneSlice
    points: np.ndarray           # (N, 3) fractional, universal cover
    arc_length: float
    cls: TrajectoryClass
    eta: np.ndarray | None = None
    strip_width: float | None = None
    period_vector: tuple | None = None
    status: str = ""

    def points_cartesian(self, basis=None):
        basis = basis or default_basis()
        return self.points @ basis.reciprocal


def _model_arrays(model):
    return model.freqs.astype(np.float64), model.amps, float(model.offset)


def trace(model, level, slice_: PlaneSlice, seed_point, max_arc: float = 1e4,
          step_ctrl: StepControls | None = None,
          thresholds: ClassifyThresholds | None = None,
          basis=None, early_stop: bool = False, orientation: float = 1.0,
          chain_buffer: np.ndarray | None = None) -> Trajectory:
    """Trace the orbit through ``seed_point`` on the given slice.

    The seed is first Newton-projected onto {eps = level, B.p = h}.
    Tracing runs the tangent predictor along grad(eps) x B with a
    two-constraint Newton corrector, adaptive steps, and stops on
    closure (in R^3 or modulo the reciprocal lattice), on entering a
    critical-point neighborhood, or at the arc budget.

    Raises SeedOffSurface and StepCollapse per the stepping contract.
    """
    sc = step_ctrl or StepControls()
    th = thresholds or ClassifyThresholds()
    basis = basis or default_basis()
    lvl = dsp.as_level(level)
    d = basis.height_covector(slice_.b.unit)
    orient = float(orientation) * np.sign(np.linalg.det(basis.reciprocal))
    freqs, amps, offset = _model_arrays(model)

    cap = int(max_arc / sc.record_ds) + 64
    chain = chain_buffer if chain_buffer is not None and chain_buffer.shape[0] >= cap \
        else np.empty((cap, 3))
    status, npts, arc, m0, m1, m2 = K.trace_kernel(
        freqs, amps, offset, lvl.value, d, slice_.h,
        np.asarray(seed_point, dtype=float).copy(), orient,
        float(max_arc), sc.step_init, sc.min_step, sc.max_step,
        np.cos(sc.max_turn), sc.trace_tol, model.amplitude_scale(),
        sc.closure_tol, sc.singular_sin_tol, sc.record_ds,
        1 if early_stop else 0, th.min_arc, th.dir_tol, th.growth_factor,
        chain)

    if status == K.STATUS_SEED_FAIL:
        raise SeedOffSurface(f"seed {seed_point} does not project onto the orbit set")
    if status == K.STATUS_STEP_COLLAPSE:
        raise StepCollapse(f"step collapsed after arc {arc:.3g}")

    pts = chain[:npts].copy()
    traj = Trajectory(slice=slice_, points=pts, arc_length=float(arc),
                      cls=TrajectoryClass.Undecided, status=_status_name(status))

    if status == K.STATUS_CLOSED:
        traj.cls = TrajectoryClass.Closed
        return traj
    if status == K.STATUS_PERIODIC:
        traj.cls = TrajectoryClass.OpenPeriodic
        traj.period_vector = (int(m0), int(m1), int(m2))
        traj.eta, traj.strip_width = mean_direction_and_strip(traj, basis=basis)
        return traj

    cart = pts @ basis.reciprocal
    cls, eta, strip = classify_chain(cart, float(arc), th)
    if status == K.STATUS_SINGULAR and cls not in DIRECTED:
        # entered a critical-point neighborhood before showing directed
        # structure: a separatrix stub.  A directed orbit that merely
        # grazes a saddle after many periods keeps its classification.
        traj.cls = TrajectoryClass.Singular
        return traj
    traj.cls = cls
    traj.eta = eta
    traj.strip_width = strip
    return traj


def _status_name(status):
    return {K.STATUS_BUDGET: "budget", K.STATUS_CLOSED: "closed",
            K.STATUS_PERIODIC: "periodic", K.STATUS_SINGULAR: "singular",
            K.STATUS_CHAIN_FULL: "chain_full", K.STATUS_OPEN_EARLY: "open_early",
            K.STATUS_STUCK: "stuck"}.get(status, str(status))


def classify_chain(points, arc_length, thresholds: ClassifyThresholds | None = None):
    """Classify a traced (or synthetic) chain of points.

    Returns (TrajectoryClass, eta or None, strip_width or None).  The
    decision procedure: quarter-window directions agreeing within
    dir_tol mean a directed orbit, whose transverse extent then
    separates strip-confined from unboundedly growing; non-converging
    directions with extent growing along both in-plane axes mean a
    wandering orbit; anything else within budget stays Undecided.
    """
    th = thresholds or ClassifyThresholds()
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n < 16 or arc_length < th.min_arc:
        return TrajectoryClass.Undecided, None, None

    quarts = [pts[0], pts[n // 4], pts[n // 2], pts[(3 * n) // 4], pts[-1]]
    wins = np.array([quarts[i + 1] - quarts[i] for i in range(4)])
    norms = np.linalg.norm(wins, axis=1)
    if np.any(norms == 0.0):
        return TrajectoryClass.Undecided, None, None
    units = wins / norms[:, None]
    dots = units @ units.T
    spread = float(np.arccos(np.clip(dots.min(), -1.0, 1.0)))

    if spread <= th.dir_tol:
        eta, strip, half_ext, full_ext = _direction_and_extents(pts)
        if full_ext > th.growth_factor * half_ext + 1e-9:
            return TrajectoryClass.ChaoticDirected, eta, strip
        return TrajectoryClass.OpenQuasiperiodic, eta, strip

    # not directed: wandering only when the chain keeps spreading along
    # both in-plane principal axes
    if spread > th.wander_spread:
        c = pts - pts.mean(axis=0)
        _, _, vt = np.linalg.svd(c, full_matrices=False)
        half = pts[: n // 2] - pts[0]
        full = pts - pts[0]
        grow = 0
        for axis in vt[:2]:
            e_half = np.abs(half @ axis).max()
            e_full = np.abs(full @ axis).max()
            if e_full > th.wander_growth * e_half + 1e-9:
                grow += 1
        if grow == 2:
            return TrajectoryClass.ChaoticWandering, None, None
    return TrajectoryClass.Undecided, None, None


def _direction_and_extents(pts):
    rel = pts - pts[0]
    c = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    eta = vt[0]
    if eta @ rel[-1] < 0:
        eta = -eta
    dev = rel - np.outer(rel @ eta, eta)
    dn = np.linalg.norm(dev, axis=1)
    n = pts.shape[0]
    half_ext = float(dn[: n // 2].max())
    full_ext = float(dn.max())
    return eta, 2.0 * full_ext, half_ext, full_ext


def classify(traj: Trajectory, thresholds: ClassifyThresholds | None = None,
             basis=None) -> TrajectoryClass:
    """(Re)classify a trajectory in progress from its chain."""
    if traj.cls in (TrajectoryClass.Closed, TrajectoryClass.OpenPeriodic,
                    TrajectoryClass.Singular):
        return traj.cls
    basis = basis or default_basis()
    cls, eta, strip = classify_chain(traj.points @ basis.reciprocal,
                                     traj.arc_length, thresholds)
    traj.cls = cls
    if eta is not None:
        traj.eta, traj.strip_width = eta, strip
    return cls


def mean_direction_and_strip(traj: Trajectory, basis=None):
    """Mean direction (unit, Cartesian p-space) and strip width.

    For OpenPeriodic orbits the direction is the exact normalized image
    of the period vector; otherwise the least-squares principal axis of
    the chain.  Strip width is twice the maximal transverse deviation
    from the line through the first point along eta.
    """
    if traj.cls not in DIRECTED:
        raise NotDirected(f"trajectory is {traj.cls.value}")
    basis = basis or default_basis()
    cart = traj.points @ basis.reciprocal
    if traj.cls is TrajectoryClass.OpenPeriodic and traj.period_vector is not None:
        eta = np.asarray(traj.period_vector, dtype=float) @ basis.reciprocal
        eta = eta / np.linalg.norm(eta)
        if eta @ (cart[-1] - cart[0]) < 0:
            eta = -eta
    else:
        eta, _, _, _ = _direction_and_extents(cart)
    rel = cart - cart[0]
    dev = rel - np.outer(rel @ eta, eta)
    width = 2.0 * float(np.linalg.norm(dev, axis=1).max())
    return eta, width


def real_space_projection(traj: Trajectory, basis=None):
    """In-plane coordinates of the coordinate-space orbit: the p-space
    chain rotated by pi/2 about B (overall scale dimensionless).

    Returns an (N, 2) array in the slice frame (u, v)."""
    basis = basis or default_basis()
    cart = traj.points @ basis.reciprocal
    rel = cart - cart[0]
    a = rel @ traj.slice.u
    b = rel @ traj.slice.v
    return np.column_stack([-b, a])


# ---------------------------------------------------------------------------
# seeding

@dataclass(frozen=True)
class Budgets:
    """Trace and search budgets for direction probes and scans."""

    max_arc: float = 1e4
    max_total_arc: float = 6e4
    plane_count: int = 10
    seeds_per_plane: int = 4
    max_traces: int = 120
    max_open_families: int = 0  # 0 = unlimited; > 0 stops seeding early
    crit_grid_n: int = 20
    crit_h_offsets: tuple = (0.004, 0.02)
    patch_width: float = 2.2
    patch_grid: int = 40
    height_bound: int = 12
    rational_tol: float = 1e-7
    interval_grid_n: int = 24
    dedup_tol: float = 0.02


def _plane_frame(d):
    dhat = d / np.linalg.norm(d)
    pick = np.argmin(np.abs(dhat))
    a = np.zeros(3)
    a[pick] = 1.0
    a = a - (a @ dhat) * dhat
    a /= np.linalg.norm(a)
    return a, np.cross(dhat, a)


def plane_seed_candidates(model, level, d, h, patch_width=2.2, grid_k=40):
    """Points of {eps = level} on the plane d.x = h inside a patch around
    the plane anchor, found by sign scanning plus bisection and one
    in-plane Newton polish."""
    lvl = dsp.as_level(level)
    u, v = _plane_frame(d)
    anchor = h * d / (d @ d)
    s = np.linspace(-patch_width / 2, patch_width / 2, grid_k)
    sg, tg = np.meshgrid(s, s, indexing="ij")
    pts = anchor + sg[..., None] * u + tg[..., None] * v
    vals = dsp.evaluate(model, pts) - lvl.value
    sign = vals >= 0
    cross = sign[:-1, :] != sign[1:, :]
    ii, jj = np.nonzero(cross)
    if ii.size == 0:
        return np.empty((0, 3))
    lo = pts[ii, jj]
    hi = pts[ii + 1, jj]
    flo = vals[ii, jj]
    for _ in range(13):
        mid = 0.5 * (lo + hi)
        fm = dsp.evaluate(model, mid) - lvl.value
        same = (fm >= 0) == (flo >= 0)
        lo = np.where(same[:, None], mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same[:, None], hi, mid)
    mid = 0.5 * (lo + hi)
    r = dsp.evaluate(model, mid) - lvl.value
    slope = np.einsum("ij,j->i", dsp.gradient(model, mid), u)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(np.abs(slope) > 1e-12, r / slope, 0.0)
    step = patch_width / (grid_k - 1)
    corr = np.clip(corr, -step, step)
    return mid - corr[:, None] * u


class _VoxelDedup:
    """Folded-point proximity index over already-traced trajectories,
    hashed on a cubic voxel grid of pitch ~tol."""

    def __init__(self, tol):
        self.res = max(int(round(1.0 / max(tol, 1e-3))), 8)
        self.vox: dict = {}

    def _key(self, p):
        r = self.res
        return (int(p[0] * r) % r, int(p[1] * r) % r, int(p[2] * r) % r)

    def add(self, traj):
        pts = traj.points
        step = max(1, pts.shape[0] // 400)
        folded = pts[::step] % 1.0
        for p in folded:
            self.vox[self._key(p)] = True

    def match(self, point):
        p = np.asarray(point, dtype=float) % 1.0
        r = self.res
        i0, j0, k0 = self._key(p)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for dk in (-1, 0, 1):
                    if ((i0 + di) % r, (j0 + dj) % r, (k0 + dk) % r) in self.vox:
                        return True
        return False


_GRID_CACHE: dict = {}


def _near_level_grid(model, level, grid_n):
    """Cached grid points near the level with their gradients; shared by
    every direction probe on the same model and level."""
    key = (model.freqs.tobytes(), model.amps.tobytes(), model.offset,
           float(dsp.as_level(level).value), grid_n)
    hit = _GRID_CACHE.get(key)
    if hit is not None:
        return hit
    t = np.arange(grid_n) / grid_n
    pts = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
    vals = dsp.evaluate(model, pts)
    scale = max(model.amplitude_scale(), 1e-30)
    near = np.abs(vals - dsp.as_level(level).value) < 0.08 * scale
    pts = pts[near]
    grads = dsp.gradient(model, pts)
    gn = np.linalg.norm(grads, axis=1)
    keep = gn > 1e-10
    entry = (pts[keep], grads[keep] / gn[keep, None])
    if len(_GRID_CACHE) > 8:
        _GRID_CACHE.clear()
    _GRID_CACHE[key] = entry
    return entry


def approx_critical_heights(model, level, d, grid_n=24, align_cut=0.25,
                            max_heights=12):
    """Approximate heights of orbit-singular points from a grid scan
    (no Newton refinement; accurate enough to place seed planes)."""
    pts, ghat = _near_level_grid(model, level, grid_n)
    if pts.shape[0] == 0:
        return []
    dvec = np.asarray(d, dtype=float)
    dhat = dvec / np.linalg.norm(dvec)
    sin_align = np.linalg.norm(np.cross(ghat, dhat[None, :]), axis=1)
    mask = sin_align < align_cut
    if not mask.any():
        return []
    hs = np.sort(pts[mask] @ dvec)
    out = [float(hs[0])]
    for h in hs[1:]:
        if h - out[-1] > 0.03 * max(np.abs(dvec).max(), 1e-12):
            out.append(float(h))
    return out[:max_heights]


def seed_orbits(model, level, b, plane_count: int = 10, seeds_per_plane: int = 4,
                budgets: Budgets | None = None, basis=None,
                step_ctrl: StepControls | None = None,
                thresholds: ClassifyThresholds | None = None,
                early_stop: bool = True, crit_heights=None) -> list[Trajectory]:
    """Trace a covering set of orbits for one field direction.

    Planes just above and below every critical height (where open orbits
    hug separatrices) come first, then a stratified sample over one
    period of the height function; trajectories coinciding modulo the
    reciprocal lattice are deduplicated.  Seeding stops early when the
    per-direction arc budget or the requested number of open families
    is reached.
    """
    bud = budgets or Budgets()
    basis = basis or default_basis()
    sc = step_ctrl or StepControls()
    th = thresholds or ClassifyThresholds()
    if not isinstance(b, FieldDirection):
        b = FieldDirection(np.asarray(b, dtype=float))
    lvl = dsp.as_level(level)
    d = basis.height_covector(b.unit)
    window = float(np.abs(d).max())

    if crit_heights is None:
        crit_heights = approx_critical_heights(model, lvl, d, grid_n=bud.crit_grid_n)

    hs = []
    for hc in crit_heights:
        hs.append(hc)  # the separatrix plane itself: singular-net stubs
        for off in bud.crit_h_offsets:
            hs.append(hc + off * window)
            hs.append(hc - off * window)
    hs += [window * ((j + 0.61803398875) / plane_count) for j in range(plane_count)]
    seen_h = set()
    hs = [h for h in hs if not (round(h, 9) in seen_h or seen_h.add(round(h, 9)))]

    cap = int(bud.max_arc / sc.record_ds) + 64
    buffer = np.empty((cap, 3))
    dedup = _VoxelDedup(bud.dedup_tol)
    out: list[Trajectory] = []
    total_arc = 0.0
    open_families = 0

    for h in hs:
        if len(out) >= bud.max_traces or total_arc >= bud.max_total_arc:
            break
        if bud.max_open_families and open_families >= bud.max_open_families:
            break
        cands = plane_seed_candidates(model, lvl, d, h,
                                      patch_width=bud.patch_width,
                                      grid_k=bud.patch_grid)
        new_here = 0
        for cand in cands:
            if (new_here >= seeds_per_plane or len(out) >= bud.max_traces
                    or total_arc >= bud.max_total_arc):
                break
            if bud.max_open_families and open_families >= bud.max_open_families:
                break
            if dedup.match(cand):
                continue
            slc = make_slice(b, float(d @ cand))
            try:
                traj = trace(model, lvl, slc, cand, max_arc=bud.max_arc,
                             step_ctrl=sc, thresholds=th, basis=basis,
                             early_stop=early_stop, chain_buffer=buffer)
            except (SeedOffSurface, StepCollapse):
                continue
            out.append(traj)
            dedup.add(traj)
            total_arc += traj.arc_length
            if traj.cls in STABLE_OPEN:
                open_families += 1
            new_here += 1
    return out


def _mirror_equivalent(t1: Trajectory, t2: Trajectory):
    """True when t2 is the p -> -p image of t1 modulo the lattice."""
    from scipy.spatial import cKDTree
    a = (-t1.points[:: max(1, t1.points.shape[0] // 200)]) % 1.0
    bpts = (t2.points[:: max(1, t2.points.shape[0] // 200)]) % 1.0
    tree = cKDTree(np.vstack([bpts + s for s in
                              ([0, 0, 0], [1, 0, 0], [-1, 0, 0], [0, 1, 0],
                               [0, -1, 0], [0, 0, 1], [0, 0, -1])]))
    dist, _ = tree.query(a[: 24])
    return bool(np.median(dist) < 0.05)


def count_carriers(trajectories, window: float) -> int | None:
    """Even count of open-orbit families per height period.

    Directed open families found by seeding are paired with their
    inversion images (which exist by evenness of the dispersion); the
    count is twice the number of inversion classes.
    """
    fams = [t for t in trajectories if t.cls in STABLE_OPEN]
    if not fams:
        return None
    classes: list[Trajectory] = []
    for t in fams:
        if any(_mirror_equivalent(t, c) for c in classes):
            continue
        classes.append(t)
    return 2 * len(classes)


# ---------------------------------------------------------------------------
# energy interval

@dataclass(frozen=True)
class EnergyInterval:
    """Connected energy interval carrying stable open orbits; empty when
    eps1/eps2 are None.  For rational or partly rational directions a
    wider hull including periodic families on homology-zero carriers is
    attached."""

    eps1: float | None
    eps2: float | None
    partly_stable_bounds: tuple | None = None

    @property
    def empty(self):
        return self.eps1 is None

    @property
    def degenerate(self):
        return (not self.empty) and self.eps1 == self.eps2

    def contains(self, value):
        return (not self.empty) and self.eps1 <= value <= self.eps2


def _hull(energies, flags):
    idx = np.flatnonzero(flags)
    if idx.size == 0:
        return None, None, False
    gaps = np.any(~flags[idx[0]: idx[-1] + 1])
    return float(energies[idx[0]]), float(energies[idx[-1]]), bool(gaps)


def open_energy_interval(model, b, eps_grid: int = 64, budgets: Budgets | None = None,
                         basis=None, step_ctrl=None, thresholds=None,
                         band_grid: int = 32) -> EnergyInterval:
    """Scan energies across the band for stable directed open orbits.

    Emits a NonConnectedDetection warning (and still returns the hull)
    if the detected set has gaps at scan resolution.
    """
    if eps_grid < 16:
        raise ValueError("eps_grid must be >= 16")
    bud = budgets or Budgets()
    basis = basis or default_basis()
    if not isinstance(b, FieldDirection):
        b = classify_direction(np.asarray(b, dtype=float), basis,
                               height_bound=bud.height_bound, tol=bud.rational_tol)
    lo, hi = dsp.band_range(model, band_grid)
    pad = 1e-3 * (hi - lo)
    energies = np.linspace(lo + pad, hi - pad, eps_grid)

    stable = np.zeros(eps_grid, dtype=bool)
    anyopen = np.zeros(eps_grid, dtype=bool)
    for i, e in enumerate(energies):
        trajs = seed_orbits(model, float(e), b, plane_count=bud.plane_count,
                            seeds_per_plane=bud.seeds_per_plane, budgets=bud,
                            basis=basis, step_ctrl=step_ctrl,
                            thresholds=thresholds)
        opens = [t for t in trajs if t.cls in STABLE_OPEN]
        if not opens:
            continue
        anyopen[i] = True
        stable[i] = _has_stable_family(opens, b, model, float(e), bud, basis)

    e1, e2, gaps = _hull(energies, stable)
    if gaps:
        warnings.warn("open-orbit energies non-connected at scan resolution; "
                      "returning the hull", NonConnectedDetection)
    partly = None
    if b.irrationality in (Irrationality.Irr1, Irrationality.Irr2):
        p1, p2, _ = _hull(energies, anyopen)
        if p1 is not None:
            partly = (p1, p2)
    return EnergyInterval(e1, e2, partly)


def _has_stable_family(opens, b, model, energy, bud, basis):
    """Stable means living on a carrier with nonzero homology class: at
    irrationality 3 every directed open family qualifies; at lower
    irrationality families on rank <= 1 surface components are the
    partly stable periodic cylinders and do not count."""
    if b.irrationality in (Irrationality.Irr3, Irrationality.Undetermined):
        return True
    if any(t.cls is TrajectoryClass.OpenQuasiperiodic for t in opens):
        return True
    from . import surface as srf
    try:
        mesh = srf.extract_surface(model, energy, bud.interval_grid_n)
    except (srf.SingularLevel, srf.EmptyLevel):
        return False
    comps = srf.components(mesh)
    for c in comps:
        srf.period_lattice_and_rank(c)
    locate = srf.component_locator(mesh, comps)
    for t in opens:
        comp_idx = locate(t.points[:1])[0]
        if comp_idx >= 0 and comps[comp_idx].rank is not None and comps[comp_idx].rank >= 2:
            return True
    return False
