"""Sweep of the sphere of field directions: per-direction orbit regimes,
stability zones with their integer quantum numbers, and the full angle
diagram record.

The sweep samples an icosahedral geodesic grid rotated by a seeded
random rotation, so no sample accidentally hits a rational direction;
antipodal symmetry of the flow is built in by probing one hemisphere
and mirroring.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import dispersion as dsp
from . import orbits as ob
from .lattice import (FieldDirection, IntegerPlane, Irrationality, NoIntegerFit,
                      classify_direction, default_basis,
                      integer_plane_from_directions)


class NotNearSpecialDirection(ValueError):
    """Crossover estimate requested away from a zone's rational center."""


class BudgetExceeded(RuntimeError):
    """Sweep ran out of its wall-clock budget; partial diagram available."""


class Regime(Enum):
    AllClosed = "all_closed"
    StableOpen = "stable_open"
    PartlyStableOpen = "partly_stable_open"
    SingularNet = "singular_net"
    ChaoticDirected = "chaotic_directed"
    ChaoticWandering = "chaotic_wandering"
    Mixed = "mixed"
    Undecided = "undecided"


@dataclass
class DirectionSample:
    """Probe record for one field direction."""

    b: FieldDirection
    regime: Regime
    eta: np.ndarray | None = None
    carrier_count: int | None = None
    interval: ob.EnergyInterval | None = None
    n_traced: int = 0
    index: int = -1
    zone_id: int = -1


@dataclass
class StabilityZone:
    """Connected set of StableOpen samples sharing one integral plane."""

    sample_indices: list
    quantum_numbers: IntegerPlane
    boundary: list = field(default_factory=list)
    sub_boundaries: list = field(default_factory=list)
    special_direction: np.ndarray | None = None
    special_regime: Regime | None = None
    zone_id: int = -1

    def contains(self, v, samples, spacing_rad):
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        best = min(float(np.arccos(np.clip(samples[i].b.unit @ v, -1, 1)))
                   for i in self.sample_indices)
        return best <= 1.3 * spacing_rad


@dataclass
class AngleDiagram:
    """Full sweep record over the sphere of field directions."""

    resolution_deg: float
    frequency: int
    seed: int
    rotation: np.ndarray
    vertices: np.ndarray
    triangles: np.ndarray
    samples: list
    zones: list
    special_directions: list = field(default_factory=list)
    partial: bool = False
    level: float = 0.0
    model_name: str = ""

    @property
    def spacing_rad(self):
        return math.radians(63.434948822922) / self.frequency

    def zone_of(self, v):
        for z in self.zones:
            if z.contains(v, self.samples, self.spacing_rad):
                return z
        return None


# ---------------------------------------------------------------------------
# geodesic grid

def _icosahedron():
    phi = (1 + 5 ** 0.5) / 2
    verts = []
    for a in (-1.0, 1.0):
        for b_ in (-phi, phi):
            verts += [(0, a, b_), (a, b_, 0), (b_, 0, a)]
    verts = np.array(verts)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    from scipy.spatial import ConvexHull
    hull = ConvexHull(verts)
    faces = hull.simplices
    # outward orientation
    for k, f in enumerate(faces):
        n = np.cross(verts[f[1]] - verts[f[0]], verts[f[2]] - verts[f[0]])
        if n @ verts[f].mean(axis=0) < 0:
            faces[k] = f[::-1]
    return verts, faces


def geodesic_grid(frequency: int):
    """Frequency-f geodesic subdivision of the icosahedron: 10 f^2 + 2
    unit vectors plus the triangle list."""
    base_v, base_f = _icosahedron()
    f = int(frequency)
    index = {}
    verts = []

    def vid(p):
        key = tuple(np.round(p * 1e7).astype(np.int64))
        i = index.get(key)
        if i is None:
            i = len(verts)
            verts.append(p)
            index[key] = i
        return i

    tris = []
    for (a, b_, c) in base_f:
        va, vb, vc = base_v[a], base_v[b_], base_v[c]
        grid = {}
        for i in range(f + 1):
            for j in range(f + 1 - i):
                p = (f - i - j) * va + i * vb + j * vc
                p = p / np.linalg.norm(p)
                grid[(i, j)] = vid(p)
        for i in range(f):
            for j in range(f - i):
                tris.append((grid[(i, j)], grid[(i + 1, j)], grid[(i, j + 1)]))
                if i + j < f - 1:
                    tris.append((grid[(i + 1, j)], grid[(i + 1, j + 1)], grid[(i, j + 1)]))
    return np.array(verts), np.array(tris, dtype=np.int64)


def _rotation_from_seed(seed: int):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def frequency_for_resolution(resolution_deg: float) -> int:
    return max(2, math.ceil(63.434948822922 / resolution_deg))


# ---------------------------------------------------------------------------
# probing

def probe_direction(model, level, b, budgets: ob.Budgets | None = None,
                    basis=None, step_ctrl=None, thresholds=None,
                    eta_tol: float = 0.05) -> DirectionSample:
    """Trace a covering orbit set for one direction and summarize the
    regime.

    StableOpen means directed open orbits sharing one +-eta on carriers
    of nonzero homology class; families that are purely lattice-periodic
    at a rational or partly rational direction sit on homology-zero
    cylinder carriers and report PartlyStableOpen.  (As the decision is
    made from orbit classes, a zone probed exactly at a rational
    direction inside it also reports PartlyStableOpen; zones are open
    regions and their samples are generically irrational.)
    """
    bud = budgets or ob.Budgets()
    basis = basis or default_basis()
    lvl = dsp.as_level(level)
    if not isinstance(b, FieldDirection):
        b = classify_direction(np.asarray(b, dtype=float), basis,
                               height_bound=bud.height_bound,
                               tol=bud.rational_tol)
    trajs = ob.seed_orbits(model, lvl, b, plane_count=bud.plane_count,
                           seeds_per_plane=bud.seeds_per_plane, budgets=bud,
                           basis=basis, step_ctrl=step_ctrl, thresholds=thresholds)
    sample = DirectionSample(b=b, regime=Regime.Undecided, n_traced=len(trajs))
    opens = [t for t in trajs if t.cls in ob.STABLE_OPEN]
    chaotic_w = [t for t in trajs if t.cls is ob.TrajectoryClass.ChaoticWandering]
    chaotic_d = [t for t in trajs if t.cls is ob.TrajectoryClass.ChaoticDirected]
    singular = [t for t in trajs if t.cls is ob.TrajectoryClass.Singular]
    undecided = [t for t in trajs if t.cls is ob.TrajectoryClass.Undecided]

    rational = b.irrationality in (Irrationality.Irr1, Irrationality.Irr2)
    if opens:
        etas = [t.eta for t in opens]
        ref = etas[0]
        canon = [e if e @ ref >= 0 else -e for e in etas]
        dots = np.array([[abs(np.clip(a @ c, -1, 1)) for c in canon] for a in canon])
        consistent = bool(np.arccos(dots.min()) <= eta_tol)
        if consistent:
            eta = np.mean(canon, axis=0)
            eta /= np.linalg.norm(eta)
            sample.eta = eta
            d = basis.height_covector(b.unit)
            sample.carrier_count = ob.count_carriers(trajs, float(np.abs(d).max()))
            quasip = any(t.cls is ob.TrajectoryClass.OpenQuasiperiodic for t in opens)
            if quasip or not rational:
                sample.regime = Regime.StableOpen
            else:
                sample.regime = Regime.PartlyStableOpen
        else:
            sample.regime = Regime.Mixed if b.irrationality is Irrationality.Irr1 \
                else Regime.Undecided
        sample.interval = ob.EnergyInterval(lvl.value, lvl.value)
    elif chaotic_w:
        sample.regime = Regime.ChaoticWandering
    elif chaotic_d:
        sample.regime = Regime.ChaoticDirected
        etas = [t.eta for t in chaotic_d if t.eta is not None]
        if etas:
            sample.eta = etas[0]
    elif len(singular) >= 2 and b.irrationality is Irrationality.Irr1:
        sample.regime = Regime.SingularNet
    elif undecided or singular:
        sample.regime = Regime.Undecided
    else:
        sample.regime = Regime.AllClosed
    return sample


def _probe_chunk(args):
    (model, level, units, bud, thresholds, step_ctrl, eta_tol) = args
    out = []
    for u in units:
        out.append(probe_direction(model, level, u, budgets=bud,
                                   thresholds=thresholds, step_ctrl=step_ctrl,
                                   eta_tol=eta_tol))
    return out


# ---------------------------------------------------------------------------
# the sweep

def sweep(model, level, resolution_deg: float = 4.0,
          budgets: ob.Budgets | None = None, thresholds=None, step_ctrl=None,
          seed: int = 0, basis=None, workers: int = 1, adaptive: bool = False,
          eta_tol: float = 0.05, time_budget_s: float | None = None,
          precomputed: dict | None = None,
          progress=None) -> AngleDiagram:
    """Probe a geodesic grid of field directions and assemble the angle
    diagram: regimes, stability zones, quantum numbers, sub-boundaries
    and special rational directions.

    One hemisphere is probed and mirrored (the flow at -B traverses the
    same orbits backwards).  ``precomputed`` maps vertex index to an
    existing DirectionSample, which makes interrupted sweeps resumable.
    With ``adaptive`` set, one refinement pass probes triangle midpoints
    across regime changes and appends them as extra samples.
    """
    bud = budgets or ob.Budgets()
    basis = basis or default_basis()
    th = thresholds or ob.ClassifyThresholds()
    lvl = dsp.as_level(level)
    freq = frequency_for_resolution(resolution_deg)
    verts, tris = geodesic_grid(freq)
    rot = _rotation_from_seed(seed)
    verts = verts @ rot.T

    antipode = _antipode_table(verts)
    canonical = [i for i in range(len(verts)) if _is_canonical(verts[i])]

    samples: list = [None] * len(verts)
    if precomputed:
        for i, s in precomputed.items():
            samples[int(i)] = s
    todo = [i for i in canonical
            if samples[i] is None and samples[antipode[i]] is None]

    start = time.time()
    partial = False
    done_count = 0

    def out_of_time():
        return time_budget_s is not None and (time.time() - start) > time_budget_s

    if workers > 1 and len(todo) > workers:
        chunks = np.array_split(np.array(todo, dtype=int), workers * 4)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = []
            for ch in chunks:
                if len(ch) == 0:
                    continue
                args = (model, lvl, [verts[i] for i in ch], bud, th, step_ctrl, eta_tol)
                futures.append((ch, pool.submit(_probe_chunk, args)))
            for ch, fut in futures:
                res = fut.result()
                for i, s in zip(ch, res):
                    s.index = int(i)
                    samples[int(i)] = s
                done_count += len(ch)
                if progress:
                    progress(done_count, len(todo))
    else:
        for i in todo:
            if out_of_time():
                partial = True
                break
            s = probe_direction(model, lvl, verts[i], budgets=bud, basis=basis,
                                step_ctrl=step_ctrl, thresholds=th, eta_tol=eta_tol)
            s.index = i
            samples[i] = s
            done_count += 1
            if progress:
                progress(done_count, len(todo))

    # mirror onto antipodes, fill gaps with Undecided placeholders
    for i in range(len(verts)):
        if samples[i] is None and samples[antipode[i]] is not None:
            samples[i] = _mirror_sample(samples[antipode[i]], verts[i], i)
    for i in range(len(verts)):
        if samples[i] is None:
            partial = True
            samples[i] = DirectionSample(b=FieldDirection(verts[i]),
                                         regime=Regime.Undecided, index=i)

    diagram = AngleDiagram(resolution_deg=resolution_deg, frequency=freq,
                           seed=seed, rotation=rot, vertices=verts,
                           triangles=tris, samples=samples, zones=[],
                           partial=partial, level=lvl.value,
                           model_name=getattr(model, "name", ""))

    if adaptive and not partial:
        _refine_boundaries(diagram, model, lvl, bud, th, step_ctrl, eta_tol, basis)

    _assemble_zones(diagram, basis)
    _mark_special_directions(diagram, model, lvl, bud, th, step_ctrl, eta_tol, basis)
    return diagram


def _is_canonical(v):
    for c in v:
        if c > 1e-12:
            return True
        if c < -1e-12:
            return False
    return True


def _antipode_table(verts):
    index = {tuple(np.round(v * 1e6).astype(np.int64)): i for i, v in enumerate(verts)}
    anti = np.empty(len(verts), dtype=np.int64)
    for i, v in enumerate(verts):
        j = index.get(tuple(np.round(-v * 1e6).astype(np.int64)))
        anti[i] = i if j is None else j
    return anti


def _mirror_sample(s: DirectionSample, v, idx):
    return DirectionSample(b=FieldDirection(v, s.b.irrationality, s.b.relations,
                                            s.b.exact),
                           regime=s.regime,
                           eta=None if s.eta is None else s.eta.copy(),
                           carrier_count=s.carrier_count,
                           interval=s.interval, n_traced=s.n_traced, index=idx)


def _refine_boundaries(diagram, model, lvl, bud, th, step_ctrl, eta_tol, basis):
    """One midpoint-refinement pass across regime changes."""
    seen = set()
    extra = []
    for tri in diagram.triangles:
        for a, b_ in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            ra = diagram.samples[a].regime
            rb = diagram.samples[b_].regime
            if ra == rb:
                continue
            key = (min(a, b_), max(a, b_))
            if key in seen:
                continue
            seen.add(key)
            mid = diagram.vertices[a] + diagram.vertices[b_]
            mid /= np.linalg.norm(mid)
            s = probe_direction(model, lvl, mid, budgets=bud, basis=basis,
                                step_ctrl=step_ctrl, thresholds=th, eta_tol=eta_tol)
            s.index = len(diagram.samples) + len(extra)
            extra.append(s)
    diagram.samples.extend(extra)


def _assemble_zones(diagram: AngleDiagram, basis):
    """Flood-fill StableOpen samples into zones and fit quantum numbers."""
    nv = len(diagram.vertices)
    adj = [[] for _ in range(nv)]
    for tri in diagram.triangles:
        for a, b_ in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            adj[a].append(b_)
            adj[b_].append(a)

    stable = [i for i in range(nv) if diagram.samples[i].regime is Regime.StableOpen]
    stable_set = set(stable)
    visited = set()
    zones = []
    for i in stable:
        if i in visited:
            continue
        comp = []
        stack = [i]
        visited.add(i)
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for nb in adj[cur]:
                if nb in stable_set and nb not in visited:
                    visited.add(nb)
                    stack.append(nb)
        etas = [diagram.samples[j].eta for j in comp if diagram.samples[j].eta is not None]
        if len(etas) < 2:
            for j in comp:
                diagram.samples[j].regime = Regime.Undecided
            continue
        try:
            plane = integer_plane_from_directions(etas, basis)
        except NoIntegerFit:
            for j in comp:
                diagram.samples[j].regime = Regime.Undecided
            continue
        except Exception:
            for j in comp:
                diagram.samples[j].regime = Regime.Undecided
            continue
        zone = StabilityZone(sample_indices=sorted(comp), quantum_numbers=plane,
                             zone_id=len(zones))
        zone.boundary = _zone_boundary(diagram, set(comp))
        zone.sub_boundaries = _sub_boundaries(diagram, set(comp))
        for j in comp:
            diagram.samples[j].zone_id = zone.zone_id
        zones.append(zone)
    diagram.zones = zones


def _zone_boundary(diagram, members):
    segs = []
    for tri in diagram.triangles:
        inside = [t in members for t in tri]
        if not any(inside) or all(inside):
            continue
        mids = []
        for a, b_ in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            if (a in members) != (b_ in members):
                m = diagram.vertices[a] + diagram.vertices[b_]
                mids.append(m / np.linalg.norm(m))
        if len(mids) == 2:
            segs.append((mids[0], mids[1]))
    return _chain_segments(segs)


def _sub_boundaries(diagram, members):
    segs = []
    for tri in diagram.triangles:
        for a, b_ in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            if a in members and b_ in members:
                ca = diagram.samples[a].carrier_count
                cb = diagram.samples[b_].carrier_count
                if ca is not None and cb is not None and ca != cb:
                    m = diagram.vertices[a] + diagram.vertices[b_]
                    segs.append((m / np.linalg.norm(m),))
    # distinct midpoints only; these are marker points rather than curves
    uniq = []
    for (m,) in segs:
        if not any(np.allclose(m, u, atol=1e-9) for u in uniq):
            uniq.append(m)
    return uniq


def _chain_segments(segs):
    """Greedy chaining of boundary segments into polylines."""
    if not segs:
        return []
    remaining = list(segs)
    polylines = []
    cur = [remaining[0][0], remaining[0][1]]
    remaining.pop(0)
    while True:
        found = False
        for k, (p, q) in enumerate(remaining):
            if np.linalg.norm(p - cur[-1]) < 1e-9:
                cur.append(q)
                remaining.pop(k)
                found = True
                break
            if np.linalg.norm(q - cur[-1]) < 1e-9:
                cur.append(p)
                remaining.pop(k)
                found = True
                break
        if not found:
            polylines.append(np.array(cur))
            if not remaining:
                break
            cur = [remaining[0][0], remaining[0][1]]
            remaining.pop(0)
    return polylines


def _mark_special_directions(diagram, model, lvl, bud, th, step_ctrl, eta_tol, basis):
    """Probe, for each zone, the rational direction normal to its integral
    plane when that direction falls inside the zone."""
    out = []
    for zone in diagram.zones:
        n_cart = zone.quantum_numbers.normal_cartesian(basis)
        for sign in (1.0, -1.0):
            v = sign * n_cart
            if zone.contains(v, diagram.samples, diagram.spacing_rad):
                s = probe_direction(model, lvl, v, budgets=bud, basis=basis,
                                    step_ctrl=step_ctrl, thresholds=th,
                                    eta_tol=eta_tol)
                zone.special_direction = v
                zone.special_regime = s.regime
                out.append({"direction": v, "zone_id": zone.zone_id,
                            "regime": s.regime.value})
                break
    diagram.special_directions = out


def zone_quantum_numbers(zone: StabilityZone, diagram: AngleDiagram,
                         basis=None, residual_tol: float = 1e-3) -> IntegerPlane:
    """Refit the zone's integral plane from all member mean directions and
    verify every sample against it."""
    basis = basis or default_basis()
    etas = [diagram.samples[i].eta for i in zone.sample_indices
            if diagram.samples[i].eta is not None]
    plane = integer_plane_from_directions(etas, basis, residual_tol=residual_tol)
    normal = plane.normal_cartesian(basis)
    worst = max(abs(float(np.dot(e / np.linalg.norm(e), normal))) for e in etas)
    if worst > residual_tol:
        raise NoIntegerFit(f"zone eta residual {worst:.2e}")
    return plane


def strip_crossover_field(model, level, zone: StabilityZone, b_near,
                          p0: float, omega_tau_per_field: float = 1.0,
                          budgets: ob.Budgets | None = None, basis=None,
                          near_tol_deg: float = 6.0, strip_width: float | None = None):
    """Crossover field strength near a zone's special rational direction.

    Wide-strip oscillations dominate until omega_B tau ~ L / p0 with L
    the measured strip width; returns (omega_tau_cross, field)."""
    if zone.special_direction is None:
        raise NotNearSpecialDirection("zone has no special rational direction")
    v = np.asarray(b_near, dtype=float)
    v = v / np.linalg.norm(v)
    ang = math.degrees(math.acos(np.clip(abs(v @ zone.special_direction), -1, 1)))
    if ang > near_tol_deg:
        raise NotNearSpecialDirection(f"{ang:.2f} deg from the special direction")
    if strip_width is None:
        bud = budgets or ob.Budgets()
        trajs = ob.seed_orbits(model, level, v, plane_count=bud.plane_count,
                               seeds_per_plane=bud.seeds_per_plane, budgets=bud,
                               basis=basis)
        widths = [t.strip_width for t in trajs
                  if t.cls in ob.STABLE_OPEN and t.strip_width]
        if not widths:
            raise NotNearSpecialDirection("no open orbits found at this direction")
        strip_width = max(widths)
    omega_tau = strip_width / p0
    return omega_tau, omega_tau / omega_tau_per_field


# ---------------------------------------------------------------------------
# serialization and rendering

def diagram_to_dict(diagram: AngleDiagram) -> dict:
    return {
        "resolution_deg": diagram.resolution_deg,
        "frequency": diagram.frequency,
        "seed": diagram.seed,
        "level": diagram.level,
        "model": diagram.model_name,
        "partial": diagram.partial,
        "samples": [sample_to_dict(s) for s in diagram.samples],
        "zones": [
            {
                "zone_id": z.zone_id,
                "quantum_numbers": list(z.quantum_numbers.n),
                "samples": [int(i) for i in z.sample_indices],
                "boundary": [[list(map(float, p)) for p in poly] for poly in z.boundary],
                "sub_boundaries": [list(map(float, p)) for p in z.sub_boundaries],
                "special_direction": None if z.special_direction is None
                else list(map(float, z.special_direction)),
                "special_regime": None if z.special_regime is None else z.special_regime.value,
            }
            for z in diagram.zones
        ],
        "special_directions": [
            {"direction": list(map(float, sd["direction"])),
             "zone_id": sd["zone_id"], "regime": sd["regime"]}
            for sd in diagram.special_directions
        ],
    }


def sample_to_dict(s: DirectionSample) -> dict:
    return {
        "index": s.index,
        "b": [float(c) for c in s.b.unit],
        "irrationality": s.b.irrationality.name,
        "regime": s.regime.value,
        "eta": None if s.eta is None else [float(c) for c in s.eta],
        "carrier_count": s.carrier_count,
        "zone_id": s.zone_id,
        "n_traced": s.n_traced,
    }


def sample_from_dict(d: dict) -> DirectionSample:
    b = FieldDirection(np.array(d["b"]), Irrationality[d["irrationality"]])
    return DirectionSample(
        b=b, regime=Regime(d["regime"]),
        eta=None if d["eta"] is None else np.array(d["eta"]),
        carrier_count=d["carrier_count"], index=d["index"],
        zone_id=d.get("zone_id", -1), n_traced=d.get("n_traced", 0))


def diagram_to_csv(diagram: AngleDiagram) -> str:
    lines = ["index,bx,by,bz,regime,zone_id,eta_x,eta_y,eta_z,carrier_count"]
    for s in diagram.samples:
        eta = ["", "", ""] if s.eta is None else [f"{c:.10f}" for c in s.eta]
        cc = "" if s.carrier_count is None else str(s.carrier_count)
        lines.append(
            f"{s.index},{s.b.unit[0]:.10f},{s.b.unit[1]:.10f},{s.b.unit[2]:.10f},"
            f"{s.regime.value},{s.zone_id},{eta[0]},{eta[1]},{eta[2]},{cc}")
    return "\n".join(lines) + "\n"


_REGIME_COLOR = {
    Regime.AllClosed: "#d0d0d0",
    Regime.StableOpen: "#888888",
    Regime.PartlyStableOpen: "#6baed6",
    Regime.SingularNet: "#fdae61",
    Regime.ChaoticDirected: "#9e9ac8",
    Regime.ChaoticWandering: "#756bb1",
    Regime.Mixed: "#fc9272",
    Regime.Undecided: "#f7f7f7",
}

_ZONE_PALETTE = ["#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00",
                 "#a65628", "#f781bf", "#1b9e77", "#d95f02", "#7570b3",
                 "#66a61e", "#e7298a", "#e6ab02"]


def _lambert(v, south):
    x, y, z = v
    if south:
        z = -z
        x = -x
    r = math.sqrt(max(0.0, 2.0 / (1.0 + max(z, -0.999))))
    return x * r / 2.0, y * r / 2.0


def render_svg(diagram: AngleDiagram, size: int = 420) -> str:
    """Lambert equal-area rendering of both hemispheres with samples
    colored by regime and zones colored by their quantum numbers."""
    rad = size * 0.46
    cx1, cx2, cy = size * 0.5, size * 1.5, size * 0.52
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * size}" '
           f'height="{size + 60}" viewBox="0 0 {2 * size} {size + 60}">']
    out.append(f'<rect width="{2 * size}" height="{size + 60}" fill="white"/>')
    for south, cx in ((False, cx1), (True, cx2)):
        out.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="{rad:.1f}" '
                   'fill="none" stroke="#404040" stroke-width="1"/>')
        for s in diagram.samples:
            v = s.b.unit
            if (v[2] < 0) != south:
                continue
            X, Y = _lambert(v, south)
            px, py = cx + X * rad, cy - Y * rad
            if s.zone_id >= 0:
                color = _ZONE_PALETTE[_palette_index(diagram.zones[s.zone_id])]
            else:
                color = _REGIME_COLOR[s.regime]
            out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2.1" fill="{color}"/>')
        for z in diagram.zones:
            color = _ZONE_PALETTE[_palette_index(z)]
            for poly in z.boundary:
                pts = []
                for v in poly:
                    if (v[2] < 0) != south:
                        pts.append(None)
                        continue
                    X, Y = _lambert(v, south)
                    pts.append((cx + X * rad, cy - Y * rad))
                run = []
                for p in pts + [None]:
                    if p is None:
                        if len(run) >= 2:
                            d = "M" + " L".join(f"{a:.2f},{b:.2f}" for a, b in run)
                            out.append(f'<path d="{d}" fill="none" stroke="{color}" '
                                       'stroke-width="1.5"/>')
                        run = []
                    else:
                        run.append(p)
        label = "-B hemisphere" if south else "+B hemisphere"
        out.append(f'<text x="{cx:.1f}" y="{size + 20}" text-anchor="middle" '
                   f'font-size="13" font-family="sans-serif">{label}</text>')
    leg = []
    for z in diagram.zones:
        leg.append(f"zone {z.zone_id}: n = {z.quantum_numbers}")
    out.append(f'<text x="10" y="{size + 44}" font-size="12" '
               f'font-family="sans-serif">{"; ".join(leg)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _palette_index(zone):
    return hash(zone.quantum_numbers.n) % len(_ZONE_PALETTE)
