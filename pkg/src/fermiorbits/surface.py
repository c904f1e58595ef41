"""Level-set extraction in the torus of quasimomenta and per-component
topology: genus, topological rank, period lattice, homology class.

Meshes are triangulations of {eps = level} in T^3.  Vertices live in one
fundamental cell (fractional reciprocal coordinates); every triangle
corner carries an integer cell offset so the triangle has a genuine
Euclidean realization in the covering space.  An edge between corners
(va, oa) and (vb, ob) is identified by (va, vb, ob - oa): topology
queries never fold away the covering information.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _csgraph_components

from . import dispersion as dsp
from ._critical import DegenerateCritical, classify as _classify_critical
from ._critical import refine as _refine_critical
from .lattice import default_basis

#: Kuhn subdivision: each cube splits into 6 tetrahedra sharing the main
#: diagonal, one per axis permutation; face diagonals then agree between
#: neighboring cubes, which keeps the periodic mesh watertight.
_KUHN_TETS = []
for _perm in itertools.permutations(range(3)):
    _c0 = np.zeros(3, dtype=np.int64)
    _c1 = _c0.copy()
    _c1[_perm[0]] = 1
    _c2 = _c1.copy()
    _c2[_perm[1]] = 1
    _c3 = np.ones(3, dtype=np.int64)
    _KUHN_TETS.append(np.array([_c0, _c1, _c2, _c3]))
_KUHN_TETS = np.array(_KUHN_TETS)
_KUHN_SLOTS = _KUHN_TETS[:, :, 0] + 2 * _KUHN_TETS[:, :, 1] + 4 * _KUHN_TETS[:, :, 2]

_EDGE_DIRS = np.array([(1, 0, 0), (0, 1, 0), (0, 0, 1),
                       (1, 1, 0), (0, 1, 1), (1, 0, 1), (1, 1, 1)],
                      dtype=np.int64)
_EDGE_DIR_ID = {tuple(d): i for i, d in enumerate(_EDGE_DIRS)}


class SingularLevel(ValueError):
    """A crossing cell sits too close to a critical point of eps."""


class EmptyLevel(ValueError):
    """No sign change: the level misses the sampled band."""


class NonManifoldEdge(ValueError):
    """An edge is not shared by exactly two consistently oriented triangles."""


class HorizonTooSmall(ValueError):
    """Lift exploration bound too small."""


class DegenerateProbeLine(RuntimeError):
    """All retried probe lines hit mesh edges."""


@dataclass
class PeriodicMesh:
    """Closed oriented triangle mesh of a level set in T^3.

    vertices : (V, 3) fractional coordinates in [0, 1)
    values   : (V,) residuals eps(vertex) - level
    triangles: (F, 3) vertex indices
    offsets  : (F, 3, 3) per-corner integer cell offsets
    """

    vertices: np.ndarray
    triangles: np.ndarray
    offsets: np.ndarray
    values: np.ndarray
    level: float = 0.0
    grid_n: int = 0

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.offsets = np.asarray(self.offsets, dtype=np.int64).reshape(-1, 3, 3)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        self._topo = None

    def corner_positions(self, tri_idx):
        tri = self.triangles[tri_idx]
        return self.vertices[tri] + self.offsets[tri_idx]

    def all_corner_positions(self):
        return self.vertices[self.triangles] + self.offsets


# ---------------------------------------------------------------------------
# extraction

def extract_surface(model, level, grid_n: int,
                    singular_cos_cut: float = 0.05) -> PeriodicMesh:
    """Marching tetrahedra over a periodic grid_n^3 grid.

    Edge vertices are placed by linear interpolation plus one Newton
    correction along the edge.  The result is watertight and
    consistently oriented with normals along +grad(eps).

    Raises
    ------
    EmptyLevel
        The level does not cross any grid edge.
    SingularLevel
        Some crossing cell looks like it contains a critical point on
        the level: a corner gradient vanishes, or two corner gradients
        point more than ~90 degrees apart (cosine below
        ``singular_cos_cut``); a regular crossing keeps its gradient
        direction nearly constant within one cell.
    """
    if grid_n < 16:
        raise ValueError("grid_n must be >= 16")
    lvl = dsp.as_level(level)
    n = grid_n
    t = np.arange(n) / n
    nodes = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1)
    f = dsp.evaluate(model, nodes) - lvl.value
    pos = f >= 0.0

    if pos.all() or (~pos).all():
        raise EmptyLevel(f"level {lvl.value:g} misses the sampled band")

    # stacking with dx fastest puts corner (dx, dy, dz) at slot dx + 2 dy + 4 dz
    corner_f = np.stack([np.roll(f, (-dx, -dy, -dz), axis=(0, 1, 2))
                         for dz in (0, 1) for dy in (0, 1) for dx in (0, 1)],
                        axis=-1)
    corner_sign = corner_f >= 0.0
    crossing = corner_sign.any(axis=-1) & ~corner_sign.all(axis=-1)
    cells = np.argwhere(crossing)

    gvec = dsp.gradient(model, nodes)
    offs8 = np.array([(dx, dy, dz) for dz in (0, 1) for dy in (0, 1) for dx in (0, 1)],
                     dtype=np.int64)
    cidx = (cells[:, None, :] + offs8[None, :, :]) % n
    cg = gvec[cidx[..., 0], cidx[..., 1], cidx[..., 2]]  # (C, 8, 3)
    cgn = np.linalg.norm(cg, axis=-1)
    g_floor = 1e-9 * 2 * np.pi * max(model.amplitude_scale(), 1e-30)
    zero_grad = cgn.min(axis=1) < g_floor
    unit = cg / np.maximum(cgn, g_floor)[..., None]
    dots = np.einsum("cpa,cqa->cpq", unit, unit)
    reversed_grad = dots.min(axis=(1, 2)) < singular_cos_cut
    bad = zero_grad | reversed_grad
    if bad.any():
        where = cells[np.argmax(bad)]
        raise SingularLevel(
            f"crossing cell at {tuple(where / n)} is near a critical point "
            "(corner gradients vanish or reverse)")
    cell_f = corner_f[crossing]  # slot order dx + 2 dy + 4 dz

    key_chunks = []
    off_chunks = []

    def emit(mask, tet, corner_pairs, neg_corners):
        """Emit one triangle per masked cell; corners on the given tet edges.

        The winding is fixed combinatorially so that the normal points
        from the negative (eps < level) corners toward the positive
        ones; midpoint representatives make the choice exact and
        independent of where the vertices land on their edges.
        """
        if not mask.any():
            return
        ref = _KUHN_TETS[tet].astype(float)
        mids = np.array([(ref[p] + ref[q]) / 2 for p, q in corner_pairs])
        nrm = np.cross(mids[1] - mids[0], mids[2] - mids[0])
        neg_c = ref[list(neg_corners)].mean(axis=0)
        pos_c = ref[[i for i in range(4) if i not in neg_corners]].mean(axis=0)
        if nrm @ (pos_c - neg_c) < 0:
            corner_pairs = [corner_pairs[0], corner_pairs[2], corner_pairs[1]]
        sub = cells[mask]
        keys = np.empty((sub.shape[0], 3), dtype=np.int64)
        offs = np.empty((sub.shape[0], 3, 3), dtype=np.int64)
        for c3, (p, q) in enumerate(corner_pairs):
            cp, cq = _KUHN_TETS[tet][p], _KUHN_TETS[tet][q]
            if not np.all(cq >= cp):
                cp, cq = cq, cp
            a_node = sub + cp
            base = a_node % n
            did = _EDGE_DIR_ID[tuple(cq - cp)]
            lin = (base[:, 0] * n + base[:, 1]) * n + base[:, 2]
            keys[:, c3] = lin * 7 + did
            offs[:, c3] = a_node // n
        key_chunks.append(keys)
        off_chunks.append(offs)

    for tet in range(6):
        fv = cell_f[:, _KUHN_SLOTS[tet]]
        neg = fv < 0.0
        nn = neg.sum(axis=1)
        for lone in range(4):
            others = [o for o in range(4) if o != lone]
            m1 = (nn == 1) & neg[:, lone]
            emit(m1, tet, [(lone, o) for o in others], (lone,))
            m3 = (nn == 3) & ~neg[:, lone]
            emit(m3, tet, [(lone, o) for o in others], tuple(others))
        for na, nb in itertools.combinations(range(4), 2):
            m2 = (nn == 2) & neg[:, na] & neg[:, nb]
            if not m2.any():
                continue
            pa, pb = [o for o in range(4) if o not in (na, nb)]
            quad = [(na, pa), (na, pb), (nb, pb), (nb, pa)]
            emit(m2, tet, [quad[0], quad[1], quad[2]], (na, nb))
            emit(m2, tet, [quad[0], quad[2], quad[3]], (na, nb))

    tri_keys = np.vstack(key_chunks)
    tri_offs = np.vstack(off_chunks)
    uniq, inverse = np.unique(tri_keys.ravel(), return_inverse=True)
    triangles = inverse.reshape(-1, 3).astype(np.int64)

    did = uniq % 7
    lin = uniq // 7
    base = np.stack([lin // (n * n), (lin // n) % n, lin % n], axis=1).astype(float)
    dvec = _EDGE_DIRS[did].astype(float)
    ia = (base.astype(np.int64)) % n
    ib = (base.astype(np.int64) + _EDGE_DIRS[did]) % n
    fa = f[ia[:, 0], ia[:, 1], ia[:, 2]]
    fb = f[ib[:, 0], ib[:, 1], ib[:, 2]]

    # keep vertices strictly inside their edges so no two edges of a tet
    # produce coincident points (degenerate triangles would break the
    # winding and manifold checks)
    # linear interpolation, then bracketed bisection (the sign change is
    # guaranteed on the edge) and one Newton polish; vertices stay strictly
    # inside their edges so no two edges of a tet produce coincident points
    t_margin = 1e-5
    t_lo = np.zeros_like(fa)
    t_hi = np.ones_like(fa)
    tpar = np.clip(fa / (fa - fb), t_margin, 1.0 - t_margin)
    for _ in range(14):
        x = (base + tpar[:, None] * dvec) / n
        r = dsp.evaluate(model, x) - lvl.value
        same_side = (r >= 0) == (fa >= 0)
        t_lo = np.where(same_side, tpar, t_lo)
        t_hi = np.where(same_side, t_hi, tpar)
        tpar = 0.5 * (t_lo + t_hi)
    x = (base + tpar[:, None] * dvec) / n
    r = dsp.evaluate(model, x) - lvl.value
    slope = np.einsum("ij,ij->i", dsp.gradient(model, x), dvec) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        t2 = np.where(slope != 0.0, tpar - r / slope, tpar)
    ok = (t2 > np.maximum(t_lo, t_margin)) & (t2 < np.minimum(t_hi, 1 - t_margin))
    tpar = np.clip(np.where(ok, t2, tpar), t_margin, 1 - t_margin)
    x = (base + tpar[:, None] * dvec) / n
    values = dsp.evaluate(model, x) - lvl.value

    return PeriodicMesh(x, triangles, tri_offs, values, level=lvl.value, grid_n=n)


# ---------------------------------------------------------------------------
# wrap-aware topology structure

class _MeshTopology:
    """Edge pairing, triangle adjacency shifts and component labels."""

    def __init__(self, mesh: PeriodicMesh):
        tri = mesh.triangles
        off = mesh.offsets
        nf = tri.shape[0]
        va = tri[:, [1, 2, 0]].ravel()
        vb = tri[:, [2, 0, 1]].ravel()
        oa = off[:, [1, 2, 0], :].reshape(-1, 3)
        ob = off[:, [2, 0, 1], :].reshape(-1, 3)
        w = ob - oa
        wlex = (w[:, 0] * 81 + w[:, 1] * 9 + w[:, 2])
        swap = (vb < va) | ((va == vb) & (wlex < 0))
        ka = np.where(swap, vb, va)
        kb = np.where(swap, va, vb)
        ws = np.where(swap[:, None], -w, w)
        if np.abs(ws).max(initial=0) > 4:
            raise NonManifoldEdge("corner offsets out of expected range")
        enc = ((ws[:, 0] + 4) * 9 + (ws[:, 1] + 4)) * 9 + (ws[:, 2] + 4)
        nv = int(tri.max()) + 1
        keys = (ka.astype(np.int64) * nv + kb) * 729 + enc

        order = np.argsort(keys, kind="stable")
        sk = keys[order]
        if sk.shape[0] % 2 != 0 or not np.all(sk[0::2] == sk[1::2]):
            raise NonManifoldEdge("an edge is not shared by exactly two triangles")
        if sk.shape[0] >= 4 and np.any(sk[1:-1:2] == sk[2::2]):
            raise NonManifoldEdge("an edge is shared by more than two triangles")
        occ1 = order[0::2]
        occ2 = order[1::2]
        fwd = ~swap
        if not np.all(fwd[occ1] ^ fwd[occ2]):
            raise NonManifoldEdge("inconsistent winding across an edge")

        self.mesh = mesh
        self.edge_tri1 = occ1 // 3
        self.edge_tri2 = occ2 // 3
        # offset of the canonical edge start vertex in each triangle's frame
        start1 = np.where(swap[occ1, None], ob[occ1], oa[occ1])
        start2 = np.where(swap[occ2, None], ob[occ2], oa[occ2])
        self.shift12 = start1 - start2  # translate tri2 by this to glue to tri1

        graph = coo_matrix(
            (np.ones(self.edge_tri1.shape[0]), (self.edge_tri1, self.edge_tri2)),
            shape=(nf, nf))
        self.n_components, self.labels = _csgraph_components(graph, directed=False)

        self.edge_label = self.labels[self.edge_tri1]
        vert_label = np.full(mesh.vertices.shape[0], -1, dtype=np.int64)
        vert_label[tri.ravel()] = np.repeat(self.labels, 3)
        self.vert_label = vert_label


def _topology(mesh: PeriodicMesh) -> _MeshTopology:
    if mesh._topo is None:
        mesh._topo = _MeshTopology(mesh)
    return mesh._topo


@dataclass
class SurfaceComponent:
    """One connected component of a level set with its topology record."""

    mesh: PeriodicMesh
    triangle_indices: np.ndarray
    genus: int
    rank: int | None = None
    period_lattice: tuple = ()
    homology_class: tuple | None = None
    n_vertices: int = 0
    n_edges: int = 0
    label: int = 0

    @property
    def euler_characteristic(self):
        return 2 - 2 * self.genus

    def vertex_ids(self):
        return np.unique(self.mesh.triangles[self.triangle_indices])


def components(mesh: PeriodicMesh) -> list[SurfaceComponent]:
    """Connected components with genus from the Euler characteristic.

    Raises NonManifoldEdge if any wrap-aware edge is not shared by
    exactly two triangles with opposite traversal.
    """
    topo = _topology(mesh)
    nf = mesh.triangles.shape[0]
    f_counts = np.bincount(topo.labels, minlength=topo.n_components)
    e_counts = np.bincount(topo.edge_label, minlength=topo.n_components)
    v_counts = np.bincount(topo.vert_label[topo.vert_label >= 0],
                           minlength=topo.n_components)
    out = []
    for comp in range(topo.n_components):
        chi = int(v_counts[comp]) - int(e_counts[comp]) + int(f_counts[comp])
        if chi % 2 != 0:
            raise NonManifoldEdge(f"component {comp} has odd Euler characteristic {chi}")
        tri_idx = np.flatnonzero(topo.labels == comp)
        out.append(SurfaceComponent(mesh=mesh, triangle_indices=tri_idx,
                                    genus=(2 - chi) // 2,
                                    n_vertices=int(v_counts[comp]),
                                    n_edges=int(e_counts[comp]),
                                    label=comp))
    out.sort(key=lambda c: -len(c.triangle_indices))
    return out


def _integer_span_basis(vectors):
    """Hermite-style canonical basis for the subgroup of Z^3 generated by
    the given integer vectors."""
    rows = [[int(c) for c in v] for v in vectors if any(int(c) for c in v)]
    basis = []
    col = 0
    while col < 3 and rows:
        have = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        while len(have) > 1:
            have.sort(key=lambda r: abs(r[col]))
            r0 = have[0]
            nxt = [r0]
            for r in have[1:]:
                q = r[col] // r0[col]
                rr = [r[i] - q * r0[i] for i in range(3)]
                if rr[col] != 0:
                    nxt.append(rr)
                elif any(rr):
                    rest.append(rr)
            if len(nxt) == len(have) and all(abs(a[col]) == abs(b[col]) for a, b in zip(nxt, have)):
                # all equal magnitudes: one more pass will clear them
                pass
            have = nxt
        if have:
            piv = have[0]
            if piv[col] < 0:
                piv = [-c for c in piv]
            basis.append(piv)
        rows = rest
        col += 1
    # reduce entries above later pivots into [0, pivot)
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            pj = next(k for k in range(3) if basis[j][k] != 0)
            q = basis[i][pj] // basis[j][pj]
            basis[i] = [basis[i][k] - q * basis[j][k] for k in range(3)]
    return sorted(tuple(b) for b in basis)


def period_lattice_and_rank(component: SurfaceComponent, horizon: int = 4):
    """Integer translations preserving the lifted component, and their rank.

    The lattice is accumulated from cycle displacement vectors of a
    spanning-tree walk over triangle adjacency, which computes the full
    image of the fundamental group in Z^3 exactly; ``horizon`` is kept
    for interface compatibility and validated only.
    """
    if horizon < 2:
        raise HorizonTooSmall("horizon must be >= 2")
    mesh = component.mesh
    topo = _topology(mesh)
    comp = component.label
    sel = topo.edge_label == comp
    t1 = topo.edge_tri1[sel]
    t2 = topo.edge_tri2[sel]
    s12 = topo.shift12[sel]

    adj: dict = {}
    for i in range(t1.shape[0]):
        a, b = int(t1[i]), int(t2[i])
        adj.setdefault(a, []).append((b, s12[i]))
        adj.setdefault(b, []).append((a, -s12[i]))

    start = int(component.triangle_indices[0])
    placement = {start: np.zeros(3, dtype=np.int64)}
    stack = [start]
    cycles = set()
    while stack:
        cur = stack.pop()
        pc = placement[cur]
        for nb, shift in adj.get(cur, ()):
            if nb not in placement:
                placement[nb] = pc + shift
                stack.append(nb)
            else:
                v = pc + shift - placement[nb]
                if v[0] or v[1] or v[2]:
                    cycles.add((int(v[0]), int(v[1]), int(v[2])))

    basis = _integer_span_basis(sorted(cycles))
    component.period_lattice = tuple(basis)
    component.rank = len(basis)
    return tuple(basis), len(basis)


_SQRT2 = np.sqrt(2.0)
_SQRT3 = np.sqrt(3.0)


def homology_class(component: SurfaceComponent, max_retries: int = 10):
    """Class in H_2(T^3) = Z^3: signed crossing counts of the component
    with axis-parallel probe lines at irrational anchors."""
    mesh = component.mesh
    pos = mesh.all_corner_positions()[component.triangle_indices]
    normals = np.cross(pos[:, 1] - pos[:, 0], pos[:, 2] - pos[:, 0])
    c = []
    for axis in range(3):
        u, v = (axis + 1) % 3, (axis + 2) % 3
        count = None
        for retry in range(max_retries):
            anchor = np.array([(0.5 + (retry + 1) * _SQRT2 * 7) % 1.0,
                               (0.5 + (retry + 1) * _SQRT3 * 5) % 1.0])
            try:
                count = _count_crossings(pos, normals[:, axis], u, v, anchor)
                break
            except DegenerateProbeLine:
                if retry == max_retries - 1:
                    raise
        c.append(count)
    component.homology_class = tuple(c)
    return tuple(c)


def _count_crossings(pos, nrm_axis, u, v, anchor, edge_tol=1e-9):
    p2 = pos[:, :, [u, v]]
    lo = np.floor(p2.min(axis=1) - anchor).astype(np.int64)
    hi = np.ceil(p2.max(axis=1) - anchor).astype(np.int64)
    nu = hi[:, 0] - lo[:, 0] + 1
    nv = hi[:, 1] - lo[:, 1] + 1
    reps = nu * nv
    tri_rep = np.repeat(np.arange(p2.shape[0]), reps)
    local = np.arange(int(reps.sum())) - np.repeat(np.cumsum(reps) - reps, reps)
    iu = lo[tri_rep, 0] + local // nv[tri_rep]
    iv = lo[tri_rep, 1] + local % nv[tri_rep]
    q = anchor[None, :] + np.stack([iu, iv], axis=1)

    a0 = p2[tri_rep, 0]
    d1 = p2[tri_rep, 1] - a0
    d2 = p2[tri_rep, 2] - a0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    rhs = q - a0
    valid = det != 0.0
    safe_det = np.where(valid, det, 1.0)
    s = (d2[:, 1] * rhs[:, 0] - d2[:, 0] * rhs[:, 1]) / safe_det
    t = (-d1[:, 1] * rhs[:, 0] + d1[:, 0] * rhs[:, 1]) / safe_det
    bmin = np.minimum(np.minimum(s, t), 1.0 - s - t)
    if np.any(valid & (np.abs(bmin) < edge_tol)):
        raise DegenerateProbeLine("probe line hits a triangle edge")
    inside = valid & (bmin >= edge_tol)
    signs = np.sign(nrm_axis[tri_rep]).astype(np.int64)
    return int(np.sum(signs[inside]))


def analyze_components(mesh: PeriodicMesh) -> list[SurfaceComponent]:
    """components() plus period lattice, rank and homology class for each."""
    comps = components(mesh)
    for comp in comps:
        period_lattice_and_rank(comp)
        homology_class(comp)
    return comps


def height_critical_points(component: SurfaceComponent, b, model,
                           basis=None, cluster_radius: float = 1e-3,
                           align_cut: float = 0.5, max_candidates: int = 600):
    """Points on the component where grad eps is parallel to B, Newton
    refined and tagged 'min' / 'saddle' / 'max'.

    Raises DegenerateCritical when the restricted Hessian is singular
    (violated Morse assumption for this field direction).
    """
    basis = basis or default_basis()
    b_unit = np.asarray(getattr(b, "unit", b), dtype=float)
    b_unit = b_unit / np.linalg.norm(b_unit)
    d = basis.height_covector(b_unit)
    mesh = component.mesh
    vids = component.vertex_ids()
    verts = mesh.vertices[vids]
    grads = dsp.gradient(model, verts)
    gn = np.linalg.norm(grads, axis=1)
    dhat = d / np.linalg.norm(d)
    sin_align = np.linalg.norm(np.cross(grads, dhat[None, :]), axis=1) / np.maximum(gn, 1e-30)
    order = np.argsort(sin_align)
    cand = verts[order[sin_align[order] < align_cut]][:max_candidates]

    found = []
    tree = _component_point_tree(mesh, component)
    for x0 in cand:
        x = _refine_critical(model, mesh.level, d, x0)
        if x is None:
            continue
        xf = x % 1.0
        if any(_torus_dist(xf, y) < max(cluster_radius, 1e-6) for y, _ in found):
            continue
        if not _near_tree(xf, tree, 2.5 / max(mesh.grid_n, 16)):
            continue
        index = _classify_critical(model, x, b_unit, basis)
        found.append((xf, index))
    return found


def _component_point_tree(mesh, component):
    from scipy.spatial import cKDTree
    pts = mesh.vertices[component.vertex_ids()]
    pieces = [pts]
    for shift in itertools.product((-1, 0, 1), repeat=3):
        if shift == (0, 0, 0):
            continue
        sh = pts + np.array(shift, dtype=float)
        keep = np.all((sh > -0.12) & (sh < 1.12), axis=1)
        if keep.any():
            pieces.append(sh[keep])
    return cKDTree(np.vstack(pieces))


def _near_tree(x, tree, tol):
    dist, _ = tree.query(x)
    return bool(dist < tol)


def component_locator(mesh: PeriodicMesh, comps):
    """Map fractional points (folded mod 1) to component indices by the
    nearest mesh vertex."""
    from scipy.spatial import cKDTree
    pos_in_list = np.zeros(len(comps), dtype=np.int64)
    topo = _topology(mesh)
    label_to_pos = {}
    for i, comp in enumerate(comps):
        label_to_pos[comp.label] = i
    vid_comp = np.array([label_to_pos.get(l, -1) for l in topo.vert_label])
    pts = [mesh.vertices]
    owner = [vid_comp]
    for shift in itertools.product((-1, 0, 1), repeat=3):
        if shift == (0, 0, 0):
            continue
        sh = mesh.vertices + np.array(shift, dtype=float)
        keep = np.all((sh > -0.12) & (sh < 1.12), axis=1)
        if keep.any():
            pts.append(sh[keep])
            owner.append(vid_comp[keep])
    tree = cKDTree(np.vstack(pts))
    owner = np.concatenate(owner)

    def locate(points):
        points = np.atleast_2d(np.asarray(points, dtype=float)) % 1.0
        _, idx = tree.query(points)
        return owner[idx]

    return locate


def _torus_dist(a, b):
    delta = np.abs(a - b)
    delta = np.minimum(delta, 1.0 - delta)
    return float(np.linalg.norm(delta))


def topology_report(mesh: PeriodicMesh, comps=None) -> dict:
    """JSON-ready per-component topology summary."""
    if comps is None:
        comps = analyze_components(mesh)
    return {
        "level": mesh.level,
        "grid_n": mesh.grid_n,
        "components": [
            {
                "triangles": int(len(c.triangle_indices)),
                "genus": int(c.genus),
                "rank": int(c.rank) if c.rank is not None else None,
                "periods": [list(p) for p in c.period_lattice],
                "homology": list(c.homology_class) if c.homology_class else [0, 0, 0],
            }
            for c in comps
        ],
    }


def write_obj(mesh: PeriodicMesh, path):
    """Wavefront OBJ with per-triangle corner wrap offsets in comments."""
    with open(path, "w") as fh:
        fh.write("# periodic level-set mesh; fractional coordinates\n")
        fh.write(f"# level {mesh.level!r} grid_n {mesh.grid_n}\n")
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.12f} {v[1]:.12f} {v[2]:.12f}\n")
        for tri, off in zip(mesh.triangles, mesh.offsets):
            fh.write("# wrap " + " ".join(
                ",".join(str(int(c)) for c in o) for o in off) + "\n")
            fh.write(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n")


def write_topology_json(mesh: PeriodicMesh, path, comps=None):
    with open(path, "w") as fh:
        json.dump(topology_report(mesh, comps), fh, indent=1, sort_keys=True)
        fh.write("\n")
