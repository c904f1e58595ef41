"""Direct/reciprocal lattice arithmetic and field-direction rationality.

Conventions: the direct lattice is generated by ``l1, l2, l3`` (length
units), the reciprocal one by ``g1, g2, g3`` (momentum units) with
``<g_i, l_j> = planck_scale * delta_ij``.  The package default is the
cubic lattice with constant ``2*pi`` and ``planck_scale = 2*pi`` so that
the reciprocal lattice is exactly ``Z^3`` and cosine-series frequencies
are integer vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import gcd

import numpy as np

DUALITY_RTOL = 1e-10


class DegenerateLattice(ValueError):
    """Direct vectors are (numerically) coplanar."""


class CollinearSamples(ValueError):
    """Mean-direction samples do not span a plane."""


class NoIntegerFit(ValueError):
    """No integer normal within the denominator bound fits the samples."""


class Irrationality(Enum):
    """Dimension over Q spanned by (B,g1), (B,g2), (B,g3).

    Irr1 means the direction is rational (two independent integer
    relations), Irr3 fully irrational (none found).
    """

    Irr1 = 1
    Irr2 = 2
    Irr3 = 3
    Undetermined = 0


@dataclass(frozen=True)
class LatticeBasis:
    """Dual pair of direct and reciprocal bases.

    ``direct`` and ``reciprocal`` hold the generating vectors as rows.
    """

    direct: np.ndarray
    reciprocal: np.ndarray
    planck_scale: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.direct, dtype=float).reshape(3, 3)
        r = np.asarray(self.reciprocal, dtype=float).reshape(3, 3)
        d.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "direct", d)
        object.__setattr__(self, "reciprocal", r)
        prod = r @ d.T
        err = np.abs(prod - self.planck_scale * np.eye(3)).max()
        if err > 1e-9 * abs(self.planck_scale):
            raise ValueError(f"basis pair violates duality by {err:.3e}")

    @property
    def g(self):
        return self.reciprocal

    @property
    def l(self):
        return self.direct

    def volume(self):
        """Signed triple product of the direct vectors."""
        return float(np.linalg.det(self.direct))

    def height_covector(self, b_unit):
        """Coefficients d_i = (B, g_i); the height function is d.x in
        fractional reciprocal coordinates."""
        return self.reciprocal @ np.asarray(b_unit, dtype=float)

    def fractional_to_cartesian(self, x):
        """Map fractional reciprocal coordinates to Cartesian p-space."""
        return np.asarray(x, dtype=float) @ self.reciprocal

    def cartesian_to_fractional(self, p):
        return np.asarray(p, dtype=float) @ np.linalg.inv(self.reciprocal)

    def plane_normal_cartesian(self, n):
        """Cartesian normal of the integral plane n.[x]_g = 0 (along
        sum n_i l_i)."""
        return np.asarray(n, dtype=float) @ self.direct


def reciprocal_basis(l1, l2, l3, planck_scale=1.0) -> LatticeBasis:
    """Build the reciprocal basis g_i = planck_scale * (l_j x l_k) / (l1,l2,l3).

    Raises
    ------
    DegenerateLattice
        If the triple product is below 1e-12 * |l1||l2||l3|.
    """
    l = np.array([l1, l2, l3], dtype=float)
    vol = float(np.linalg.det(l))
    scale = np.prod(np.linalg.norm(l, axis=1))
    if abs(vol) < 1e-12 * scale:
        raise DegenerateLattice(f"triple product {vol:.3e} below tolerance")
    g = planck_scale * np.array([
        np.cross(l[1], l[2]),
        np.cross(l[2], l[0]),
        np.cross(l[0], l[1]),
    ]) / vol
    return LatticeBasis(direct=l, reciprocal=g, planck_scale=planck_scale)


def default_basis() -> LatticeBasis:
    """Cubic lattice with a = 2*pi and planck_scale = 2*pi, so g_i = e_i."""
    return reciprocal_basis(
        2 * np.pi * np.eye(3)[0],
        2 * np.pi * np.eye(3)[1],
        2 * np.pi * np.eye(3)[2],
        planck_scale=2 * np.pi,
    )


@dataclass(frozen=True)
class FieldDirection:
    """A magnetic field direction on the unit sphere with its rational
    structure relative to a reciprocal basis."""

    unit: np.ndarray
    irrationality: Irrationality = Irrationality.Undetermined
    relations: tuple = ()
    exact: bool = False

    def __post_init__(self):
        u = np.asarray(self.unit, dtype=float).reshape(3)
        norm = np.linalg.norm(u)
        if not norm > 0:
            raise ValueError("zero field direction")
        u = u / norm
        u.flags.writeable = False
        object.__setattr__(self, "unit", u)
        object.__setattr__(self, "relations", tuple(tuple(int(c) for c in m) for m in self.relations))

    def __iter__(self):
        return iter(self.unit)


def _relation_rank(relations):
    if not relations:
        return 0
    m = np.array(relations, dtype=float)
    return int(np.linalg.matrix_rank(m, tol=1e-9))


def _reduce_relations(found):
    """Keep a minimal-height independent generating set (at most 2)."""
    found = sorted(found, key=lambda m: (max(abs(c) for c in m), sum(abs(c) for c in m)))
    kept = []
    for m in found:
        if _relation_rank(kept + [m]) > len(kept):
            kept.append(m)
        if len(kept) == 2:
            break
    return kept


def _canonical_relation(m):
    g = gcd(gcd(abs(m[0]), abs(m[1])), abs(m[2]))
    if g > 1:
        m = tuple(c // g for c in m)
    for c in m:
        if c != 0:
            return m if c > 0 else tuple(-c for c in m)
    return m


def classify_direction(b, basis: LatticeBasis | None = None, height_bound: int = 50,
                       tol: float = 1e-9) -> FieldDirection:
    """Classify the rationality of a field direction.

    Searches integer relations m.d = 0 among d_i = (B, g_i) with
    |m_i| <= height_bound; the irrationality is 3 minus the number of
    independent relations.  Relations seen only at the top of the
    searched height range are treated as inconclusive and the direction
    is tagged Undetermined rather than guessed.

    ``b`` may be a Cartesian 3-vector, or a triple of
    ``fractions.Fraction`` (or int) interpreted as exact coordinates in
    the reciprocal basis; in the exact case the classification ignores
    ``tol`` entirely.
    """
    if height_bound < 1:
        raise ValueError("height_bound must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if basis is None:
        basis = default_basis()

    exact_coords = _as_exact_coords(b)
    if exact_coords is not None:
        return _classify_exact(exact_coords, basis)

    unit = np.asarray(b, dtype=float).reshape(3)
    unit = unit / np.linalg.norm(unit)
    d = basis.height_covector(unit)
    scale = np.linalg.norm(d)

    rng = np.arange(-height_bound, height_bound + 1)
    m1, m2, m3 = np.meshgrid(rng, rng, rng, indexing="ij")
    coeff = np.stack([m1.ravel(), m2.ravel(), m3.ravel()], axis=1)
    nonzero = np.any(coeff != 0, axis=1)
    coeff = coeff[nonzero]
    norms = np.linalg.norm(coeff, axis=1)
    resid = np.abs(coeff @ d) / (norms * scale)
    hits = coeff[resid < tol]

    interior_cut = max(1, int(0.8 * height_bound))
    found = [tuple(int(c) for c in m) for m in hits]
    kept = _reduce_relations(found)
    marginal = [m for m in kept if max(abs(c) for c in m) > interior_cut]
    if marginal and height_bound > 1:
        return FieldDirection(unit, Irrationality.Undetermined,
                              tuple(_canonical_relation(m) for m in kept), exact=False)
    irr = Irrationality(3 - len(kept)) if kept else Irrationality.Irr3
    return FieldDirection(unit, irr, tuple(_canonical_relation(m) for m in kept), exact=False)


def _as_exact_coords(b):
    if isinstance(b, FieldDirection):
        return None
    try:
        items = list(b)
    except TypeError:
        return None
    if len(items) != 3:
        return None
    if all(isinstance(c, (int, Fraction)) for c in items):
        return [Fraction(c) for c in items]
    return None


def _rational_gram(basis, max_den=10**6):
    gram = basis.reciprocal @ basis.reciprocal.T
    out = []
    for row in gram:
        fr_row = []
        for v in row:
            f = Fraction(float(v)).limit_denominator(max_den)
            if abs(float(f) - v) > 1e-9 * max(1.0, abs(v)):
                return None
            fr_row.append(f)
        out.append(fr_row)
    return out


def _classify_exact(coords, basis):
    gram = _rational_gram(basis)
    if gram is None:
        raise ValueError("exact classification needs a rational Gram matrix; "
                         "pass the direction as floats instead")
    # d_i = (B, g_i) with B = sum coords_j g_j is rational, hence the three
    # numbers span Q: irrationality 1 with two exact relations.
    d = [sum(gram[i][j] * coords[j] for j in range(3)) for i in range(3)]
    if all(v == 0 for v in d):
        raise ValueError("zero field direction")
    den = np.lcm.reduce([v.denominator for v in d])
    q = [int(v * den) for v in d]
    rels = _integer_orthogonal_pair(q)
    unit = np.array([float(c) for c in coords]) @ basis.reciprocal
    return FieldDirection(unit, Irrationality.Irr1,
                          tuple(_canonical_relation(m) for m in rels), exact=True)


def _integer_orthogonal_pair(q):
    """Two independent integer vectors orthogonal to integer vector q."""
    q = [int(v) for v in q]
    rels = []
    axes = np.eye(3, dtype=int)
    for i in range(3):
        for j in range(i + 1, 3):
            # q_j * e_i - q_i * e_j is orthogonal to q
            m = tuple(q[j] * axes[i][k] - q[i] * axes[j][k] for k in range(3))
            if any(m) and _relation_rank(rels + [m]) > len(rels):
                rels.append(m)
            if len(rels) == 2:
                return rels
    return rels


@dataclass(frozen=True)
class IntegerPlane:
    """Integral plane through the origin, n1*[x]_1 + n2*[x]_2 + n3*[x]_3 = 0
    in reciprocal-basis coordinates; gcd 1 and first nonzero entry positive."""

    n: tuple

    def __post_init__(self):
        n = tuple(int(c) for c in np.asarray(self.n).reshape(3))
        if n == (0, 0, 0):
            raise ValueError("zero normal")
        n = _canonical_relation(n)
        object.__setattr__(self, "n", n)

    def normal_cartesian(self, basis: LatticeBasis | None = None):
        basis = basis or default_basis()
        v = basis.plane_normal_cartesian(self.n)
        return v / np.linalg.norm(v)

    def __str__(self):
        return "({}, {}, {})".format(*self.n)


def integer_plane_from_directions(eta_samples, basis: LatticeBasis | None = None,
                                  denom_bound: int = 12,
                                  residual_tol: float = 1e-3) -> IntegerPlane:
    """Fit the integral plane through the origin spanned by mean-direction
    samples and round its normal to integer reciprocal-dual coordinates.

    Raises
    ------
    CollinearSamples
        Fewer than two independent directions among the samples.
    NoIntegerFit
        The rounded integer normal leaves some sample off the plane by
        more than ``residual_tol`` (relative), which signals a chaotic
        or misclassified zone.
    """
    basis = basis or default_basis()
    s = np.asarray(eta_samples, dtype=float).reshape(-1, 3)
    if s.shape[0] < 2:
        raise CollinearSamples("need at least two samples")
    norms = np.linalg.norm(s, axis=1)
    if np.any(norms == 0):
        raise CollinearSamples("zero sample direction")
    s = s / norms[:, None]
    # least-squares plane normal: smallest right singular vector
    _, sv, vt = np.linalg.svd(s)
    if sv[1] < 1e-7 * sv[0]:
        raise CollinearSamples("samples span a line, not a plane")
    normal = vt[2]

    # dual coordinates in which the plane equation has integer coefficients
    n_real = basis.reciprocal @ normal
    lead = np.max(np.abs(n_real))
    n_scaled = n_real / lead
    best = _best_integer_direction(n_scaled, denom_bound)
    if best is None:
        raise NoIntegerFit("no integer vector within denominator bound")
    plane = IntegerPlane(best)
    fitted = plane.normal_cartesian(basis)
    resid = np.abs(s @ fitted).max()
    if resid > residual_tol:
        raise NoIntegerFit(f"sample residual {resid:.3e} exceeds {residual_tol:.1e}")
    return plane


def _best_integer_direction(v, denom_bound):
    """Smallest integer vector (entries bounded by denom_bound) parallel
    to v, via best rational approximation of the component ratios."""
    best = None
    best_err = np.inf
    for q in range(1, denom_bound + 1):
        cand = np.round(v * q)
        if np.all(cand == 0) or np.max(np.abs(cand)) > denom_bound:
            continue
        cn = cand / np.linalg.norm(cand)
        vn = v / np.linalg.norm(v)
        err = min(np.linalg.norm(cn - vn), np.linalg.norm(cn + vn))
        if err < best_err - 1e-15:
            best_err = err
            best = cand.astype(int)
    if best is None:
        return None
    return tuple(int(c) for c in best)
