"""Three-periodic dispersion relations built from cosine-product series.

A model is a finite sum ``offset + sum_t a_t * prod_i cos(2 pi k_ti x_i)``
evaluated in fractional reciprocal coordinates, so periodicity under the
reciprocal lattice and evenness ``eps(x) = eps(-x)`` hold by construction.
The analytic three-parameter family (simple + pairwise + triple cosine
products) and the thin spatial net live here, together with the Fermi
occupation factor and the torus-averaged net current.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

TWO_PI = 2.0 * np.pi


class AllZeroAmplitudes(ValueError):
    """Every family amplitude vanished."""


class RadiusOutOfRange(ValueError):
    """Thin-net tube radius outside (0, 0.5) cell units."""


@dataclass(frozen=True)
class DispersionModel:
    """Cosine-product series with integer frequency vectors.

    Parameters
    ----------
    freqs : (nterms, 3) int array
        Frequency vector of each term in reciprocal-basis coordinates.
    amps : (nterms,) float array
        Term amplitudes (energy units).
    offset : float
        Constant energy shift.
    name : str
        Human-readable tag carried through reports.
    """

    freqs: np.ndarray
    amps: np.ndarray
    offset: float = 0.0
    name: str = "model"

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.freqs, dtype=np.int64))
        a = np.atleast_1d(np.asarray(self.amps, dtype=float))
        if f.shape != (a.shape[0], 3):
            raise ValueError("freqs must be (nterms, 3) matching amps")
        f = np.abs(f)  # cos is even in each factor
        f.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "amps", a)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def terms(self):
        return [(tuple(int(c) for c in k), float(a)) for k, a in zip(self.freqs, self.amps)]

    def amplitude_scale(self):
        return float(np.abs(self.amps).sum())

    def evaluate(self, x):
        return evaluate(self, x)

    def gradient(self, x):
        return gradient(self, x)


@dataclass(frozen=True)
class EnergyLevel:
    """An energy value picking a level set, with a band tag for overlays."""

    value: float
    band: str = "0"

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


def as_level(level) -> EnergyLevel:
    if isinstance(level, EnergyLevel):
        return level
    return EnergyLevel(float(level))


def evaluate(model: DispersionModel, x):
    """Evaluate eps at fractional coordinates ``x`` (shape (..., 3))."""
    x = np.asarray(x, dtype=float)
    phases = TWO_PI * x[..., None, :] * model.freqs  # (..., nt, 3)
    prods = np.cos(phases).prod(axis=-1)
    return model.offset + prods @ model.amps


def gradient(model: DispersionModel, x):
    """Analytic gradient of eps w.r.t. fractional coordinates, shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    phases = TWO_PI * x[..., None, :] * model.freqs
    c = np.cos(phases)
    s = np.sin(phases)
    out = np.zeros(x.shape, dtype=float)
    for j in range(3):
        part = np.ones(phases.shape[:-1])
        for i in range(3):
            part = part * (s[..., i] if i == j else c[..., i])
        out[..., j] = -(part * (TWO_PI * model.freqs[:, j])) @ model.amps
    return out


def hessian(model: DispersionModel, x):
    """Analytic Hessian at a single fractional point, shape (3, 3)."""
    x = np.asarray(x, dtype=float).reshape(3)
    ph = TWO_PI * x[None, :] * model.freqs
    c = np.cos(ph)
    s = np.sin(ph)
    w = TWO_PI * model.freqs.astype(float)
    h = np.zeros((3, 3))
    for t in range(model.amps.shape[0]):
        a = model.amps[t]
        for j in range(3):
            diag = -a * w[t, j] ** 2
            for i in range(3):
                diag *= c[t, i]
            h[j, j] += diag
            for l_ in range(j + 1, 3):
                term = a * w[t, j] * w[t, l_]
                for i in range(3):
                    term *= s[t, i] if i in (j, l_) else c[t, i]
                h[j, l_] += term
                h[l_, j] += term
    return h


def make_anferms(alpha: float, beta: float, delta: float, name: str | None = None) -> DispersionModel:
    """Analytic family: alpha * (sum of single cosines) + beta * (sum of
    pairwise products) + delta * (triple product), frequencies the unit
    integer vectors."""
    if alpha == 0 and beta == 0 and delta == 0:
        raise AllZeroAmplitudes("alpha, beta, delta all zero")
    freqs = []
    amps = []
    if alpha != 0:
        freqs += [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
        amps += [alpha] * 3
    if beta != 0:
        freqs += [(1, 1, 0), (0, 1, 1), (1, 0, 1)]
        amps += [beta] * 3
    if delta != 0:
        freqs += [(1, 1, 1)]
        amps += [delta]
    if name is None:
        name = f"anferms(a={alpha:g},b={beta:g},d={delta:g})"
    return DispersionModel(np.array(freqs), np.array(amps), 0.0, name)


THIN_NET_BETA = -0.25


def make_thin_net(tube_radius: float) -> DispersionModel:
    """Cubic net of tubes along the coordinate axes; its level set at
    energy 0 is the net surface whose neck half-width equals ``tube_radius``
    (cell units).

    Realized inside the analytic family with alpha = 1, delta = 0 and a
    fixed pair-coupling beta; the level is solved by a 1D root find on
    the neck cross-section at the arm midpoint and folded into the model
    offset, so callers always slice at energy 0.
    """
    if not 0.0 < tube_radius < 0.5:
        raise RadiusOutOfRange(f"tube_radius {tube_radius} outside (0, 0.5)")
    base = make_anferms(1.0, THIN_NET_BETA, 0.0)

    def neck_halfwidth(zeta):
        # cross-section of the x-arm at its thinnest point x = 1/2,
        # measured along y at z = 0
        f = lambda w: evaluate(base, np.array([0.5, w, 0.0])) - zeta
        return brentq(f, 0.0, 0.5, xtol=1e-14)

    lo, hi = -1.0 - THIN_NET_BETA + 1e-9, 1.0 - THIN_NET_BETA - 1e-9
    zeta = brentq(lambda z: neck_halfwidth(z) - tube_radius, lo, hi, xtol=1e-13)
    return DispersionModel(base.freqs, base.amps, -zeta,
                           name=f"thin_net(r={tube_radius:g})")


def fermi_occupation(model: DispersionModel, level, T: float, p):
    """Fermi factor 1 / (1 + exp((eps - eps_F)/T)); step function at T = 0."""
    if T < 0:
        raise ValueError("temperature must be >= 0")
    lvl = as_level(level)
    e = evaluate(model, p) - lvl.value
    if T == 0:
        return np.where(e < 0, 1.0, np.where(e > 0, 0.0, 0.5))
    return expit(-e / T)


def net_current(model: DispersionModel, level, T: float, grid_n: int, basis=None):
    """Midpoint-rule torus integral of the group velocity weighted by the
    Fermi factor; vanishes to rounding for even dispersions."""
    if grid_n < 8:
        raise ValueError("grid_n must be >= 8")
    lvl = as_level(level)
    t = (np.arange(grid_n) + 0.5) / grid_n
    xg, yg, zg = np.meshgrid(t, t, t, indexing="ij")
    pts = np.stack([xg, yg, zg], axis=-1).reshape(-1, 3)
    g = gradient(model, pts)
    f = fermi_occupation(model, lvl, T, pts)
    j = (g * f[:, None]).mean(axis=0)
    if basis is not None:
        j = np.linalg.solve(basis.reciprocal.T, j)  # grad_p = G^{-1} grad_x
    return j


def band_range(model: DispersionModel, grid_n: int = 48):
    """Sampled (min, max) of eps over the torus."""
    t = np.arange(grid_n) / grid_n
    xg, yg, zg = np.meshgrid(t, t, t, indexing="ij")
    v = evaluate(model, np.stack([xg, yg, zg], axis=-1))
    return float(v.min()), float(v.max())


def level_in_band(model: DispersionModel, level, grid_n: int = 32) -> bool:
    lo, hi = band_range(model, grid_n)
    return lo <= as_level(level).value <= hi


def model_sum(*models: DispersionModel, name: str = "sum") -> DispersionModel:
    """Sum of models, with like frequency vectors merged."""
    acc = {}
    offset = 0.0
    for m in models:
        offset += m.offset
        for k, a in zip(m.freqs, m.amps):
            key = tuple(int(c) for c in k)
            acc[key] = acc.get(key, 0.0) + float(a)
    return _from_term_dict(acc, offset, name)


def model_scale(model: DispersionModel, c: float, name: str | None = None) -> DispersionModel:
    return DispersionModel(model.freqs, model.amps * c, model.offset * c,
                           name or f"{c:g}*{model.name}")


def model_shift(model: DispersionModel, c: float) -> DispersionModel:
    return DispersionModel(model.freqs, model.amps, model.offset + c, model.name)


def model_product(m1: DispersionModel, m2: DispersionModel, name: str = "product") -> DispersionModel:
    """Pointwise product of two models, expanded back into cosine-product
    terms with the product-to-sum identity applied per coordinate."""
    terms1 = list(zip(m1.freqs.tolist(), m1.amps.tolist())) + [([0, 0, 0], m1.offset)]
    terms2 = list(zip(m2.freqs.tolist(), m2.amps.tolist())) + [([0, 0, 0], m2.offset)]
    acc = {}
    for k1, a1 in terms1:
        if a1 == 0.0:
            continue
        for k2, a2 in terms2:
            if a2 == 0.0:
                continue
            for signs in range(8):
                k = []
                w = a1 * a2
                for i in range(3):
                    if (signs >> i) & 1:
                        ki = k1[i] + k2[i]
                    else:
                        ki = k1[i] - k2[i]
                    if k1[i] != 0 and k2[i] != 0:
                        w *= 0.5
                    elif (signs >> i) & 1:
                        # only one split needed when a factor is constant
                        w = 0.0
                    k.append(abs(ki))
                if w == 0.0:
                    continue
                key = tuple(k)
                acc[key] = acc.get(key, 0.0) + w
    return _from_term_dict(acc, 0.0, name)


def _from_term_dict(acc, offset, name, tiny=1e-15):
    offset = offset + acc.pop((0, 0, 0), 0.0)
    items = sorted((k, a) for k, a in acc.items() if abs(a) > tiny)
    if not items:
        return DispersionModel(np.zeros((1, 3), dtype=int), np.zeros(1), offset, name)
    freqs = np.array([k for k, _ in items], dtype=np.int64)
    amps = np.array([a for _, a in items], dtype=float)
    return DispersionModel(freqs, amps, offset, name)
