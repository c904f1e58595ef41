"""Critical points of the height function restricted to a level surface.

The conditions are eps(x) = level and grad eps parallel to the height
covector d (in fractional coordinates this is exactly grad_p eps
parallel to B).  Shared by the surface topology queries and the orbit
seeding logic.
"""

from __future__ import annotations

import numpy as np

from . import dispersion as dsp


class DegenerateCritical(ValueError):
    """Restricted Hessian is singular: the Morse assumption fails here."""


def _complement(d):
    d = np.asarray(d, dtype=float)
    dhat = d / np.linalg.norm(d)
    pick = np.argmin(np.abs(dhat))
    a = np.zeros(3)
    a[pick] = 1.0
    a = a - (a @ dhat) * dhat
    a /= np.linalg.norm(a)
    b = np.cross(dhat, a)
    return a, b


def refine(model, level, d, x0, tol=1e-12, max_iter=40):
    """Newton-solve {eps = level, grad eps . a = 0, grad eps . b = 0} from x0.

    Returns the refined point or None if the iteration does not converge.
    """
    a, b = _complement(d)
    scale_e = max(model.amplitude_scale(), 1e-30)
    scale_g = 2 * np.pi * scale_e
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        g = dsp.gradient(model, x)
        r = np.array([dsp.evaluate(model, x) - level,
                      g @ a, g @ b])
        if (abs(r[0]) < tol * scale_e and abs(r[1]) < tol * scale_g
                and abs(r[2]) < tol * scale_g):
            return x
        h = dsp.hessian(model, x)
        jac = np.vstack([g, a @ h, b @ h])
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            return None
        if np.linalg.norm(step) > 0.5:
            step *= 0.5 / np.linalg.norm(step)
        x = x + step
    return None


def classify(model, x, b_unit, basis, degen_tol=1e-6):
    """Morse index of a height critical point: 'min', 'saddle' or 'max'.

    Works in Cartesian p-space: with grad eps = mu * B at the point, the
    height function restricted to the surface has Hessian
    -(1/mu) t_a . H . t_b on an orthonormal tangent pair.
    """
    g_frac = dsp.gradient(model, x)
    ginv = np.linalg.inv(basis.reciprocal)
    g_cart = ginv @ g_frac
    h_cart = ginv @ dsp.hessian(model, x) @ ginv.T
    bhat = np.asarray(b_unit, dtype=float)
    bhat = bhat / np.linalg.norm(bhat)
    mu = g_cart @ bhat
    t1, t2 = _complement(g_cart)
    s = -np.array([[t1 @ h_cart @ t1, t1 @ h_cart @ t2],
                   [t2 @ h_cart @ t1, t2 @ h_cart @ t2]]) / mu
    evals = np.linalg.eigvalsh(s)
    hscale = (2 * np.pi) ** 2 * max(model.amplitude_scale(), 1e-30)
    if np.min(np.abs(evals)) < degen_tol * hscale:
        raise DegenerateCritical(
            f"restricted Hessian eigenvalues {evals} below {degen_tol:g} * scale at {x}")
    if evals[0] > 0:
        return "min"
    if evals[1] < 0:
        return "max"
    return "saddle"


def find_on_grid(model, level, d, grid_n=24, align_cut=0.6, band_cut=0.35,
                 max_candidates=400, tol=1e-12):
    """Grid-scan candidates for height critical points and refine each.

    Returns deduplicated refined points (fractional coordinates folded
    into [0, 1)), unclassified.
    """
    t = np.arange(grid_n) / grid_n
    xg, yg, zg = np.meshgrid(t, t, t, indexing="ij")
    pts = np.stack([xg, yg, zg], axis=-1).reshape(-1, 3)
    vals = dsp.evaluate(model, pts)
    grads = dsp.gradient(model, pts)
    gn = np.linalg.norm(grads, axis=1)
    dhat = np.asarray(d, dtype=float)
    dhat = dhat / np.linalg.norm(dhat)
    cross = np.linalg.norm(np.cross(grads, dhat[None, :]), axis=1)
    sin_align = cross / np.maximum(gn, 1e-30)
    scale_e = max(model.amplitude_scale(), 1e-30)
    mask = (np.abs(vals - level) < band_cut * scale_e) & (sin_align < align_cut) & (gn > 1e-12)
    cand = pts[mask]
    order = np.argsort(sin_align[mask])
    cand = cand[order][:max_candidates]
    found = []
    for x0 in cand:
        x = refine(model, level, d, x0, tol=tol)
        if x is None:
            continue
        xf = x % 1.0
        if not any(_torus_close(xf, y, 1e-5) for y in found):
            found.append(xf)
    return found


def _torus_close(a, b, tol):
    delta = np.abs(a - b)
    delta = np.minimum(delta, 1.0 - delta)
    return float(np.max(delta)) < tol
