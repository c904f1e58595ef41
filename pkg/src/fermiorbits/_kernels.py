"""Numba kernels for orbit tracing.

The tracer follows the implicit curve {eps(x) = level} intersected with
{d . x = h} in fractional coordinates on the universal cover, with the
orientation of the magnetic flow (tangent along grad(eps) x d).  All
state lives in plain float arrays so the hot loop compiles to machine
code; the Python wrapper in orbits.py owns classification and units.
"""

from __future__ import annotations

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi

STATUS_BUDGET = 0
STATUS_CLOSED = 1
STATUS_PERIODIC = 2
STATUS_SINGULAR = 3
STATUS_STEP_COLLAPSE = 4
STATUS_CHAIN_FULL = 5
STATUS_OPEN_EARLY = 6
STATUS_SEED_FAIL = 7
STATUS_STUCK = 8


@njit(cache=True, fastmath=True)
def eval_and_grad(freqs, amps, offset, x0, x1, x2):
    val = offset
    g0 = 0.0
    g1 = 0.0
    g2 = 0.0
    for t in range(amps.shape[0]):
        a = amps[t]
        k0 = freqs[t, 0]
        k1 = freqs[t, 1]
        k2 = freqs[t, 2]
        if k0 != 0.0:
            a0 = TWO_PI * k0 * x0
            c0 = np.cos(a0)
            s0 = np.sin(a0)
        else:
            c0 = 1.0
            s0 = 0.0
        if k1 != 0.0:
            a1 = TWO_PI * k1 * x1
            c1 = np.cos(a1)
            s1 = np.sin(a1)
        else:
            c1 = 1.0
            s1 = 0.0
        if k2 != 0.0:
            a2 = TWO_PI * k2 * x2
            c2 = np.cos(a2)
            s2 = np.sin(a2)
        else:
            c2 = 1.0
            s2 = 0.0
        val += a * c0 * c1 * c2
        g0 -= a * TWO_PI * k0 * s0 * c1 * c2
        g1 -= a * TWO_PI * k1 * c0 * s1 * c2
        g2 -= a * TWO_PI * k2 * c0 * c1 * s2
    return val, g0, g1, g2


@njit(cache=True, fastmath=True)
def project_point(freqs, amps, offset, level, d, h, x, tol, scale_e, scale_h):
    """Newton projection of x onto {eps = level, d.x = h} in place.

    Returns (ok, g0, g1, g2) with the gradient at the final point."""
    g0 = 0.0
    g1 = 0.0
    g2 = 0.0
    for _ in range(40):
        val, g0, g1, g2 = eval_and_grad(freqs, amps, offset, x[0], x[1], x[2])
        r1 = val - level
        r2 = d[0] * x[0] + d[1] * x[1] + d[2] * x[2] - h
        if abs(r1) <= tol * scale_e and abs(r2) <= tol * scale_h:
            return True, g0, g1, g2
        a11 = g0 * g0 + g1 * g1 + g2 * g2
        a12 = g0 * d[0] + g1 * d[1] + g2 * d[2]
        a22 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
        det = a11 * a22 - a12 * a12
        if det < 1e-300:
            return False, g0, g1, g2
        l1 = (a22 * r1 - a12 * r2) / det
        l2 = (-a12 * r1 + a11 * r2) / det
        dx0 = l1 * g0 + l2 * d[0]
        dx1 = l1 * g1 + l2 * d[1]
        dx2 = l1 * g2 + l2 * d[2]
        nrm = np.sqrt(dx0 * dx0 + dx1 * dx1 + dx2 * dx2)
        if nrm > 0.25:
            sc = 0.25 / nrm
            dx0 *= sc
            dx1 *= sc
            dx2 *= sc
        x[0] -= dx0
        x[1] -= dx1
        x[2] -= dx2
    return False, g0, g1, g2


@njit(cache=True, fastmath=True)
def trace_kernel(freqs, amps, offset, level, d, h, seed, orient,
                 max_arc, step_init, min_step, max_step, max_turn_cos,
                 trace_tol, scale_e, closure_tol, sing_sin_tol, record_ds,
                 early_open, min_arc_open, open_dir_tol, open_growth_cap,
                 chain):
    """Trace one orbit.  Returns (status, npts, arc, m0, m1, m2).

    ``chain`` is a preallocated (cap, 3) buffer receiving points spaced
    ~record_ds apart in arc length, starting with the projected seed and
    ending with the final point.
    """
    cap = chain.shape[0]
    scale_h = np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    x = seed.copy()
    ok, g0, g1, g2 = project_point(freqs, amps, offset, level, d, h, x,
                                   trace_tol, scale_e, scale_h)
    if not ok:
        return STATUS_SEED_FAIL, 0, 0.0, 0, 0, 0

    t0_ = (g1 * d[2] - g2 * d[1]) * orient
    t1_ = (g2 * d[0] - g0 * d[2]) * orient
    t2_ = (g0 * d[1] - g1 * d[0]) * orient
    tn = np.sqrt(t0_ * t0_ + t1_ * t1_ + t2_ * t2_)
    gn = np.sqrt(g0 * g0 + g1 * g1 + g2 * g2)
    chain[0, 0] = x[0]
    chain[0, 1] = x[1]
    chain[0, 2] = x[2]
    if tn < sing_sin_tol * gn * scale_h:
        return STATUS_SINGULAR, 1, 0.0, 0, 0, 0
    tc0 = t0_ / tn
    tc1 = t1_ / tn
    tc2 = t2_ / tn
    T00 = tc0
    T01 = tc1
    T02 = tc2
    xs0 = x[0]
    xs1 = x[1]
    xs2 = x[2]

    npts = 1
    arc = 0.0
    last_rec = 0.0
    s = step_init
    prev_psi = 0.0
    prev_near = False
    pm0 = 0
    pm1 = 0
    pm2 = 0
    next_check = min_arc_open
    trial = np.empty(3)
    max_steps = int(max_arc / record_ds) * 40 + 200000

    nsteps = 0
    while arc < max_arc:
        nsteps += 1
        if nsteps > max_steps:
            return STATUS_BUDGET, npts, arc, 0, 0, 0
        accepted = False
        cosang = 1.0
        n0 = tc0
        n1 = tc1
        n2 = tc2
        for _attempt in range(60):
            trial[0] = x[0] + s * tc0
            trial[1] = x[1] + s * tc1
            trial[2] = x[2] + s * tc2
            ok, g0, g1, g2 = project_point(freqs, amps, offset, level, d, h,
                                           trial, trace_tol, scale_e, scale_h)
            if not ok:
                s *= 0.5
                if s < min_step:
                    return STATUS_STEP_COLLAPSE, npts, arc, 0, 0, 0
                continue
            n0 = (g1 * d[2] - g2 * d[1]) * orient
            n1 = (g2 * d[0] - g0 * d[2]) * orient
            n2 = (g0 * d[1] - g1 * d[0]) * orient
            tn = np.sqrt(n0 * n0 + n1 * n1 + n2 * n2)
            gn = np.sqrt(g0 * g0 + g1 * g1 + g2 * g2)
            if tn < sing_sin_tol * gn * scale_h:
                chain[npts - 1, 0] = trial[0]
                chain[npts - 1, 1] = trial[1]
                chain[npts - 1, 2] = trial[2]
                return STATUS_SINGULAR, npts, arc, 0, 0, 0
            n0 /= tn
            n1 /= tn
            n2 /= tn
            cosang = n0 * tc0 + n1 * tc1 + n2 * tc2
            if cosang < max_turn_cos:
                s *= 0.5
                if s < min_step:
                    return STATUS_STEP_COLLAPSE, npts, arc, 0, 0, 0
                continue
            accepted = True
            break
        if not accepted:
            return STATUS_STEP_COLLAPSE, npts, arc, 0, 0, 0

        ds = np.sqrt((trial[0] - x[0]) ** 2 + (trial[1] - x[1]) ** 2
                     + (trial[2] - x[2]) ** 2)
        arc += ds

        # closure / lattice-periodicity detection against the start point:
        # watch the Poincare section through xs + m with normal T0
        y0 = trial[0] - xs0
        y1 = trial[1] - xs1
        y2 = trial[2] - xs2
        m0 = int(np.rint(y0))
        m1 = int(np.rint(y1))
        m2 = int(np.rint(y2))
        r0 = y0 - m0
        r1 = y1 - m1
        r2 = y2 - m2
        rn = np.sqrt(r0 * r0 + r1 * r1 + r2 * r2)
        near = rn < 2.5 * s + 8.0 * closure_tol
        psi = r0 * T00 + r1 * T01 + r2 * T02
        if (near and prev_near and m0 == pm0 and m1 == pm1 and m2 == pm2
                and prev_psi < 0.0 <= psi and arc > 3.0 * step_init):
            w = prev_psi / (prev_psi - psi)
            cand = np.empty(3)
            cand[0] = x[0] + w * (trial[0] - x[0])
            cand[1] = x[1] + w * (trial[1] - x[1])
            cand[2] = x[2] + w * (trial[2] - x[2])
            ok, cg0, cg1, cg2 = project_point(freqs, amps, offset, level, d, h,
                                              cand, trace_tol, scale_e, scale_h)
            if ok:
                cb0 = (cg1 * d[2] - cg2 * d[1]) * orient
                cb1 = (cg2 * d[0] - cg0 * d[2]) * orient
                cb2 = (cg0 * d[1] - cg1 * d[0]) * orient
                ctn = np.sqrt(cb0 * cb0 + cb1 * cb1 + cb2 * cb2)
                dirdot = 0.0
                if ctn > 0.0:
                    dirdot = (cb0 * T00 + cb1 * T01 + cb2 * T02) / ctn
                rr0 = cand[0] - xs0 - m0
                rr1 = cand[1] - xs1 - m1
                rr2 = cand[2] - xs2 - m2
                along = rr0 * T00 + rr1 * T01 + rr2 * T02
                p0 = rr0 - along * T00
                p1 = rr1 - along * T01
                p2 = rr2 - along * T02
                miss = np.sqrt(p0 * p0 + p1 * p1 + p2 * p2)
                if dirdot > 0.5 and miss < closure_tol:
                    chain[npts - 1, 0] = cand[0]
                    chain[npts - 1, 1] = cand[1]
                    chain[npts - 1, 2] = cand[2]
                    if m0 == 0 and m1 == 0 and m2 == 0:
                        return STATUS_CLOSED, npts, arc, 0, 0, 0
                    return STATUS_PERIODIC, npts, arc, m0, m1, m2
        prev_psi = psi
        prev_near = near
        pm0 = m0
        pm1 = m1
        pm2 = m2

        x[0] = trial[0]
        x[1] = trial[1]
        x[2] = trial[2]
        tc0 = n0
        tc1 = n1
        tc2 = n2
        if cosang > 0.999:
            s = min(s * 1.3, max_step)
        elif cosang > 0.99:
            s = min(s * 1.1, max_step)

        if arc - last_rec >= record_ds:
            if npts >= cap:
                return STATUS_CHAIN_FULL, npts, arc, 0, 0, 0
            chain[npts, 0] = x[0]
            chain[npts, 1] = x[1]
            chain[npts, 2] = x[2]
            npts += 1
            last_rec = arc

        if arc >= next_check and npts >= 16:
            if _stagnated(chain, npts, record_ds):
                return STATUS_STUCK, npts, arc, 0, 0, 0
            if early_open == 1 and _open_converged(chain, npts, open_dir_tol,
                                                   open_growth_cap):
                return STATUS_OPEN_EARLY, npts, arc, 0, 0, 0
            next_check *= 1.3

    return STATUS_BUDGET, npts, arc, 0, 0, 0


@njit(cache=True, fastmath=True)
def _stagnated(chain, npts, record_ds):
    """True when the last ~15 cells of recorded arc stayed inside a tiny
    box: the tracer is cycling a spurious loop (e.g. after hopping
    branches at a near-tangency) and will not make further progress."""
    k = int(15.0 / record_ds)
    if npts < 2 * k or k < 8:
        return False
    lo0 = chain[npts - k, 0]
    hi0 = lo0
    lo1 = chain[npts - k, 1]
    hi1 = lo1
    lo2 = chain[npts - k, 2]
    hi2 = lo2
    for i in range(npts - k, npts):
        c0 = chain[i, 0]
        c1 = chain[i, 1]
        c2 = chain[i, 2]
        if c0 < lo0:
            lo0 = c0
        elif c0 > hi0:
            hi0 = c0
        if c1 < lo1:
            lo1 = c1
        elif c1 > hi1:
            hi1 = c1
        if c2 < lo2:
            lo2 = c2
        elif c2 > hi2:
            hi2 = c2
    diag = np.sqrt((hi0 - lo0) ** 2 + (hi1 - lo1) ** 2 + (hi2 - lo2) ** 2)
    return diag < 0.08


@njit(cache=True, fastmath=True)
def _open_converged(chain, npts, dir_tol, growth_cap):
    """Quarter-window direction agreement plus bounded transverse extent.

    Mirrors the chain classifier (all pairwise quarter-window angles
    within dir_tol, extent growth strictly inside the chaos threshold)
    so an early stop here always classifies as a stable open orbit.
    """
    q = npts // 4
    if q < 2:
        return False
    i0 = 0
    i1 = npts // 4
    i2 = npts // 2
    i3 = (3 * npts) // 4
    i4 = npts - 1
    vs = np.empty((4, 3))
    idx0 = (i0, i1, i2, i3)
    idx1 = (i1, i2, i3, i4)
    for w in range(4):
        nw = 0.0
        for c in range(3):
            vs[w, c] = chain[idx1[w], c] - chain[idx0[w], c]
            nw += vs[w, c] * vs[w, c]
        nw = np.sqrt(nw)
        if nw <= 0.0:
            return False
        for c in range(3):
            vs[w, c] /= nw
    cmin = 1.0
    for w1 in range(4):
        for w2 in range(w1 + 1, 4):
            dot = vs[w1, 0] * vs[w2, 0] + vs[w1, 1] * vs[w2, 1] + vs[w1, 2] * vs[w2, 2]
            if dot < cmin:
                cmin = dot
    if cmin < np.cos(dir_tol):
        return False
    e0 = chain[i4, 0] - chain[0, 0]
    e1 = chain[i4, 1] - chain[0, 1]
    e2 = chain[i4, 2] - chain[0, 2]
    en = np.sqrt(e0 * e0 + e1 * e1 + e2 * e2)
    if en <= 0.0:
        return False
    e0 /= en
    e1 /= en
    e2 /= en
    half_ext = 0.0
    full_ext = 0.0
    for i in range(npts):
        w0 = chain[i, 0] - chain[0, 0]
        w1 = chain[i, 1] - chain[0, 1]
        w2 = chain[i, 2] - chain[0, 2]
        along = w0 * e0 + w1 * e1 + w2 * e2
        d0 = w0 - along * e0
        d1 = w1 - along * e1
        d2 = w2 - along * e2
        dev = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if dev > full_ext:
            full_ext = dev
        if i <= npts // 2 and dev > half_ext:
            half_ext = dev
    return full_ext <= 0.9 * growth_cap * half_ext + 1e-9
