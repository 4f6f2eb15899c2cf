"""Adaptive Gauss-Legendre quadrature and golden-section search.

The 1-D integrator works on a batch of segments at once: every pending
panel is integrated with an ``order``-point rule both whole and as two
halves, panels whose two estimates agree are accepted, the rest are
bisected.  Breakpoints (jumps, kinks, density changes) are inserted as panel
edges up front so the integrand is smooth on every panel.
"""
from __future__ import annotations

import math
from functools import lru_cache
from itertools import product

import numpy as np

RTOL = 1e-9
ATOL = 1e-14
MAX_LEVELS = 40
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_EPS = np.finfo(np.float64).eps


class QuadratureError(RuntimeError):
    """Adaptive refinement ran out of levels before meeting the tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@lru_cache(maxsize=None)
def gauss_legendre(order):
    return np.polynomial.legendre.leggauss(order)


def _panel_rule(f, a, b, order):
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    pts = (0.5 * (b + a))[:, None] + half[:, None] * x[None, :]
    vals = f(pts.ravel()).reshape(-1, a.size, order)
    est = np.einsum("cpk,k->cp", vals, w) * half
    mag = np.einsum("cpk,k->cp", np.abs(vals), w) * half
    return est, mag


def _split_at(lower, upper, breakpoints):
    owner = np.arange(lower.size)
    if breakpoints is None or len(breakpoints) == 0:
        return lower.copy(), upper.copy(), owner
    bps = np.unique(np.asarray(breakpoints, dtype=np.float64))
    new_a, new_b, new_o = [], [], []
    for a, b, o in zip(lower, upper, owner):
        inner = bps[(bps > a) & (bps < b)]
        pts = np.concatenate(([a], inner, [b]))
        new_a.extend(pts[:-1])
        new_b.extend(pts[1:])
        new_o.extend([o] * (pts.size - 1))
    return np.array(new_a), np.array(new_b), np.array(new_o, dtype=np.int64)


def integrate_segments(func, lower, upper, *, breakpoints=None, ncomp=1, order=10,
                       rtol=RTOL, atol=ATOL, return_error=False):
    """Integrate ``func`` over each segment ``[lower[i], upper[i]]``.

    ``func`` maps a 1-D array of points to values of shape ``(ncomp, n)``
    (or ``(n,)`` when ``ncomp == 1``).  Returns shape ``(ncomp, nseg)``,
    or ``(nseg,)`` for a single component.  Each segment's absolute error
    target is ``max(atol, rtol * ∫|f|)``, shared among its panels by width.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=np.float64))
    upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
    nseg = lower.size
    total = np.zeros((ncomp, nseg))
    err_total = np.zeros(nseg)
    a, b, owner = _split_at(lower, upper, breakpoints)
    keep = b > a
    a, b, owner = a[keep], b[keep], owner[keep]
    seg_width = np.where(upper > lower, upper - lower, 1.0)

    def f(pts):
        return np.asarray(func(pts), dtype=np.float64).reshape(ncomp, -1)

    scale = None
    level = 0
    while a.size:
        whole, _ = _panel_rule(f, a, b, order)
        m = 0.5 * (a + b)
        halves, hmag = _panel_rule(f, np.concatenate((a, m)), np.concatenate((m, b)), order)
        k = a.size
        fine = halves[:, :k] + halves[:, k:]
        mag = np.max(hmag[:, :k] + hmag[:, k:], axis=0)
        err = np.max(np.abs(fine - whole), axis=0)
        if scale is None:
            scale = np.zeros(nseg)
            np.add.at(scale, owner, mag)
        frac = (b - a) / seg_width[owner]
        tol = np.maximum(atol, rtol * scale[owner]) * frac
        done = (err <= tol) | (err <= 50 * _EPS * mag)
        if level >= MAX_LEVELS and not done.all():
            np.add.at(total.T, owner, fine.T)
            raise QuadratureError("adaptive quadrature did not converge",
                                  estimate=total, error=float(err.max()))
        np.add.at(total.T, owner[done], fine[:, done].T)
        np.add.at(err_total, owner[done], err[done])
        nd = ~done
        a, m, b, o = a[nd], m[nd], b[nd], owner[nd]
        a, b, owner = np.concatenate((a, m)), np.concatenate((m, b)), np.concatenate((o, o))
        level += 1
    out = total[0] if ncomp == 1 else total
    if return_error:
        return out, err_total
    return out


def integrate(func, a, b, *, breakpoints=None, rtol=RTOL, atol=ATOL, order=10):
    """Scalar convenience wrapper around :func:`integrate_segments`."""
    if b <= a:
        return 0.0
    return float(integrate_segments(func, [a], [b], breakpoints=breakpoints,
                                    rtol=rtol, atol=atol, order=order)[0])


def integrate_box(func, lower, upper, *, breakpoints=None, ncomp=1, order=8,
                  rtol=RTOL, atol=ATOL, max_depth=12):
    """Tensor-product Gauss-Legendre over an axis-aligned box, p <= 3.

    ``func`` takes an (n, p) array of points.  The box is first cut at the
    per-axis ``breakpoints``; each sub-box is then bisected along all axes
    until the ``order`` rule and its 2^p-children refinement agree.
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    p = lower.size
    x, w = gauss_legendre(order)
    grid = np.array(list(product(range(order), repeat=p)))
    nodes = x[grid]
    weights = np.prod(w[grid], axis=1)

    def rule(lo, hi):
        half = 0.5 * (hi - lo)
        pts = 0.5 * (hi + lo) + nodes * half
        vals = np.asarray(func(pts), dtype=np.float64).reshape(ncomp, -1)
        vol = np.prod(half)
        return vals @ weights * vol, np.abs(vals) @ weights * vol

    cuts = []
    for k in range(p):
        bk = [] if breakpoints is None else np.asarray(breakpoints[k], dtype=np.float64)
        inner = np.unique([t for t in bk if lower[k] < t < upper[k]])
        cuts.append(np.concatenate(([lower[k]], inner, [upper[k]])))
    boxes = []
    for idx in product(*[range(len(c) - 1) for c in cuts]):
        lo = np.array([cuts[k][i] for k, i in enumerate(idx)])
        hi = np.array([cuts[k][i + 1] for k, i in enumerate(idx)])
        if np.all(hi > lo):
            boxes.append((lo, hi, 0))

    total_vol = float(np.prod(upper - lower)) or 1.0
    total = np.zeros(ncomp)
    scale = sum(rule(lo, hi)[1].max() for lo, hi, _ in boxes) if boxes else 0.0
    corners = np.array(list(product((0, 1), repeat=p)))
    while boxes:
        lo, hi, depth = boxes.pop()
        whole, _ = rule(lo, hi)
        mid = 0.5 * (lo + hi)
        children = []
        fine = np.zeros(ncomp)
        mag = 0.0
        for c in corners:
            clo = np.where(c == 0, lo, mid)
            chi = np.where(c == 0, mid, hi)
            est, m = rule(clo, chi)
            fine += est
            mag += m.max()
            children.append((clo, chi, depth + 1))
        err = np.max(np.abs(fine - whole))
        tol = max(atol, rtol * scale) * np.prod(hi - lo) / total_vol
        if err <= tol or err <= 50 * _EPS * mag:
            total += fine
        elif depth >= max_depth:
            raise QuadratureError("tensor quadrature did not converge",
                                  estimate=total + fine, error=float(err))
        else:
            boxes.extend(children)
    return total[0] if ncomp == 1 else total


def integrate_box_slabs(func, lower, upper, axis, edges, *, breakpoints=None, order=8,
                        rtol=RTOL, atol=ATOL):
    """Integrals of ``func`` over the slabs of a box cut along ``axis`` at ``edges``.

    Slab i spans ``[edges[i], edges[i+1]]`` on ``axis`` and the full box on the
    other axes.  All sub-boxes are integrated in one vectorised pass; the
    few whose rule and 2^p-child refinement disagree are redone adaptively.
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    p = lower.size
    nslab = edges.size - 1
    bps = breakpoints if breakpoints is not None else [np.empty(0)] * p
    sa, sb, owner = _split_at(edges[:-1], edges[1:], bps[axis])
    keep = sb > sa
    sa, sb, owner = sa[keep], sb[keep], owner[keep]
    other = []
    for k in range(p):
        if k == axis:
            continue
        inner = np.unique([t for t in np.asarray(bps[k], dtype=np.float64) if lower[k] < t < upper[k]])
        c = np.concatenate(([lower[k]], inner, [upper[k]]))
        other.append((k, list(zip(c[:-1], c[1:]))))
    combos = list(product(*[pieces for _, pieces in other])) if other else [()]
    nb = sa.size * len(combos)
    lo = np.empty((nb, p))
    hi = np.empty((nb, p))
    box_owner = np.repeat(owner, len(combos))
    lo[:, axis] = np.repeat(sa, len(combos))
    hi[:, axis] = np.repeat(sb, len(combos))
    for slot, (k, _) in enumerate(other):
        lo[:, k] = np.tile([c[slot][0] for c in combos], sa.size)
        hi[:, k] = np.tile([c[slot][1] for c in combos], sa.size)

    x, w = gauss_legendre(order)
    grid = np.array(list(product(range(order), repeat=p)))
    nodes, weights = x[grid], np.prod(w[grid], axis=1)

    def rule(blo, bhi):
        half = 0.5 * (bhi - blo)
        pts = (0.5 * (bhi + blo))[:, None, :] + nodes[None, :, :] * half[:, None, :]
        vals = np.asarray(func(pts.reshape(-1, p)), dtype=np.float64).reshape(blo.shape[0], -1)
        vol = np.prod(half, axis=1)
        return vals @ weights * vol, np.abs(vals) @ weights * vol

    whole, _ = rule(lo, hi)
    mid = 0.5 * (lo + hi)
    fine = np.zeros(nb)
    mag = np.zeros(nb)
    for c in product((0, 1), repeat=p):
        c = np.array(c, dtype=bool)
        est, m = rule(np.where(c, mid, lo), np.where(c, hi, mid))
        fine += est
        mag += m
    out = np.zeros(nslab)
    scale = np.zeros(nslab)
    np.add.at(scale, box_owner, mag)
    vol = np.prod(hi - lo, axis=1)
    slab_vol = np.zeros(nslab)
    np.add.at(slab_vol, box_owner, vol)
    tol = np.maximum(atol, rtol * scale[box_owner]) * vol / np.maximum(slab_vol[box_owner], 1e-300)
    err = np.abs(fine - whole)
    ok = (err <= tol) | (err <= 50 * _EPS * mag)
    np.add.at(out, box_owner[ok], fine[ok])
    for i in np.nonzero(~ok)[0]:
        out[box_owner[i]] += integrate_box(func, lo[i], hi[i], breakpoints=bps, order=order,
                                           rtol=rtol, atol=atol)
    return out


def golden_section_max(func, a, b, *, xtol=1e-6, maxiter=200):
    """Maximise a unimodal ``func`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(maxiter):
        if b - a <= xtol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = func(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    return best_x, best_f
