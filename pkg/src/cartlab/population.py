"""Population quantities: conditional moments of f*(X) on cells and the
population impurity decrease Δ(A, j, b).

Additive signals under a product law are handled coordinate by coordinate
with 1-D adaptive Gauss-Legendre; other signals (p <= 3) use tensor-product
quadrature over the cell cut at the signal's and density's breakpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cart import Rectangle, SplitStatistics
from .errors import ConfigurationError, DegenerateCellError, SplitInfeasibleError
from .model.components import derivative_sign_changes
from .quadrature import ATOL, RTOL, golden_section_max, integrate, integrate_box, integrate_box_slabs, integrate_segments

MAX_GENERAL_DIM = 3


@dataclass(frozen=True)
class CellMoments:
    mass: float
    mean: float
    variance: float
    error: float = 0.0
    # additive signals only: per-coordinate interval mass, mean and variance
    coord_mass: tuple = ()
    coord_mean: tuple = ()
    coord_var: tuple = ()


def _coord_breaks(f, dist, k):
    return np.union1d(f.breakpoints()[k], dist.coordinates[k].breakpoints())


def _coord_moments(g, density, lo, hi, breaks):
    """(mass, mean, variance, error) of g(X_k) given X_k in [lo, hi]."""
    m = float(density.cdf(hi) - density.cdf(lo))
    if m <= 0.0:
        return m, 0.0, 0.0, 0.0
    if hi <= lo:
        v = float(g(lo))
        return m, v, 0.0, 0.0
    s1, e1 = integrate_segments(lambda t: g(t) * density.pdf(t), [lo], [hi],
                                breakpoints=breaks, return_error=True)
    mu = float(s1[0]) / m
    s2, e2 = integrate_segments(lambda t: (g(t) - mu) ** 2 * density.pdf(t), [lo], [hi],
                                breakpoints=breaks, return_error=True)
    return m, mu, max(float(s2[0]) / m, 0.0), float(e1[0] + e2[0]) / m


def _box_breaks(f, dist):
    return [_coord_breaks(f, dist, k) for k in range(f.dim)]


def cell_moments(f, dist, cell, *, allow_empty=False):
    """P(X in A), E(f*(X) | X in A) and Var(f*(X) | X in A)."""
    if f.dim != dist.dim or cell.dim != f.dim:
        raise ConfigurationError("signal, distribution and cell dimensions differ")
    mass = dist.mass(cell.lower, cell.upper)
    if mass <= 0.0:
        if allow_empty:
            return CellMoments(0.0, 0.0, 0.0)
        raise DegenerateCellError(f"cell {cell.lower}-{cell.upper} has zero mass")
    if f.is_additive:
        parts = [_coord_moments(g, dist.coordinates[k], cell.lower[k], cell.upper[k],
                                _coord_breaks(f, dist, k))
                 for k, g in enumerate(f.components)]
        cm, cmu, cv, ce = zip(*parts)
        return CellMoments(mass, math.fsum(cmu), math.fsum(cv), math.fsum(ce), cm, cmu, cv)
    if f.dim > MAX_GENERAL_DIM:
        raise ConfigurationError(f"non-additive signals are supported for p <= {MAX_GENERAL_DIM}")
    if np.any(cell.widths <= 0):
        # zero-width side with positive mass cannot happen for a density
        raise DegenerateCellError("cell has an empty side")
    breaks = _box_breaks(f, dist)
    s1 = integrate_box(lambda U: f(U) * dist.pdf(U), cell.lower, cell.upper, breakpoints=breaks)
    mu = s1 / mass
    s2 = integrate_box(lambda U: (f(U) - mu) ** 2 * dist.pdf(U), cell.lower, cell.upper,
                       breakpoints=breaks)
    return CellMoments(mass, mu, max(s2 / mass, 0.0), (RTOL * abs(s1) + RTOL * abs(s2) + ATOL) / mass)


def _children(dist, cell, j, b):
    left, right = cell.split(j, b)
    ml = dist.mass(left.lower, left.upper)
    mr = dist.mass(right.lower, right.upper)
    if ml <= 0.0 or mr <= 0.0:
        raise SplitInfeasibleError(f"split (j={j}, b={b}) leaves a child with zero mass")
    return left, right


def population_impurity_decrease(f, dist, cell, j, b):
    """Δ(A, j, b) = P(A)Var(f|A) - P(A_L)Var(f|A_L) - P(A_R)Var(f|A_R).

    Evaluated literally from the three centred conditional variances.
    """
    left, right = _children(dist, cell, j, b)
    a = cell_moments(f, dist, cell)
    lm = cell_moments(f, dist, left)
    rm = cell_moments(f, dist, right)
    delta = a.mass * a.variance - lm.mass * lm.variance - rm.mass * rm.variance
    if -1e-13 < delta < 0.0:
        delta = 0.0
    return SplitStatistics(int(j), float(b), delta, lm.mass, rm.mass, lm.mean, rm.mean, "population")


def population_split_parts(f, dist, cell, j, b):
    """(Δ_L, Δ_R) = (P(A_L)(E(f|A) - E(f|A_L))^2, P(A_R)(E(f|A) - E(f|A_R))^2)."""
    left, right = _children(dist, cell, j, b)
    a = cell_moments(f, dist, cell)
    lm = cell_moments(f, dist, left)
    rm = cell_moments(f, dist, right)
    return lm.mass * (a.mean - lm.mean) ** 2, rm.mass * (a.mean - rm.mean) ** 2


def verify_delta_closed_form(f, dist, cell, j, b):
    """|Δ - (E(f 1_{A_R}) - E(f|A) P(A_R))^2 P(A) / (P(A_L) P(A_R))|."""
    left, right = _children(dist, cell, j, b)
    lhs = population_impurity_decrease(f, dist, cell, j, b).delta
    a = cell_moments(f, dist, cell)
    pl = dist.mass(left.lower, left.upper)
    rm = cell_moments(f, dist, right)
    num = rm.mass * rm.mean - a.mean * rm.mass
    rhs = num * num * a.mass / (pl * rm.mass)
    return abs(lhs - rhs)


class _SplitCurve:
    """Δ(A, j, b) as a function of b via D(b) = E((f - ν) 1{X in A, X_j <= b}).

    Δ = P(A) D^2 / (P(A_L) P(A_R)) after normalising masses by the cell; for an
    additive signal only coordinate j enters, the other coordinates factor out.
    """

    def __init__(self, f, dist, cell, j, moments):
        self.f, self.dist, self.cell, self.j = f, dist, cell, j
        self.lo, self.hi = cell.lower[j], cell.upper[j]
        self.density = dist.coordinates[j]
        self.additive = f.is_additive
        if self.additive:
            self.g = f.components[j]
            self.m_j = moments.coord_mass[j]
            self.nu = moments.coord_mean[j]
            self.scale = moments.mass
            self.breaks = _coord_breaks(f, dist, j)
        else:
            self.m_j = float(self.density.cdf(self.hi) - self.density.cdf(self.lo))
            self.nu = moments.mean
            self.scale = moments.mass
            self.other = moments.mass / self.m_j if self.m_j > 0 else 0.0
            self.breaks = _box_breaks(f, dist)

    def _left_mass(self, b):
        return (self.density.cdf(b) - self.density.cdf(self.lo))

    def _finish(self, b, d):
        ml = np.asarray(self._left_mass(b), dtype=np.float64)
        mr = self.m_j - ml
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.additive:
                out = self.scale * d * d / (ml * mr)
            else:
                # masses of A_L, A_R relative to the cell: slab masses times other-axis mass
                out = self.scale * d * d / (ml * self.other * mr * self.other)
        return np.where((ml > 0) & (mr > 0), out, 0.0)

    def _slab_integrals(self, edges):
        if self.additive:
            g, dens, nu = self.g, self.density, self.nu
            return integrate_segments(lambda t: (g(t) - nu) * dens.pdf(t), edges[:-1], edges[1:],
                                      breakpoints=self.breaks)
        f, dist, nu = self.f, self.dist, self.nu
        return integrate_box_slabs(lambda U: (f(U) - nu) * dist.pdf(U), self.cell.lower,
                                   self.cell.upper, self.j, edges, breakpoints=self.breaks)

    def on_grid(self, thresholds):
        edges = np.concatenate(([self.lo], thresholds, [self.hi]))
        d = np.cumsum(self._slab_integrals(edges))[:-1]
        return self._finish(thresholds, d)

    def at(self, b):
        if not self.lo < b < self.hi:
            return 0.0
        d = self._slab_integrals(np.array([self.lo, b]))[0]
        return float(self._finish(np.array([b]), np.array([d]))[0])


def best_population_split(f, dist, cell, grid_size=512, refine=True, *, xtol=1e-6):
    """sup over (j, b) of Δ(A, j, b) on a threshold grid, optionally refined.

    For each feature Δ is evaluated at ``grid_size`` equispaced interior
    thresholds; with ``refine`` the bracket around the best grid point is
    searched by golden section to width ``xtol``.  Returns None when no
    feature admits a split with two positive-mass children.
    """
    a = cell_moments(f, dist, cell)
    best = None
    for j in range(f.dim):
        lo, hi = cell.lower[j], cell.upper[j]
        if hi <= lo:
            continue
        curve = _SplitCurve(f, dist, cell, j, a)
        thresholds = lo + (hi - lo) * np.arange(1, grid_size + 1) / (grid_size + 1)
        vals = curve.on_grid(thresholds)
        i = int(np.argmax(vals))
        b_star, d_star = float(thresholds[i]), float(vals[i])
        if refine:
            left = lo if i == 0 else thresholds[i - 1]
            right = hi if i == grid_size - 1 else thresholds[i + 1]
            b_ref, d_ref = golden_section_max(curve.at, left, right, xtol=xtol)
            if d_ref > d_star:
                b_star, d_star = b_ref, d_ref
        if best is None or d_star > best[1]:
            best = (j, d_star, b_star)
    if best is None:
        return None
    j, delta, b = best
    try:
        left, right = _children(dist, cell, j, b)
    except SplitInfeasibleError:
        return None
    ml = dist.mass(left.lower, left.upper)
    mr = dist.mass(right.lower, right.upper)
    lm = cell_moments(f, dist, left).mean
    rm = cell_moments(f, dist, right).mean
    return SplitStatistics(j, b, max(delta, 0.0), ml, mr, lm, rm, "population")


def weighted_variation(g, a, b, density=None):
    """∫_a^b sqrt(q(1-q)) dV_g with q(t) = P(X <= t | X in [a, b]).

    dV_g is |g'| dt plus point masses |Δg| at interior jumps.  The smooth part
    is integrated in the angle variable q = (1 - cos θ)/2, which removes the
    square-root endpoint singularities.
    """
    from .model.distributions import CoordinateDensity

    density = density or CoordinateDensity.uniform()
    if b <= a:
        return 0.0
    Fa, Fb = float(density.cdf(a)), float(density.cdf(b))
    m = Fb - Fa
    if m <= 0:
        return 0.0

    def q_of(t):
        return (density.cdf(t) - Fa) / m

    def integrand(theta):
        q = 0.5 * (1.0 - np.cos(theta))
        t = np.clip(density.ppf(Fa + m * q), a, b)
        # dt = m dq / pdf(t), dq = sin(θ)/2 dθ, sqrt(q(1-q)) = sin(θ)/2
        s = 0.5 * np.sin(theta)
        return s * s * m / density.pdf(t) * np.abs(g.derivative(t))

    cuts_t = list(derivative_sign_changes(g, a, b))
    cuts_t += [x for x in np.union1d(g.breakpoints(), density.breakpoints()) if a < x < b]
    cuts = [float(np.arccos(1.0 - 2.0 * q_of(x))) for x in cuts_t]
    smooth = integrate(integrand, 0.0, math.pi, breakpoints=cuts)
    jumps = 0.0
    for loc, size in g.jumps():
        if a < loc < b:
            q = q_of(loc)
            jumps += math.sqrt(max(q * (1.0 - q), 0.0)) * abs(size)
    return smooth + jumps


def verify_split_lower_bound(f, dist, cell, grid_size=512):
    """max √Δ minus the weighted-total-variation lower bound (should be >= 0).

    Lower bound: √P(A) Var(f|A) / Σ_k ∫ sqrt(q_k(1-q_k)) dV_{f_k}, with q_k the
    coordinate-k conditional CDF on the cell.
    """
    if not f.is_additive:
        raise ConfigurationError("the split lower bound needs an additive signal")
    lhs, rhs = split_lower_bound_sides(f, dist, cell, grid_size)
    return lhs - rhs


def split_lower_bound_sides(f, dist, cell, grid_size=512):
    mom = cell_moments(f, dist, cell)
    best = best_population_split(f, dist, cell, grid_size)
    lhs = math.sqrt(best.delta) if best is not None else 0.0
    denom = math.fsum(weighted_variation(g, cell.lower[k], cell.upper[k], dist.coordinates[k])
                      for k, g in enumerate(f.components))
    if denom <= 0.0:
        return lhs, 0.0
    return lhs, math.sqrt(mom.mass) * mom.variance / denom
