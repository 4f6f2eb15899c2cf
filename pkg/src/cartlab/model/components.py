"""Univariate component functions g: [0, 1] -> R.

Every component evaluates vectorised, exposes its derivative, the points
where it jumps or loses smoothness, and its jump sizes.  These are what the
quadrature and total-variation code need.
"""
from __future__ import annotations

import math

import numpy as np
import sympy

from ..errors import ConfigurationError

_SCAN = np.linspace(0.0, 1.0, 4097)


class UnivariateComponent:
    kind = "abstract"

    def __call__(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def breakpoints(self):
        """Interior points of (0, 1) where the component jumps or kinks."""
        return np.empty(0)

    def jumps(self):
        """List of ``(location, g(t+) - g(t-))`` for interior discontinuities."""
        return []

    def sup_abs(self):
        """sup_{t in [0,1]} |g(t)|, by dense scan plus golden refinement."""
        pts = np.unique(np.concatenate((_SCAN, self.breakpoints())))
        vals = np.abs(self(pts))
        i = int(np.argmax(vals))
        best = float(vals[i])
        lo, hi = pts[max(i - 1, 0)], pts[min(i + 1, pts.size - 1)]
        for _ in range(60):
            c, d = hi - 0.618 * (hi - lo), lo + 0.618 * (hi - lo)
            if abs(float(self(c))) >= abs(float(self(d))):
                hi = d
            else:
                lo = c
        return max(best, abs(float(self(0.5 * (lo + hi)))))

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class Linear(UnivariateComponent):
    kind = "linear"

    def __init__(self, slope=1.0, intercept=0.0):
        self.slope = float(slope)
        self.intercept = float(intercept)

    def __call__(self, t):
        return self.slope * np.asarray(t, dtype=np.float64) + self.intercept

    def derivative(self, t):
        return np.full_like(np.asarray(t, dtype=np.float64), self.slope)

    def sup_abs(self):
        return max(abs(self.intercept), abs(self.intercept + self.slope))

    def to_dict(self):
        return {"kind": self.kind, "slope": self.slope, "intercept": self.intercept}


class PolynomialComponent(UnivariateComponent):
    """Polynomial with coefficients in ascending order: c0 + c1 t + c2 t^2 + ..."""

    kind = "polynomial"

    def __init__(self, coefficients):
        coef = np.trim_zeros(np.asarray(coefficients, dtype=np.float64), "b")
        self.poly = np.polynomial.Polynomial(coef if coef.size else [0.0])
        self.dpoly = self.poly.deriv()

    @property
    def coefficients(self):
        return self.poly.coef.copy()

    @property
    def degree(self):
        return self.poly.degree()

    def __call__(self, t):
        return self.poly(np.asarray(t, dtype=np.float64))

    def derivative(self, t):
        return self.dpoly(np.asarray(t, dtype=np.float64))

    def reparametrize(self, a, b):
        """The polynomial s -> g(a + (b - a) s)."""
        inner = np.polynomial.Polynomial([a, b - a])
        return PolynomialComponent(self.poly(inner).coef)

    def critical_points(self, lo=0.0, hi=1.0):
        if self.degree < 2:
            return np.empty(0)
        roots = self.dpoly.roots()
        real = roots[np.abs(roots.imag) < 1e-12].real
        return np.sort(real[(real > lo) & (real < hi)])

    def sup_abs(self):
        pts = np.concatenate(([0.0, 1.0], self.critical_points()))
        return float(np.max(np.abs(self(pts))))

    def to_dict(self):
        return {"kind": self.kind, "coefficients": self.poly.coef.tolist()}


class ExpressionComponent(UnivariateComponent):
    """Component given by a sympy-parsable expression in ``t``."""

    kind = "expression"
    _t = sympy.Symbol("t", real=True)

    def __init__(self, expression):
        self.expression = str(expression)
        try:
            expr = sympy.sympify(self.expression, locals={"t": self._t})
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise ConfigurationError(f"cannot parse expression {expression!r}") from exc
        extra = expr.free_symbols - {self._t}
        if extra:
            raise ConfigurationError(f"expression {expression!r} has free symbols {extra}")
        self._expr = expr
        self._f = sympy.lambdify(self._t, expr, "numpy")
        self._df = sympy.lambdify(self._t, sympy.diff(expr, self._t), "numpy")
        self._d2f = sympy.lambdify(self._t, sympy.diff(expr, self._t, 2), "numpy")

    @staticmethod
    def _vec(fn, t):
        t = np.asarray(t, dtype=np.float64)
        return np.broadcast_to(np.asarray(fn(t), dtype=np.float64), t.shape).copy()

    def __call__(self, t):
        return self._vec(self._f, t)

    def derivative(self, t):
        return self._vec(self._df, t)

    def second_derivative(self, t):
        return self._vec(self._d2f, t)

    def to_dict(self):
        return {"kind": self.kind, "expression": self.expression}


class StronglyIncreasing(ExpressionComponent):
    """g with c1 <= g' <= c2 on [0, 1], c1 > 0."""

    kind = "strongly-increasing"

    def __init__(self, c1, c2, expression):
        super().__init__(expression)
        self.c1, self.c2 = float(c1), float(c2)
        if not 0 < self.c1 <= self.c2:
            raise ConfigurationError("strongly-increasing requires 0 < c1 <= c2")
        slopes = self.derivative(_SCAN)
        if np.any(slopes < self.c1 - 1e-12) or np.any(slopes > self.c2 + 1e-12):
            raise ConfigurationError(
                f"derivative of {expression!r} leaves [c1, c2] = [{c1}, {c2}] "
                f"(sampled range [{slopes.min():.6g}, {slopes.max():.6g}])")

    def sup_abs(self):
        return float(max(abs(self(0.0)), abs(self(1.0))))

    def to_dict(self):
        return {"kind": self.kind, "c1": self.c1, "c2": self.c2, "expression": self.expression}


class SmoothStronglyConvex(ExpressionComponent):
    """L-smooth, sigma-strongly convex g on [0, 1]."""

    kind = "smooth-strongly-convex"

    def __init__(self, L, sigma, expression, check_pairs=200):
        super().__init__(expression)
        self.L, self.sigma = float(L), float(sigma)
        if not 0 < self.sigma <= self.L:
            raise ConfigurationError("smooth-strongly-convex requires 0 < sigma <= L")
        s = np.linspace(0.0, 1.0, check_pairs)
        tt, ss = np.meshgrid(s, s)
        gap = self(tt) - self(ss) - self.derivative(ss) * (tt - ss)
        sq = 0.5 * (tt - ss) ** 2
        slack = 1e-10 * (1.0 + np.abs(self(tt)))
        if np.any(gap < self.sigma * sq - slack) or np.any(gap > self.L * sq + slack):
            raise ConfigurationError(
                f"{expression!r} violates the L-smooth/sigma-strongly-convex sandwich")

    def to_dict(self):
        return {"kind": self.kind, "L": self.L, "sigma": self.sigma, "expression": self.expression}


class Tabulated(UnivariateComponent):
    """Piecewise-linear interpolation of ``values`` at increasing ``knots``."""

    kind = "tabulated"

    def __init__(self, knots, values):
        self.knots = np.asarray(knots, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        if self.knots.ndim != 1 or self.knots.shape != self.values.shape or self.knots.size < 2:
            raise ConfigurationError("tabulated needs matching 1-D knots and values (>= 2)")
        if np.any(np.diff(self.knots) <= 0):
            raise ConfigurationError("tabulated knots must be strictly increasing")
        if self.knots[0] > 0.0 or self.knots[-1] < 1.0:
            raise ConfigurationError("tabulated knots must cover [0, 1]")
        self._slopes = np.diff(self.values) / np.diff(self.knots)

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=np.float64), self.knots, self.values)

    def derivative(self, t):
        t = np.asarray(t, dtype=np.float64)
        i = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self._slopes.size - 1)
        return self._slopes[i]

    def breakpoints(self):
        k = self.knots
        return k[(k > 0.0) & (k < 1.0)]

    def sup_abs(self):
        inside = (self.knots >= 0) & (self.knots <= 1)
        pts = np.concatenate((self(np.array([0.0, 1.0])), self.values[inside]))
        return float(np.max(np.abs(pts)))

    def to_dict(self):
        return {"kind": self.kind, "knots": self.knots.tolist(), "values": self.values.tolist()}


class Piecewise(UnivariateComponent):
    """Pieces on [t_{j-1}, t_j), the last one closed at 1.

    Each piece is a component evaluated at the global coordinate.  ``alpha``
    bounds the gaps from below (t_j - t_{j-1} >= alpha / r) and ``beta`` is the
    per-piece LRP constant claimed for the pieces.
    """

    kind = "piecewise"

    def __init__(self, breakpoints, pieces, alpha=None, beta=1.0):
        t = np.asarray(breakpoints, dtype=np.float64)
        self.t = t
        self.pieces = list(pieces)
        r = len(self.pieces)
        if t.size != r + 1 or t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise ConfigurationError("piecewise needs 0 = t_0 < ... < t_r = 1 and r pieces")
        gaps = np.diff(t)
        self.alpha = float(r * gaps.min()) if alpha is None else float(alpha)
        if np.any(gaps < self.alpha / r - 1e-12):
            raise ConfigurationError(f"piece gaps {gaps.tolist()} fall below alpha/r = {self.alpha / r}")
        self.beta = float(beta)

    @property
    def r(self):
        return len(self.pieces)

    def _index(self, t):
        return np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.r - 1)

    def _apply(self, method, t):
        t = np.asarray(t, dtype=np.float64)
        idx = self._index(t)
        out = np.empty(t.shape)
        for j, piece in enumerate(self.pieces):
            sel = idx == j
            if np.any(sel):
                out[sel] = getattr(piece, method)(t[sel])
        return out

    def __call__(self, t):
        return self._apply("__call__", t)

    def derivative(self, t):
        return self._apply("derivative", t)

    def breakpoints(self):
        inner = [self.t[1:-1]]
        for j, piece in enumerate(self.pieces):
            b = piece.breakpoints()
            inner.append(b[(b > self.t[j]) & (b < self.t[j + 1])])
        return np.unique(np.concatenate(inner))

    def jumps(self):
        out = []
        for j in range(1, self.r):
            loc = float(self.t[j])
            size = float(self.pieces[j](loc)) - float(self.pieces[j - 1](loc))
            if size != 0.0:
                out.append((loc, size))
        return out

    def sup_abs(self):
        best = 0.0
        for j, piece in enumerate(self.pieces):
            pts = np.linspace(self.t[j], self.t[j + 1], 2049)
            best = max(best, float(np.max(np.abs(piece(pts)))))
        return best

    def to_dict(self):
        return {"kind": self.kind, "breakpoints": self.t.tolist(),
                "pieces": [p.to_dict() for p in self.pieces],
                "alpha": self.alpha, "beta": self.beta}


class Constant(PolynomialComponent):
    def __init__(self, value=0.0):
        super().__init__([value])


def component_from_dict(spec):
    """Build a component from its ``to_dict`` form (also used for config files)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "linear":
            return Linear(spec.get("slope", 1.0), spec.get("intercept", 0.0))
        if kind == "polynomial":
            return PolynomialComponent(spec["coefficients"])
        if kind == "constant":
            return Constant(spec.get("value", 0.0))
        if kind == "expression":
            return ExpressionComponent(spec["expression"])
        if kind == "strongly-increasing":
            return StronglyIncreasing(spec["c1"], spec["c2"], spec["expression"])
        if kind == "smooth-strongly-convex":
            return SmoothStronglyConvex(spec["L"], spec["sigma"], spec["expression"])
        if kind == "tabulated":
            return Tabulated(spec["knots"], spec["values"])
        if kind == "piecewise":
            return Piecewise(spec["breakpoints"], [component_from_dict(p) for p in spec["pieces"]],
                             spec.get("alpha"), spec.get("beta", 1.0))
    except KeyError as exc:
        raise ConfigurationError(f"component of kind {kind!r} is missing field {exc}") from exc
    raise ConfigurationError(f"unknown component kind {kind!r}")


def total_variation(g, a, b, *, scan=4096):
    """V_g([a, b]): integral of |g'| (split at sign changes) plus interior jumps."""
    from ..quadrature import integrate

    if b <= a:
        return 0.0
    cuts = list(derivative_sign_changes(g, a, b, scan=scan))
    cuts += [float(x) for x in g.breakpoints() if a < x < b]
    smooth = integrate(lambda s: np.abs(g.derivative(s)), a, b, breakpoints=cuts)
    jumps = sum(abs(size) for loc, size in g.jumps() if a < loc < b)
    return smooth + jumps


def derivative_sign_changes(g, a, b, *, scan=4096):
    """Roots of g' in (a, b), bracketed on a uniform scan and refined by bisection."""
    ts = np.linspace(a, b, scan + 1)
    d = g.derivative(ts)
    # exact zeros on the scan where the sign flips across them
    roots = [float(ts[i]) for i in range(1, scan) if d[i] == 0.0 and d[i - 1] * d[i + 1] < 0]
    for i in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]:
        lo, hi = ts[i], ts[i + 1]
        dlo = d[i]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            dm = float(g.derivative(mid))
            if dm == 0.0:
                lo = hi = mid
                break
            if math.copysign(1.0, dm) == math.copysign(1.0, dlo):
                lo, dlo = mid, dm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return sorted(roots)
