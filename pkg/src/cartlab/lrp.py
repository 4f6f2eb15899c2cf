"""Locally reverse Poincaré (LRP) certificates for univariate components.

g is in LRP(Q, τ) when on every subinterval [a, b] of Q

    (∫_a^b |g'|)^2 <= τ^2 / (b - a) * inf_w ∫_a^b (g - w)^2.

The infimum over w is attained at the interval mean, so the per-interval
ratio needs two integrals and no inner optimisation.  Jumps count toward the
total variation.  A finite interval family only gives a lower estimate of
the true supremum τ.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .model.components import (
    Linear,
    Piecewise,
    PolynomialComponent,
    SmoothStronglyConvex,
    StronglyIncreasing,
    total_variation,
)
from .model.data import make_rng
from .population import weighted_variation
from .quadrature import integrate

VARIANCE_TOL = 1e-14
VARIATION_TOL = 1e-7
CONVEX_CONSTANT = 110.0


def interval_sse(g, a, b):
    """inf_w ∫_a^b (g - w)^2, attained at w = mean of g on [a, b]."""
    bps = [x for x in g.breakpoints() if a < x < b]
    mean = integrate(g, a, b, breakpoints=bps) / (b - a)
    return integrate(lambda t: (g(t) - mean) ** 2, a, b, breakpoints=bps)


def _ratio_parts(g, a, b):
    if not b > a:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    return total_variation(g, a, b), interval_sse(g, a, b)


def interval_lrp_ratio(g, a, b, *, return_flag=False):
    """√(T^2 (b - a) / V) with T the total variation and V the best constant fit SSE.

    Returns 0 when g is constant on [a, b].  When V vanishes but T does not
    the ratio is unbounded: ``inf`` is returned (with ``return_flag`` the
    pair ``(ratio, unbounded)``).
    """
    T, V = _ratio_parts(g, a, b)
    unbounded = False
    if V <= VARIANCE_TOL:
        if T > VARIATION_TOL:
            ratio, unbounded = math.inf, True
        else:
            ratio = 0.0
    else:
        ratio = math.sqrt(T * T * (b - a) / V)
    return (ratio, unbounded) if return_flag else ratio


def closed_form_tau(g):
    """The class constant for g, or None when the class has no explicit one."""
    if isinstance(g, StronglyIncreasing):
        return 2.0 * math.sqrt(3.0) * g.c2 / g.c1
    if isinstance(g, Linear) and g.slope != 0.0:
        return 2.0 * math.sqrt(3.0)
    if isinstance(g, SmoothStronglyConvex):
        return CONVEX_CONSTANT * g.L / g.sigma
    return None


@dataclass(frozen=True)
class IntervalFamily:
    """``grid`` (all (i/k, j/k) pairs) or ``random`` (count intervals from seed)."""

    kind: str = "grid"
    k: int = 50
    count: int = 200
    seed: int = 0
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if self.kind not in {"grid", "random"}:
            raise ValueError(f"unknown interval family {self.kind!r}")
        if self.kind == "grid" and self.k < 1:
            raise ValueError("grid needs k >= 1")
        if self.kind == "random" and self.count < 1:
            raise ValueError("random needs count >= 1")
        if not self.upper > self.lower:
            raise ValueError("family domain must have lower < upper")

    def describe(self):
        dom = f"[{self.lower:g}, {self.upper:g}]"
        if self.kind == "grid":
            return f"grid(k={self.k}) on {dom}"
        return f"random(count={self.count}, seed={self.seed}) on {dom}"

    def intervals(self):
        lo, w = self.lower, self.upper - self.lower
        if self.kind == "grid":
            pts = lo + w * np.arange(self.k + 1) / self.k
            return [(float(pts[i]), float(pts[j]))
                    for i in range(self.k) for j in range(i + 1, self.k + 1)]
        rng = make_rng(self.seed)
        out = []
        while len(out) < self.count:
            a, b = np.sort(rng.random(2))
            if b - a > 1e-6:
                out.append((float(lo + w * a), float(lo + w * b)))
        return out

    def to_dict(self):
        return {"kind": self.kind, "k": self.k, "count": self.count, "seed": self.seed,
                "lower": self.lower, "upper": self.upper}

    @classmethod
    def from_dict(cls, spec):
        return cls(**{k: v for k, v in spec.items() if k in cls.__dataclass_fields__})


@dataclass
class LrpCertificate:
    component: dict
    tau_measured: float
    tau_closed_form: float | None
    family: str
    worst_interval: tuple
    unbounded_intervals: list = field(default_factory=list)
    scale_invariance_gap: float | None = None
    note: str = ("tau_measured is a maximum over a finite interval family, so it is a lower "
                 "estimate of the true LRP constant")

    @property
    def failed(self):
        return bool(self.unbounded_intervals)

    @property
    def valid(self):
        """No unbounded interval and, if the class has a constant, the measurement respects it."""
        if self.failed:
            return False
        if self.tau_closed_form is not None:
            return self.tau_measured <= self.tau_closed_form + 1e-6
        return True

    def to_dict(self):
        return {
            "component": self.component,
            "tau_measured": None if math.isinf(self.tau_measured) else self.tau_measured,
            "tau_closed_form": self.tau_closed_form,
            "worst_interval": list(self.worst_interval),
            "family": self.family,
            "unbounded_intervals": [list(iv) for iv in self.unbounded_intervals],
            "scale_invariance_gap": self.scale_invariance_gap,
            "pass": self.valid,
            "note": self.note,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def _sweep(g, intervals):
    best, worst, unbounded = -1.0, None, []
    for a, b in intervals:
        r, flag = interval_lrp_ratio(g, a, b, return_flag=True)
        if flag:
            unbounded.append((a, b))
            continue
        if r > best:
            best, worst = r, (a, b)
    return max(best, 0.0), worst, unbounded


def certify_lrp(g, family=None):
    """Maximum interval ratio over a family, with the class constant when known.

    For polynomials the certificate also records the gap between the sweep on
    the family domain and the same sweep on the affinely rescaled polynomial
    over [0, 1]; the ratio is invariant under that map.
    """
    family = family or IntervalFamily()
    intervals = family.intervals()
    tau, worst, unbounded = _sweep(g, intervals)
    if worst is None:
        worst = intervals[0]
    gap = None
    if isinstance(g, PolynomialComponent):
        q = g.reparametrize(family.lower, family.upper)
        unit = IntervalFamily(family.kind, family.k, family.count, family.seed, 0.0, 1.0)
        tau_unit, _, _ = _sweep(q, unit.intervals())
        gap = abs(tau - tau_unit)
    return LrpCertificate(g.to_dict(), math.inf if unbounded else tau,
                          closed_form_tau(g), family.describe(), worst, unbounded, gap)


def weighted_lrp_sides(g, a, b, density=None):
    """(LHS, V/(b-a)) with LHS = (∫ √(q(1-q)) dV_g)^2 and V = inf_w ∫ (g - w)^2.

    q is the conditional CDF of ``density`` on [a, b] (uniform by default).
    """
    if not b > a:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    w = weighted_variation(g, a, b, density)
    return w * w, interval_sse(g, a, b) / (b - a)


def weighted_lrp_check(g, a, b, density=None, tau2=None):
    """τ^2 V/(b-a) - (∫ √(q(1-q)) dV_g)^2; nonnegative when the weighted condition holds.

    Without ``tau2`` the piecewise constant τ^2 (unit density ratio) is used for
    :class:`Piecewise` components and the squared interval ratio otherwise.
    """
    lhs, base = weighted_lrp_sides(g, a, b, density)
    if tau2 is None:
        if isinstance(g, Piecewise):
            tau2 = piecewise_tau2(g.r, g.alpha, g.beta, 1.0, 1.0)
        else:
            tau2 = interval_lrp_ratio(g, a, b) ** 2
    return tau2 * base - lhs


def sid_from_additive_lrp(taus, p, theta_lower=1.0, theta_upper=1.0):
    """λ = 4 θ_lo / (p max τ^2 θ_hi), clamped to (0, 1]."""
    taus = np.atleast_1d(np.asarray(taus, dtype=np.float64))
    if taus.size == 0 or np.any(taus <= 0) or not np.all(np.isfinite(taus)):
        raise ValueError("every tau must be positive and finite")
    if p < 1 or not 0 < theta_lower <= theta_upper:
        raise ValueError("need p >= 1 and 0 < theta_lower <= theta_upper")
    lam = 4.0 * theta_lower / (p * float(np.max(taus)) ** 2 * theta_upper)
    return min(lam, 1.0)


def piecewise_tau2(r, alpha, beta, theta_lower=1.0, theta_upper=1.0):
    """τ^2 = max{2 r θ_hi/θ_lo, r^2/(2α)} max{9β^2, 32 + β^2}."""
    if r < 1 or alpha <= 0 or beta < 1:
        raise ValueError("need r >= 1, alpha > 0 and beta >= 1")
    if not 0 < theta_lower <= theta_upper:
        raise ValueError("need 0 < theta_lower <= theta_upper")
    return (max(2.0 * r * theta_upper / theta_lower, r * r / (2.0 * alpha))
            * max(9.0 * beta * beta, 32.0 + beta * beta))


def sid_from_piecewise_lrp(r, alpha, beta, p, theta_lower=1.0, theta_upper=1.0):
    """λ = θ_lo / (p θ_hi τ^2) for additive piecewise-LRP components."""
    if p < 1:
        raise ValueError("need p >= 1")
    tau2 = piecewise_tau2(r, alpha, beta, theta_lower, theta_upper)
    return theta_lower / (p * theta_upper * tau2)


def jump_lemma_sides(h, a, c, b):
    """(inf_w ∫_a^b (h - w)^2, min(c-a, b-c) Δh(c)^2 / 16) after checking the hypothesis.

    The hypothesis is |Δh(c)| > 4 max(∫_a^c |h'|, ∫_c^b |h'|) with h smooth
    on each side of c.
    """
    if not a < c < b:
        raise ValueError("need a < c < b")
    jump = sum(size for loc, size in h.jumps() if loc == c)
    inner = [x for x in h.breakpoints() if a < x < b and x != c]
    inner += [loc for loc, _ in h.jumps() if a < loc < b and loc != c]
    if inner:
        raise ConfigurationError(f"h must be smooth on (a, c) and (c, b); extra breaks at {inner}")
    tv_left = total_variation(h, a, c)
    tv_right = total_variation(h, c, b)
    if not abs(jump) > 4.0 * max(tv_left, tv_right):
        raise ConfigurationError(
            f"jump {jump:.6g} at c={c} does not exceed 4 max(TV_left, TV_right) = "
            f"{4.0 * max(tv_left, tv_right):.6g}")
    return interval_sse(h, a, b), min(c - a, b - c) * jump * jump / 16.0


def jump_lemma_check(h, a, c, b):
    """inf_w ∫ (h - w)^2 - min(c-a, b-c) Δh(c)^2 / 16 (nonnegative when the jump dominates both sides)."""
    lhs, rhs = jump_lemma_sides(h, a, c, b)
    return lhs - rhs
