"""Rate exponent, depth schedule and the two-term error bound for CART."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


def _log2_gap(lam):
    # -log2(1 - λ) > 0 for λ in (0, 1)
    return -math.log2(1.0 - lam)


def phi(lam):
    """φ(λ) = -log2(1-λ) / (1 - log2(1-λ)); φ(1) = 1 by the limit."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    if lam >= 1.0 - 1e-12:
        return 1.0
    g = _log2_gap(lam)
    return g / (1.0 + g)


def depth_schedule(lam, n):
    """d = ceil(log2(n) / (1 - log2(1-λ))); λ = 1 gives d = 0 (one split already suffices per level)."""
    if n < 2:
        raise ValueError("the depth schedule needs n >= 2")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    if lam >= 1.0 - 1e-12:
        return 0
    # guard against ceil(4.000000000001) when the ratio is an exact integer
    x = math.log2(n) / (1.0 + _log2_gap(lam))
    return int(math.ceil(x - 1e-12))


@dataclass(frozen=True)
class BoundTerms:
    approximation: float
    estimation: float

    @property
    def total(self):
        return self.approximation + self.estimation


def theorem1_rhs(lam, d, alpha, n, p, delta, U, var_f, C=1.0):
    """2 Var(f*) (1 - λ/(1+α)^2)^d + C 2^d (d log(np) + log(1/δ)) U^2 / (α n).

    The universal constant C is the caller's; only the shape is meaningful.
    """
    if not 0.0 < lam <= 1.0 or d < 0 or alpha <= 0 or n < 1 or p < 1 or not 0 < delta < 1:
        raise ValueError("invalid bound arguments")
    approx = 2.0 * var_f * (1.0 - lam / (1.0 + alpha) ** 2) ** d
    est = C * 2.0 ** d * (d * math.log(n * p) + math.log(1.0 / delta)) * U * U / (alpha * n)
    return BoundTerms(approx, est)


@dataclass
class RatePlan:
    lam: float
    ns: list = field(default_factory=list)

    def __post_init__(self):
        self.phi = phi(self.lam)
        self.depths = {int(n): depth_schedule(self.lam, n) for n in self.ns}

    def depth(self, n):
        return self.depths.get(int(n)) or depth_schedule(self.lam, n)

    def alpha(self, n):
        d = self.depth(n)
        return 1.0 / d if d > 0 else 1.0
