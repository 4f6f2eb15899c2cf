import itertools
import math

import numpy as np
import pytest

from cartlab.model import Dataset, NoiseSpec, ProductDistribution, generate_dataset, linear_signal


def brute_force_candidates(X, y):
    """Every (j, b, delta) candidate, with Δ̂ computed from plain numpy SSEs."""
    n, p = X.shape
    sse = lambda v: float(np.sum((v - v.mean()) ** 2)) if v.size else 0.0
    total = sse(y)
    out = []
    for j in range(p):
        vals = np.unique(X[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = a + 0.5 * (b - a)
            if thr >= b:
                thr = a
            left = X[:, j] <= thr
            out.append((j, thr, (total - sse(y[left]) - sse(y[~left])) / n))
    return out


def brute_force_split(X, y):
    """Exhaustive search over every feature and midpoint threshold.

    Δ̂ is computed from the three SSEs with plain numpy, independent of the
    prefix-sum sweep.  Returns (j, b, delta) of the first maximiser in
    (j, b) order, or None.
    """
    n, p = X.shape
    best = None
    sse = lambda v: float(np.sum((v - v.mean()) ** 2)) if v.size else 0.0
    total = sse(y)
    for j in range(p):
        vals = np.unique(X[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = a + 0.5 * (b - a)
            if thr >= b:
                thr = a
            left = X[:, j] <= thr
            d = (total - sse(y[left]) - sse(y[~left])) / n
            if best is None or d > best[2] + 1e-12:
                best = (j, thr, d)
    return best


def poly_moments(coef, lo, hi):
    """Exact mass-normalised mean and variance of a polynomial under U[lo, hi]."""
    P = np.polynomial.Polynomial(coef)
    w = hi - lo
    mean = (P.integ()(hi) - P.integ()(lo)) / w
    Q = (P - mean) ** 2
    var = (Q.integ()(hi) - Q.integ()(lo)) / w
    return mean, var


def poly_delta(coef, lo, hi, b):
    """Population Δ on the interval [lo, hi] split at b, f*(t) = polynomial, uniform law."""
    P = np.polynomial.Polynomial(coef)
    I = P.integ()
    mass, ml, mr = hi - lo, b - lo, hi - b
    mean = (I(hi) - I(lo)) / mass
    mu_l = (I(b) - I(lo)) / ml
    mu_r = (I(hi) - I(b)) / mr
    return ml * (mu_l - mean) ** 2 + mr * (mu_r - mean) ** 2


@pytest.fixture
def four_point():
    return Dataset(np.array([[0.1], [0.2], [0.8], [0.9]]), np.array([0.0, 0.0, 1.0, 1.0]))


@pytest.fixture
def linear_data():
    f = linear_signal()
    return generate_dataset(f, ProductDistribution.uniform(1), NoiseSpec("bounded-uniform", 0.25), 50, 3)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
