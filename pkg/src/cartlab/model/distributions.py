"""Product feature laws on [0, 1]^p with piecewise-constant coordinate densities."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError


class CoordinateDensity:
    """Density equal to ``values[i]`` on ``[edges[i], edges[i+1])``."""

    def __init__(self, edges=(0.0, 1.0), values=(1.0,)):
        self.edges = np.asarray(edges, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        if self.edges.size != self.values.size + 1:
            raise ConfigurationError("density needs len(edges) == len(values) + 1")
        if self.edges[0] != 0.0 or self.edges[-1] != 1.0 or np.any(np.diff(self.edges) <= 0):
            raise ConfigurationError("density edges must increase from 0 to 1")
        if np.any(self.values <= 0):
            raise ConfigurationError("density values must be positive")
        total = float(np.dot(np.diff(self.edges), self.values))
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(f"density integrates to {total!r}, not 1")
        self._cdf_knots = np.concatenate(([0.0], np.cumsum(np.diff(self.edges) * self.values)))
        self._cdf_knots[-1] = 1.0

    @classmethod
    def uniform(cls):
        return cls()

    @property
    def is_uniform(self):
        return self.values.size == 1

    @property
    def lower(self):
        return float(self.values.min())

    @property
    def upper(self):
        return float(self.values.max())

    def breakpoints(self):
        return self.edges[1:-1]

    def pdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        i = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, self.values.size - 1)
        return np.where((t >= 0) & (t <= 1), self.values[i], 0.0)

    def cdf(self, t):
        return np.interp(np.asarray(t, dtype=np.float64), self.edges, self._cdf_knots)

    def ppf(self, q):
        return np.interp(np.asarray(q, dtype=np.float64), self._cdf_knots, self.edges)

    def to_dict(self):
        return {"edges": self.edges.tolist(), "values": self.values.tolist()}


class ProductDistribution:
    """mu = product of coordinate densities; theta bounds are products of the
    per-coordinate extremes, which is exact for a product density."""

    def __init__(self, coordinates):
        self.coordinates = list(coordinates)
        if not self.coordinates:
            raise ConfigurationError("distribution needs at least one coordinate")

    @classmethod
    def uniform(cls, p):
        return cls([CoordinateDensity.uniform() for _ in range(p)])

    @property
    def dim(self):
        return len(self.coordinates)

    @property
    def theta_lower(self):
        return float(np.prod([c.lower for c in self.coordinates]))

    @property
    def theta_upper(self):
        return float(np.prod([c.upper for c in self.coordinates]))

    def pdf(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        out = np.ones(U.shape[0])
        for k, c in enumerate(self.coordinates):
            out *= c.pdf(U[:, k])
        return out

    def interval_mass(self, k, lo, hi):
        c = self.coordinates[k]
        return c.cdf(hi) - c.cdf(lo)

    def mass(self, lower, upper):
        return float(np.prod([self.interval_mass(k, lower[k], upper[k]) for k in range(self.dim)]))

    def breakpoints(self):
        return [c.breakpoints() for c in self.coordinates]

    def sample(self, rng, n):
        U = rng.random((n, self.dim))
        for k, c in enumerate(self.coordinates):
            if not c.is_uniform:
                U[:, k] = c.ppf(U[:, k])
        return U

    def to_dict(self):
        return {"coordinates": [c.to_dict() for c in self.coordinates]}


def distribution_from_dict(spec, p=None):
    if spec is None or spec == "uniform":
        return ProductDistribution.uniform(p or 1)
    if spec.get("kind") == "uniform":
        return ProductDistribution.uniform(spec.get("p", p or 1))
    coords = [CoordinateDensity(c.get("edges", (0.0, 1.0)), c.get("values", (1.0,)))
              for c in spec["coordinates"]]
    return ProductDistribution(coords)
