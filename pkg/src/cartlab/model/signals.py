"""Regression functions f* on [0, 1]^p."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, DomainError
from .components import UnivariateComponent, component_from_dict


class SignalFunction:
    kind = "abstract"
    dim: int
    is_additive = False

    def __call__(self, U):
        """Evaluate at the rows of an (n, p) array."""
        raise NotImplementedError

    @property
    def bound(self):
        """Sup-norm bound M with |f*(u)| <= M on the cube."""
        raise NotImplementedError

    def breakpoints(self):
        """Per-axis interior discontinuity locations, used to cut quadrature boxes."""
        return [np.empty(0) for _ in range(self.dim)]

    def scaled(self, c, shift=0.0):
        """The signal c * f* + shift."""
        return AffineSignal(self, c, shift)

    def to_dict(self):
        raise NotImplementedError


class AdditiveSignal(SignalFunction):
    """f*(u) = sum_k g_k(u_k)."""

    kind = "additive"
    is_additive = True

    def __init__(self, components, bound=None):
        self.components = list(components)
        if not self.components:
            raise ConfigurationError("additive signal needs at least one component")
        for g in self.components:
            if not isinstance(g, UnivariateComponent):
                raise ConfigurationError(f"{g!r} is not a univariate component")
        self.dim = len(self.components)
        self._bound = bound

    def __call__(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        out = np.zeros(U.shape[0])
        for k, g in enumerate(self.components):
            out += g(U[:, k])
        return out

    @property
    def bound(self):
        if self._bound is None:
            self._bound = float(sum(g.sup_abs() for g in self.components))
        return self._bound

    def breakpoints(self):
        return [g.breakpoints() for g in self.components]

    def scaled(self, c, shift=0.0):
        comps = [_ScaledComponent(g, c) for g in self.components]
        if shift:
            comps[0] = _ShiftedComponent(comps[0], shift)
        return AdditiveSignal(comps)

    def to_dict(self):
        return {"kind": self.kind, "components": [g.to_dict() for g in self.components]}


class _ScaledComponent(UnivariateComponent):
    kind = "scaled"

    def __init__(self, base, c):
        self.base, self.c = base, float(c)

    def __call__(self, t):
        return self.c * self.base(t)

    def derivative(self, t):
        return self.c * self.base.derivative(t)

    def breakpoints(self):
        return self.base.breakpoints()

    def jumps(self):
        return [(loc, self.c * s) for loc, s in self.base.jumps()]

    def sup_abs(self):
        return abs(self.c) * self.base.sup_abs()

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, "base": self.base.to_dict()}


class _ShiftedComponent(_ScaledComponent):
    kind = "shifted"

    def __init__(self, base, shift):
        super().__init__(base, 1.0)
        self.shift = float(shift)

    def __call__(self, t):
        return self.base(t) + self.shift

    def sup_abs(self):
        return self.base.sup_abs() + abs(self.shift)

    def to_dict(self):
        return {"kind": self.kind, "shift": self.shift, "base": self.base.to_dict()}


class XorSignal(SignalFunction):
    """1 on [0,1/2)^2 and on [1/2,1)^2 (and at the u = 1 faces), 0 elsewhere."""

    kind = "xor2d"
    dim = 2

    def __call__(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        lo0, lo1 = U[:, 0] < 0.5, U[:, 1] < 0.5
        return (lo0 == lo1).astype(np.float64)

    @property
    def bound(self):
        return 1.0

    def breakpoints(self):
        return [np.array([0.5]), np.array([0.5])]

    def to_dict(self):
        return {"kind": self.kind}


class GridSignal(SignalFunction):
    """Piecewise constant on a regular k^p grid: value ``values[i1, ..., ip]`` on
    the cell with lower corner (i1/k, ..., ip/k)."""

    kind = "custom-grid"

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim < 1 or len(set(self.values.shape)) != 1:
            raise ConfigurationError("custom-grid values must be a k x ... x k array")
        self.dim = self.values.ndim
        self.k = self.values.shape[0]

    def __call__(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        idx = np.clip((U * self.k).astype(np.int64), 0, self.k - 1)
        return self.values[tuple(idx.T)]

    @property
    def bound(self):
        return float(np.max(np.abs(self.values)))

    def breakpoints(self):
        inner = np.arange(1, self.k) / self.k
        return [inner for _ in range(self.dim)]

    def to_dict(self):
        return {"kind": self.kind, "values": self.values.tolist()}


class AffineSignal(SignalFunction):
    def __init__(self, base, c, shift=0.0):
        self.base, self.c, self.shift = base, float(c), float(shift)
        self.dim = base.dim
        self.kind = base.kind

    def __call__(self, U):
        return self.c * self.base(U) + self.shift

    @property
    def bound(self):
        return abs(self.c) * self.base.bound + abs(self.shift)

    def breakpoints(self):
        return self.base.breakpoints()

    def to_dict(self):
        return {"kind": "affine", "c": self.c, "shift": self.shift, "base": self.base.to_dict()}


def signal_from_dict(spec):
    spec = dict(spec)
    kind = spec.get("kind")
    if kind == "additive":
        return AdditiveSignal([component_from_dict(c) for c in spec["components"]], spec.get("bound"))
    if kind == "xor2d":
        return XorSignal()
    if kind == "custom-grid":
        return GridSignal(spec["values"])
    if kind in {"linear", "polynomial", "strongly-increasing", "smooth-strongly-convex",
                "piecewise", "tabulated", "expression", "constant"}:
        # a bare component is a univariate additive signal
        return AdditiveSignal([component_from_dict(spec)])
    raise ConfigurationError(f"unknown signal kind {kind!r}")


def evaluate_signal(f, u):
    """f*(u) for a single point, rejecting points outside [0, 1]^p."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.size != f.dim:
        raise ConfigurationError(f"point has dimension {u.size}, signal has {f.dim}")
    if np.any(~np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise DomainError(f"point {u.tolist()} lies outside the unit cube")
    return float(f(u[None, :])[0])
