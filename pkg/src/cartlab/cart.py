"""Greedy CART regression trees grown level by level.

Feature indices are 0-based in the Python API and 1-based in serialised
output (matching the ``x1..xp`` CSV header).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, EmptyCellError, SplitInfeasibleError
from .kernels import best_split_sorted, partition_sorted, route_points, sort_columns


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned cell prod_j <l_j, u_j> inside [0, 1]^p.

    ``lower_closed[j]`` / ``upper_closed[j]`` say whether the bound belongs to
    the cell.  Children of a split follow the <= / > convention: the left
    child is closed at b, the right child open at b.
    """

    lower: tuple
    upper: tuple
    lower_closed: tuple = None
    upper_closed: tuple = None

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ConfigurationError("rectangle bounds must have equal, positive length")
        for a, b in zip(lo, hi):
            if not (0.0 <= a <= b <= 1.0):
                raise DomainError(f"rectangle side [{a}, {b}] is not inside [0, 1]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        p = len(lo)
        lc = (True,) * p if self.lower_closed is None else tuple(bool(v) for v in self.lower_closed)
        uc = (True,) * p if self.upper_closed is None else tuple(bool(v) for v in self.upper_closed)
        object.__setattr__(self, "lower_closed", lc)
        object.__setattr__(self, "upper_closed", uc)

    @classmethod
    def unit(cls, p):
        return cls((0.0,) * p, (1.0,) * p)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def widths(self):
        return np.subtract(self.upper, self.lower)

    def split(self, j, b):
        """(A_L, A_R) = (A with v_j <= b, A with v_j > b)."""
        b = float(b)
        lo_b = min(max(b, self.lower[j]), self.upper[j])
        left = Rectangle(self.lower, _put(self.upper, j, lo_b), self.lower_closed,
                         _put(self.upper_closed, j, True))
        right = Rectangle(_put(self.lower, j, lo_b), self.upper, _put(self.lower_closed, j, False),
                          self.upper_closed)
        return left, right

    def contains_points(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        lo, hi = np.array(self.lower), np.array(self.upper)
        above = np.where(self.lower_closed, U >= lo, U > lo)
        below = np.where(self.upper_closed, U <= hi, U < hi)
        return np.all(above & below, axis=1)

    def contains(self, u):
        return bool(self.contains_points(np.asarray(u, dtype=np.float64)[None, :])[0])

    def to_dict(self):
        return {"lower": list(self.lower), "upper": list(self.upper),
                "lower_closed": list(self.lower_closed), "upper_closed": list(self.upper_closed)}


def _put(t, j, v):
    out = list(t)
    out[j] = v
    return tuple(out)


@dataclass(frozen=True)
class SplitStatistics:
    feature: int
    threshold: float
    delta: float
    left_size: float
    right_size: float
    left_mean: float
    right_mean: float
    kind: str = "empirical"  # sizes are counts; "population": sizes are masses

    def __post_init__(self):
        object.__setattr__(self, "feature", int(self.feature))
        for name in ("threshold", "delta", "left_size", "right_size", "left_mean", "right_mean"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def to_dict(self):
        return {"feature": self.feature + 1, "threshold": self.threshold, "delta": self.delta,
                "left_size": self.left_size, "right_size": self.right_size,
                "left_mean": self.left_mean, "right_mean": self.right_mean, "kind": self.kind}


def _mean(v):
    # correctly rounded sum; tolist() is much faster to iterate than an ndarray
    return math.fsum(v.tolist()) / len(v)


def _sse(v):
    mu = _mean(v)
    return math.fsum((v - mu) ** 2)


def _cell_indices(data, cell):
    if cell is None:
        return np.arange(data.n)
    if cell.dim != data.p:
        raise ConfigurationError(f"cell dimension {cell.dim} != data dimension {data.p}")
    return np.nonzero(cell.contains_points(data.features))[0]


def _clamp(delta, scale):
    if delta < 0.0 and delta > -1e-12 * max(1.0, scale):
        return 0.0
    return delta


def empirical_impurity_decrease(data, cell, j, b):
    """Δ̂(A, j, b): within-cell SSE minus the two child SSEs, over n.

    Computed literally from the three sums of squares with compensated,
    two-pass means.
    """
    idx = _cell_indices(data, cell)
    if idx.size == 0:
        raise EmptyCellError("cell contains no samples")
    y = data.responses[idx]
    go_left = data.features[idx, j] <= b
    yl, yr = y[go_left], y[~go_left]
    if yl.size == 0 or yr.size == 0:
        raise SplitInfeasibleError(f"split (j={j}, b={b}) leaves a child empty")
    sse_a = _sse(y)
    delta = (sse_a - _sse(yl) - _sse(yr)) / data.n
    return SplitStatistics(int(j), float(b), _clamp(delta, sse_a / data.n),
                           int(yl.size), int(yr.size), _mean(yl), _mean(yr))


def empirical_split_parts(data, cell, j, b):
    """(Δ̂_L, Δ̂_R) = (|I_L|/n (ȳ_L - ȳ)^2, |I_R|/n (ȳ_R - ȳ)^2)."""
    idx = _cell_indices(data, cell)
    if idx.size == 0:
        raise EmptyCellError("cell contains no samples")
    y = data.responses[idx]
    go_left = data.features[idx, j] <= b
    yl, yr = y[go_left], y[~go_left]
    if yl.size == 0 or yr.size == 0:
        raise SplitInfeasibleError(f"split (j={j}, b={b}) leaves a child empty")
    mu = _mean(y)
    return (yl.size * (_mean(yl) - mu) ** 2 / data.n,
            yr.size * (_mean(yr) - mu) ** 2 / data.n)


def _best_split_indices(data, idx, order=None):
    """Best split of the samples ``idx``; ``order`` is their presorted index matrix."""
    if idx.size < 2:
        return None
    y = data.responses[idx]
    if order is None:
        order = idx[sort_columns(data.features[idx])]
    j, thr, score, n_left = best_split_sorted(data.features, order, data.responses, _mean(y))
    if j < 0:
        return None
    go_left = data.features[idx, j] <= thr
    yl, yr = y[go_left], y[~go_left]
    return SplitStatistics(j, thr, max(score, 0.0) / data.n, int(yl.size), int(yr.size),
                           _mean(yl), _mean(yr))


def best_empirical_split(data, cell=None):
    """Exact argmax of Δ̂ over features and mid-gap thresholds, or None.

    Ties go to the smallest feature, then the smallest threshold.
    """
    return _best_split_indices(data, _cell_indices(data, cell))


@dataclass
class Node:
    id: int
    depth: int
    rectangle: Rectangle
    prediction: float
    n_samples: int
    sample_indices: np.ndarray = field(default=None, repr=False)
    split: SplitStatistics | None = None
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self):
        return self.split is None


class RegressionTree:
    """Fitted depth-d tree; node 0 is the root."""

    def __init__(self, nodes, depth, p):
        self.nodes = list(nodes)
        self.depth = int(depth)
        self.p = int(p)
        self._feature = np.array([n.split.feature if n.split else -1 for n in self.nodes], dtype=np.int64)
        self._threshold = np.array([n.split.threshold if n.split else np.nan for n in self.nodes])
        self._left = np.array([n.left for n in self.nodes], dtype=np.int64)
        self._right = np.array([n.right for n in self.nodes], dtype=np.int64)
        self._value = np.array([n.prediction for n in self.nodes])

    def leaves(self):
        return [n for n in self.nodes if n.is_leaf]

    @property
    def n_leaves(self):
        return sum(1 for n in self.nodes if n.is_leaf)

    @property
    def max_leaf_depth(self):
        return max(n.depth for n in self.leaves())

    def apply(self, U):
        """Leaf id reached by each row of U."""
        return route_points(U, self._feature, self._threshold, self._left, self._right)

    def predict(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        if U.shape[1] != self.p:
            raise ConfigurationError(f"points have dimension {U.shape[1]}, tree has {self.p}")
        if np.any(~np.isfinite(U)) or np.any(U < 0) or np.any(U > 1):
            raise DomainError("prediction points must lie in the unit cube")
        return self._value[self.apply(U)]

    def training_sse(self, data):
        return math.fsum((data.responses - self.predict(data.features)) ** 2)

    def to_dict(self):
        nodes = []
        for n in self.nodes:
            nodes.append({
                "id": n.id,
                "depth": n.depth,
                "feature": None if n.split is None else n.split.feature + 1,
                "threshold": None if n.split is None else n.split.threshold,
                "delta": None if n.split is None else n.split.delta,
                "prediction": n.prediction,
                "left": None if n.left < 0 else n.left,
                "right": None if n.right < 0 else n.right,
                "n_samples": n.n_samples,
                "lower": list(n.rectangle.lower),
                "upper": list(n.rectangle.upper),
            })
        return {"depth": self.depth, "p": self.p, "nodes": nodes}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, d):
        p = int(d["p"])
        raw = {int(r["id"]): r for r in d["nodes"]}
        rects = {0: Rectangle.unit(p)}
        nodes = []
        for i in sorted(raw):
            r = raw[i]
            split = None
            if r["feature"] is not None:
                split = SplitStatistics(int(r["feature"]) - 1, float(r["threshold"]),
                                        float(r.get("delta") or 0.0), float("nan"), float("nan"),
                                        float("nan"), float("nan"))
                lt, rt = rects[i].split(split.feature, split.threshold)
                rects[int(r["left"])], rects[int(r["right"])] = lt, rt
            nodes.append(Node(i, int(r["depth"]), rects[i], float(r["prediction"]), int(r["n_samples"]),
                              None, split, -1 if r["left"] is None else int(r["left"]),
                              -1 if r["right"] is None else int(r["right"])))
        return cls(nodes, d["depth"], p)

    @classmethod
    def from_json(cls, text_or_path):
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text()
        return cls.from_dict(json.loads(text))


def fit_cart(data, depth):
    """Grow a CART tree breadth-first to ``depth`` levels.

    Every leaf above the maximum depth is split at its best empirical split,
    including splits with Δ̂ = 0.  Leaves with fewer than two samples or no
    distinct feature values are frozen.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if data.n < 1:
        raise EmptyCellError("cannot fit a tree to an empty dataset")
    y = data.responses
    root_idx = np.arange(data.n)
    nodes = [Node(0, 0, Rectangle.unit(data.p), _mean(y), data.n, root_idx)]
    # features are sorted once; children inherit sorted columns by stable partition
    frontier = [(0, sort_columns(data.features))]
    go_left_all = np.zeros(data.n, dtype=bool)
    for level in range(depth):
        nxt = []
        for nid, order in frontier:
            node = nodes[nid]
            idx = node.sample_indices
            split = _best_split_indices(data, idx, order)
            if split is None:
                continue
            go_left = data.features[idx, split.feature] <= split.threshold
            go_left_all[idx] = go_left
            orders = partition_sorted(order, go_left_all)
            go_left_all[idx] = False
            rect_l, rect_r = node.rectangle.split(split.feature, split.threshold)
            for rect, sub, sub_order, mu in ((rect_l, idx[go_left], orders[0], split.left_mean),
                                             (rect_r, idx[~go_left], orders[1], split.right_mean)):
                child = Node(len(nodes), level + 1, rect, mu, int(sub.size), sub)
                nodes.append(child)
                nxt.append((child.id, sub_order))
            node.split, node.left, node.right = split, nxt[-2][0], nxt[-1][0]
        frontier = nxt
    return RegressionTree(nodes, depth, data.p)


def predict(tree, u):
    """Prediction at a single point (scalar) or at the rows of a 2-D array."""
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim <= 1:
        return float(tree.predict(arr.reshape(1, -1))[0])
    return tree.predict(arr)


def l2_error(tree, f, dist, mode="exact-additive", *, n_mc=100_000, seed=0, return_se=False):
    """||f̂ - f*||^2 in L2(mu).

    ``exact-additive`` sums P(A)[Var(f*|A) + (E(f*|A) - prediction)^2] over
    leaves using quadrature; ``monte-carlo`` averages over ``n_mc`` fresh draws.
    """
    from .model import make_rng
    from .population import cell_moments

    if f.dim != tree.p or dist.dim != tree.p:
        raise ConfigurationError("tree, signal and distribution dimensions differ")
    if mode == "exact-additive":
        if not f.is_additive:
            raise ConfigurationError("exact-additive error mode needs an additive signal")
        terms = []
        for leaf in tree.leaves():
            mom = cell_moments(f, dist, leaf.rectangle, allow_empty=True)
            if mom.mass > 0:
                terms.append(mom.mass * (mom.variance + (mom.mean - leaf.prediction) ** 2))
        err, se = math.fsum(terms), 0.0
    elif mode == "monte-carlo":
        rng = make_rng(seed)
        U = dist.sample(rng, int(n_mc))
        sq = (tree.predict(U) - f(U)) ** 2
        err, se = float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(sq.size))
    else:
        raise ConfigurationError(f"unknown error mode {mode!r}")
    return (err, se) if return_se else err
