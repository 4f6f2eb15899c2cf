"""Hot loops of the tree code: the per-node split sweep and batch routing.

Each kernel has a numba implementation and a numpy implementation with the
same signature and the same floating-point summation order, so both paths
return bit-identical results.  ``HAS_NUMBA`` decides which one is exported.
"""
import numpy as np

from ._accel import HAS_NUMBA, njit

__all__ = ["best_split_node", "best_split_sorted", "partition_sorted", "route_points",
           "sort_columns", "HAS_NUMBA"]


def _midpoint(a, b):
    mid = a + 0.5 * (b - a)
    # adjacent doubles: the rounded midpoint can land on b, which would route b left
    if mid >= b:
        mid = a
    return mid


# Scores within this relative gap of the best count as tied; the first tied
# candidate in (feature, threshold) order wins.  Without it a 1-ulp rounding
# difference between mathematically equal scores decides the split.
TIE_RTOL = 1e-12


@njit
def _best_split_sorted_nb(X, order, y, mean):
    m, p = order.shape
    if m < 2:
        return -1, np.nan, -1.0, -1
    scores = np.full((p, m - 1), -1.0)
    top = -1.0
    for j in range(p):
        csum = 0.0
        for i in range(m - 1):
            oi = order[i, j]
            csum += y[oi] - mean
            if X[oi, j] < X[order[i + 1, j], j]:
                nl = i + 1
                score = csum * csum * m / (nl * (m - nl))
                scores[j, i] = score
                if score > top:
                    top = score
    if top < 0.0:
        return -1, np.nan, -1.0, -1
    cut = top - TIE_RTOL * top
    for j in range(p):
        for i in range(m - 1):
            if scores[j, i] >= cut:
                a = X[order[i, j], j]
                b = X[order[i + 1, j], j]
                mid = a + 0.5 * (b - a)
                if mid >= b:
                    mid = a
                return j, mid, scores[j, i], i + 1
    return -1, np.nan, -1.0, -1


def _best_split_sorted_np(X, order, y, mean):
    m, p = order.shape
    if m < 2:
        return (-1, np.nan, -1.0, -1)
    nl = np.arange(1, m, dtype=np.float64)
    nr = m - nl
    scores = np.full((p, m - 1), -1.0)
    for j in range(p):
        oj = order[:, j]
        xs = X[oj, j]
        csum = np.cumsum(y[oj] - mean)[:-1]
        valid = xs[:-1] < xs[1:]
        scores[j, valid] = (csum * csum * m / (nl * nr))[valid]
    top = float(scores.max())
    if top < 0.0:
        return (-1, np.nan, -1.0, -1)
    # row-major flatnonzero keeps (feature, threshold) order
    k = int(np.flatnonzero(scores >= top - TIE_RTOL * top)[0])
    j, i = divmod(k, m - 1)
    xs = X[order[:, j], j]
    return (j, _midpoint(xs[i], xs[i + 1]), float(scores[j, i]), i + 1)


@njit
def _partition_sorted_nb(order, go_left):
    m, p = order.shape
    n_left = 0
    for i in range(m):
        if go_left[order[i, 0]]:
            n_left += 1
    left = np.empty((n_left, p), dtype=order.dtype)
    right = np.empty((m - n_left, p), dtype=order.dtype)
    for j in range(p):
        il = 0
        ir = 0
        for i in range(m):
            o = order[i, j]
            if go_left[o]:
                left[il, j] = o
                il += 1
            else:
                right[ir, j] = o
                ir += 1
    return left, right


def _partition_sorted_np(order, go_left):
    mask = go_left[order]
    p = order.shape[1]
    left = order.T[mask.T].reshape(p, -1).T
    right = order.T[~mask.T].reshape(p, -1).T
    return np.ascontiguousarray(left), np.ascontiguousarray(right)


@njit
def _route_points_nb(U, feature, threshold, left, right):
    n = U.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if U[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def _route_points_np(U, feature, threshold, left, right):
    node = np.zeros(U.shape[0], dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        cur = node[idx]
        go_left = U[idx, feature[cur]] <= threshold[cur]
        node[idx] = np.where(go_left, left[cur], right[cur])
        active[idx] = feature[node[idx]] >= 0
    return node


def sort_columns(X):
    """Per-column stable argsort of ``X`` (ties keep row order), shape (m, p)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable"), dtype=np.int64)


def best_split_sorted(X, order, y, mean):
    """Best axis-aligned split of one node given its presorted rows.

    ``order[:, j]`` lists the node's row indices into ``X`` sorted by
    feature j, and ``mean`` is the node's response mean.  Returns
    ``(j, threshold, score, n_left)`` where ``score = SSE_A - SSE_L - SSE_R``,
    i.e. n times the impurity decrease Δ̂.  Candidates are
    midpoints between consecutive distinct values; the first maximiser in
    (j, b) order wins.  ``j == -1`` means no feasible split.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if HAS_NUMBA:
        j, thr, score, pos = _best_split_sorted_nb(X, order, y, float(mean))
    else:
        j, thr, score, pos = _best_split_sorted_np(X, order, y, float(mean))
    return int(j), float(thr), float(score), int(pos)


def partition_sorted(order, go_left):
    """Split a node's presorted index matrix into its children, keeping each column sorted."""
    go_left = np.ascontiguousarray(go_left, dtype=np.bool_)
    if HAS_NUMBA:
        return _partition_sorted_nb(order, go_left)
    return _partition_sorted_np(order, go_left)


def best_split_node(X, yc):
    """Best split of the rows of ``X`` with responses ``yc`` already centred."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    return best_split_sorted(X, sort_columns(X), yc, 0.0)


def route_points(U, feature, threshold, left, right):
    """Leaf node index reached by each row of ``U`` (left iff u_j <= b)."""
    U = np.ascontiguousarray(U, dtype=np.float64)
    if HAS_NUMBA:
        return _route_points_nb(U, feature, threshold, left, right)
    return _route_points_np(U, feature, threshold, left, right)
