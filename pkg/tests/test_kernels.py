import json
import os
import subprocess
import sys

import numpy as np
import pytest

from cartlab import kernels
from cartlab.model import make_rng

needs_numba = pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba not installed or disabled")


def _instance(seed, n=300, p=4, decimals=2):
    rng = make_rng(seed)
    X = np.round(rng.random((n, p)), decimals)
    y = rng.normal(size=n)
    return X, y


@needs_numba
@pytest.mark.parametrize("seed", range(10))
def test_split_kernels_agree(seed):
    X, y = _instance(seed)
    order = kernels.sort_columns(X)
    a = kernels._best_split_sorted_nb(X, order, y, float(y.mean()))
    b = kernels._best_split_sorted_np(X, order, y, float(y.mean()))
    assert a[0] == b[0] and a[1] == b[1] and a[3] == b[3]
    assert a[2] == b[2]  # same summation order, so bit-identical


@needs_numba
def test_partition_kernels_agree():
    X, _ = _instance(1)
    order = kernels.sort_columns(X)
    go_left = X[:, 2] <= 0.37
    for u, v in zip(kernels._partition_sorted_nb(order, go_left), kernels._partition_sorted_np(order, go_left)):
        np.testing.assert_array_equal(u, v)


def test_partition_keeps_columns_sorted():
    X, _ = _instance(2)
    order = kernels.sort_columns(X)
    go_left = X[:, 0] <= 0.5
    left, right = kernels.partition_sorted(order, go_left)
    assert left.shape[0] == go_left.sum() and right.shape[0] == (~go_left).sum()
    for part in (left, right):
        for j in range(X.shape[1]):
            assert np.all(np.diff(X[part[:, j], j]) >= 0)


@needs_numba
def test_route_kernels_agree():
    feature = np.array([0, 1, -1, -1, -1])
    threshold = np.array([0.5, 0.3, 0.0, 0.0, 0.0])
    left = np.array([1, 3, -1, -1, -1])
    right = np.array([2, 4, -1, -1, -1])
    U = make_rng(3).random((1000, 2))
    a = kernels._route_points_nb(U, feature, threshold, left, right)
    b = kernels._route_points_np(U, feature, threshold, left, right)
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) == {2, 3, 4}


def test_single_row_has_no_split():
    j, thr, score, pos = kernels.best_split_node(np.array([[0.3, 0.4]]), np.array([0.0]))
    assert j == -1


def test_midpoint_never_reaches_upper_value():
    a = 0.1
    b = np.nextafter(a, 1.0)
    X = np.array([[a], [b]])
    j, thr, _, _ = kernels.best_split_node(X, np.array([-1.0, 1.0]))
    assert j == 0 and a <= thr < b


def test_env_flag_selects_numpy_path():
    code = ("import json, numpy as np; from cartlab import kernels, cart; from cartlab.model import *; "
            "d = generate_dataset(linear_signal(), ProductDistribution.uniform(1), "
            "NoiseSpec('bounded-uniform', 0.25), 500, 3); t = cart.fit_cart(d, 4); "
            "print(json.dumps([kernels.HAS_NUMBA, [n.split.threshold for n in t.nodes if n.split]]))")
    outs = {}
    for flag in ("1", "0"):
        env = dict(os.environ, CARTLAB_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        outs[flag] = json.loads(res.stdout)
    assert outs["1"][0] is False
    assert outs["1"][1] == outs["0"][1]
