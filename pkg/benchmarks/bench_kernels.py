"""Compare the numba and pure-numpy split kernels.

Kernel timings run both implementations in this process; the end-to-end
tree fit runs once per backend in a subprocess, toggling
CARTLAB_DISABLE_NUMBA, so the numpy path is exercised exactly as users get it.

    python benchmarks/bench_kernels.py --n 50000 --p 20 --repeat 5
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from cartlab import kernels

FIT_SNIPPET = """
import json, time
from cartlab import HAS_NUMBA
from cartlab.cart import fit_cart
from cartlab.model import AdditiveSignal, Linear, NoiseSpec, ProductDistribution, generate_dataset
f = AdditiveSignal([Linear(1.0)] * {p}); dist = ProductDistribution.uniform({p})
data = generate_dataset(f, dist, NoiseSpec("bounded-uniform", 0.25), {n}, 1)
fit_cart(data, 2)  # warm-up (numba compile or cache load)
t = time.perf_counter()
for _ in range({repeat}):
    fit_cart(data, {depth})
print(json.dumps({{"numba": HAS_NUMBA, "seconds": (time.perf_counter() - t) / {repeat}}}))
"""


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench_kernels(n, p, repeat):
    rng = np.random.default_rng(0)
    X = rng.random((n, p))
    y = rng.random(n)
    order = kernels.sort_columns(X)
    go_left = X[:, 0] <= 0.5
    out = {"sort": best_time(lambda: kernels.sort_columns(X), repeat)}
    cases = {"split": (kernels._best_split_sorted_nb, kernels._best_split_sorted_np, (X, order, y, y.mean())),
             "partition": (kernels._partition_sorted_nb, kernels._partition_sorted_np, (order, go_left))}
    for name, (nb, npf, argv) in cases.items():
        out[name + "_numpy"] = best_time(lambda: npf(*argv), repeat)
        if kernels.HAS_NUMBA:
            nb(*argv)  # compile or load from cache
            out[name + "_numba"] = best_time(lambda: nb(*argv), repeat)
            a, b = nb(*argv), npf(*argv)
            out[name + "_agree"] = all(np.array_equal(u, v, equal_nan=True) for u, v in zip(a, b))
    return out


def bench_fit(n, p, depth, repeat, disable):
    env = dict(os.environ, CARTLAB_DISABLE_NUMBA="1" if disable else "0")
    code = FIT_SNIPPET.format(n=n, p=p, depth=depth, repeat=repeat)
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50000)
    ap.add_argument("--p", type=int, default=20)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    k = bench_kernels(args.n, args.p, args.repeat)
    print(f"n={args.n} p={args.p}; one-off column sort {k['sort'] * 1e3:.3f} ms")
    for name in ("split", "partition"):
        print(f"{name} kernel")
        print(f"  numpy : {k[name + '_numpy'] * 1e3:9.3f} ms")
        if name + "_numba" in k:
            print(f"  numba : {k[name + '_numba'] * 1e3:9.3f} ms  "
                  f"(speed-up {k[name + '_numpy'] / k[name + '_numba']:.1f}x, "
                  f"results agree: {k[name + '_agree']})")
        else:
            print("  numba : not available")

    print(f"fit_cart n={args.n} p={args.p} depth={args.depth}")
    for disable in (True, False):
        r = bench_fit(args.n, args.p, args.depth, args.repeat, disable)
        label = "numba" if r["numba"] else "numpy"
        print(f"  {label} : {r['seconds'] * 1e3:9.3f} ms")


if __name__ == "__main__":
    main()
