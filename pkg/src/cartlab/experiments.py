"""Seeded experiment runners: convergence rate, XOR root splits, verification sweep.

Every replicate draws its data from ``derive_seed(base_seed, n, replicate)``
so any (n, replicate) pair can be reproduced on its own.  Tables are written
with 17 significant digits and no timestamps, so equal configs give
byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import cart, lrp, population, sid
from .bounds import depth_schedule, phi
from .cart import Rectangle, fit_cart, l2_error
from .errors import CartlabError, ConfigurationError
from .model import (
    AdditiveSignal,
    Linear,
    NoiseSpec,
    Piecewise,
    PolynomialComponent,
    ProductDistribution,
    XorSignal,
    derive_seed,
    distribution_from_dict,
    fmt,
    generate_dataset,
    make_rng,
    signal_from_dict,
)

REFERENCE_SLOPE = -2.0 / 3.0
# mean errors at or below this are roundoff of an exact fit
ZERO_ERROR = 1e-20


class ExperimentError(CartlabError):
    """A replicate failed; carries what is needed to rerun it alone."""

    def __init__(self, n, replicate, seed, cause):
        super().__init__(f"replicate failed at n={n}, replicate={replicate}, seed={seed}: {cause}")
        self.n, self.replicate, self.seed = n, replicate, seed


@dataclass
class ExperimentConfig:
    experiment_id: str = "rate"
    signal: dict = field(default_factory=lambda: {"kind": "linear", "slope": 1.0, "intercept": 0.0})
    distribution: dict = field(default_factory=lambda: {"kind": "uniform"})
    noise: dict = field(default_factory=lambda: {"kind": "bounded-uniform", "m": 0.25})
    n_grid: list = field(default_factory=lambda: [2 ** k for k in range(8, 15)])
    replicates: int = 20
    base_seed: int = 20240601
    depth_rule: str = "scheduled"
    lam: float = 0.75
    depth: int = 3
    error_mode: str = "exact-additive"
    n_mc: int = 100_000

    def __post_init__(self):
        self.n_grid = [int(n) for n in self.n_grid]
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigurationError("n_grid must be a non-empty strictly increasing list")
        if min(self.n_grid) < 2:
            raise ConfigurationError("every n must be >= 2")
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")
        if self.depth_rule not in {"scheduled", "fixed"}:
            raise ConfigurationError(f"unknown depth rule {self.depth_rule!r}")
        if self.depth_rule == "scheduled" and not 0 < self.lam <= 1:
            raise ConfigurationError("scheduled depth needs 0 < lam <= 1")
        if self.depth_rule == "fixed" and self.depth < 0:
            raise ConfigurationError("fixed depth must be >= 0")
        if self.error_mode not in {"exact-additive", "monte-carlo"}:
            raise ConfigurationError(f"unknown error mode {self.error_mode!r}")

    def depth_for(self, n):
        return depth_schedule(self.lam, n) if self.depth_rule == "scheduled" else self.depth

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, spec):
        unknown = set(spec) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**spec)

    def build(self):
        f = signal_from_dict(self.signal)
        dist = distribution_from_dict(self.distribution, f.dim)
        return f, dist, NoiseSpec.from_dict(self.noise)


@dataclass
class RateResult:
    rows: list  # (n, replicate, seed, depth, error)
    summary: list  # (n, mean, stderr)
    slope: float | None
    intercept: float | None
    reference_slope: float
    slope_note: str = ""

    def errors_at(self, n):
        return [r[4] for r in self.rows if r[0] == n]

    def fit_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "reference_slope": self.reference_slope, "note": self.slope_note,
                "fit": "least squares of log2(mean error) on log2(n)"}


def fit_loglog(ns, means):
    """(slope, intercept, note) of log2(mean) on log2(n); None when fewer than 3 usable points."""
    ns = np.asarray(ns, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    if ns.size < 3:
        return None, None, "undefined: fewer than 3 n values"
    if np.any(means <= ZERO_ERROR):
        return None, None, f"undefined: some mean error is zero (<= {ZERO_ERROR:g})"
    slope, intercept = np.polyfit(np.log2(ns), np.log2(means), 1)
    return float(slope), float(intercept), ""


def summarize(rows, n_grid):
    out = []
    for n in n_grid:
        e = np.array([r[4] for r in rows if r[0] == n])
        se = float(e.std(ddof=1) / math.sqrt(e.size)) if e.size > 1 else 0.0
        out.append((n, float(e.mean()), se))
    return out


def _map(fn, tasks, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def run_rate_experiment(config, *, threads=1):
    """Fit CART at each (n, replicate), record its L2 error and fit the log-log slope."""
    f, dist, noise = config.build()
    tasks = [(n, r) for n in config.n_grid for r in range(config.replicates)]

    def one(task):
        n, r = task
        seed = derive_seed(config.base_seed, n, r)
        d = config.depth_for(n)
        try:
            data = generate_dataset(f, dist, noise, n, seed)
            tree = fit_cart(data, d)
            err = l2_error(tree, f, dist, config.error_mode, n_mc=config.n_mc,
                           seed=derive_seed(seed, 1))
        except Exception as exc:  # report the exact replicate to rerun
            raise ExperimentError(n, r, seed, exc) from exc
        return (n, r, seed, d, max(float(err), 0.0))

    rows = _map(one, tasks, threads)
    summary = summarize(rows, config.n_grid)
    slope, intercept, note = fit_loglog([s[0] for s in summary], [s[1] for s in summary])
    ref = -phi(config.lam) if config.depth_rule == "scheduled" else REFERENCE_SLOPE
    return RateResult(rows, summary, slope, intercept, ref, note)


def write_rate_outputs(result, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with (outdir / "rate.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "replicate", "seed", "depth", "error"])
        for n, r, seed, d, e in result.rows:
            w.writerow([n, r, seed, d, fmt(e)])
    with (outdir / "rate_summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "mean", "stderr"])
        for n, m, se in result.summary:
            w.writerow([n, fmt(m), fmt(se)])
    fit = result.fit_dict()
    for k in ("slope", "intercept", "reference_slope"):
        if fit[k] is not None:
            fit[k] = float(fmt(fit[k]))
    (outdir / "rate_fit.json").write_text(json.dumps(fit, indent=2) + "\n")
    return [outdir / "rate.csv", outdir / "rate_summary.csv", outdir / "rate_fit.json"]


# --- XOR -----------------------------------------------------------------


@dataclass
class XorReport:
    rows: list  # dicts per (n, replicate)
    fractions: dict  # n -> fraction of root thresholds within `near` of {0, 1}
    root_sup_delta: float
    root_variance: float
    root_ratio: float
    near: float = 0.1

    def to_dict(self):
        return {"fractions": {str(k): v for k, v in self.fractions.items()},
                "root_sup_delta": self.root_sup_delta, "root_variance": self.root_variance,
                "root_ratio": self.root_ratio, "near": self.near}


def xor_population_root(grid_size=512):
    """(sup Δ, Var, ratio) of the XOR signal on the unit square under the uniform law."""
    f, dist = XorSignal(), ProductDistribution.uniform(2)
    root = Rectangle.unit(2)
    mom = population.cell_moments(f, dist, root)
    best = population.best_population_split(f, dist, root, grid_size)
    sup = 0.0 if best is None else best.delta
    return sup, mom.variance, sup / (mom.mass * mom.variance)


def run_xor_demo(n_grid=(100, 1000, 10000), replicates=50, base_seed=7, *,
                 noise=None, near=0.1, n_mc=20_000, threads=1):
    """Depth-2 CART on XOR data; where does the root split land?"""
    f, dist = XorSignal(), ProductDistribution.uniform(2)
    noise = noise or NoiseSpec("bounded-uniform", 0.25)
    tasks = [(int(n), r) for n in n_grid for r in range(replicates)]

    def one(task):
        n, r = task
        seed = derive_seed(base_seed, n, r)
        tree = fit_cart(generate_dataset(f, dist, noise, n, seed), 2)
        root = tree.nodes[0]
        if root.split is None:
            feat, b, dist_b = 0, float("nan"), float("nan")
        else:
            feat, b = root.split.feature + 1, root.split.threshold
            dist_b = min(b, 1.0 - b)
        err = l2_error(tree, f, dist, "monte-carlo", n_mc=n_mc, seed=derive_seed(seed, 1))
        return {"n": n, "replicate": r, "seed": seed, "root_feature": feat,
                "root_threshold": b, "boundary_distance": dist_b,
                "near_boundary": int(dist_b <= near), "l2_error": err}

    rows = _map(one, tasks, threads)
    fractions = {}
    for n in dict.fromkeys(t[0] for t in tasks):
        flags = [row["near_boundary"] for row in rows if row["n"] == n]
        fractions[n] = sum(flags) / len(flags)
    sup, var, ratio = xor_population_root()
    return XorReport(rows, fractions, sup, var, ratio, near)


def write_xor_outputs(report, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cols = ["n", "replicate", "seed", "root_feature", "root_threshold", "boundary_distance",
            "near_boundary", "l2_error"]
    with (outdir / "xor.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in report.rows:
            w.writerow([fmt(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
    (outdir / "xor_summary.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return [outdir / "xor.csv", outdir / "xor_summary.json"]


# --- verification suite ----------------------------------------------------


def builtin_signal(name):
    """Signals the verification suite knows by name."""
    if name == "linear":
        return AdditiveSignal([Linear(1.0, 0.0)])
    if name == "quadratic":
        return AdditiveSignal([PolynomialComponent([0.0, 0.0, 1.0])])
    if name == "two-piece":
        return AdditiveSignal([Piecewise([0.0, 0.5, 1.0], [Linear(1.0, 0.0), Linear(1.0, 1.0)],
                                         alpha=1.0, beta=2.0 * math.sqrt(3.0))])
    if name == "additive-2d":
        return AdditiveSignal([Linear(1.0, 0.0), PolynomialComponent([0.0, 0.0, 1.0])])
    if name == "xor":
        return XorSignal()
    raise ConfigurationError(f"unknown built-in signal {name!r}")


DEFAULT_TOLERANCES = {
    "empirical_identity": 1e-10,
    "population_identity": 1e-9,
    "closed_form": 1e-8,
    "split_lower_bound": 1e-8,
    "lrp_bound": 1e-6,
    "certificate": 1e-6,
}


@dataclass
class CheckResult:
    signal: str
    check: str
    cases: int
    worst: float
    tolerance: float
    passed: bool
    expected_failure: bool = False
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def offenders(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {"passed": self.passed,
                "offenders": [f"{c.signal}:{c.check}" for c in self.offenders],
                "checks": [asdict(c) for c in self.checks]}


def _random_cell(rng, p, min_width=0.05):
    lo = np.empty(p)
    hi = np.empty(p)
    for k in range(p):
        a, b = np.sort(rng.random(2))
        while b - a < min_width:
            a, b = np.sort(rng.random(2))
        lo[k], hi[k] = a, b
    return Rectangle(lo, hi)


def _check(name, check, residuals, tol, *, lower=False, detail=""):
    # lower=True: residuals are slacks that must stay >= -tol
    r = np.asarray(residuals, dtype=np.float64)
    if lower:
        worst = float(r.min()) if r.size else 0.0
        ok = worst >= -tol
    else:
        worst = float(np.abs(r).max()) if r.size else 0.0
        ok = worst <= tol
    return CheckResult(name, check, int(r.size), worst, tol, bool(ok), False, detail)


def run_verification_suite(specs=("linear", "quadratic", "two-piece", "xor"), *, cases=20,
                           seed=0, tolerances=None, delta_fn=None, sid_family=None,
                           grid_size=256):
    """Identity and inequality checks per built-in signal; fails on any offender.

    ``delta_fn(data, cell, j, b)`` replaces the empirical impurity decrease
    (used to make sure a corrupted formula is caught).
    """
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    delta_fn = delta_fn or (lambda d, c, j, b: cart.empirical_impurity_decrease(d, c, j, b).delta)
    out = []
    for si, name in enumerate(specs):
        f = builtin_signal(name)
        dist = ProductDistribution.uniform(f.dim)
        rng = make_rng(derive_seed(seed, si))

        res = []
        for c in range(cases):
            data = generate_dataset(f, dist, NoiseSpec("bounded-uniform", 0.25),
                                    int(rng.integers(8, 65)), derive_seed(seed, si, c))
            cell = Rectangle.unit(f.dim)
            j = int(rng.integers(f.dim))
            b = float(np.quantile(data.features[:, j], rng.uniform(0.1, 0.9)))
            parts = cart.empirical_split_parts(data, cell, j, b)
            res.append(delta_fn(data, cell, j, b) - (parts[0] + parts[1]))
        out.append(_check(name, "empirical_identity", res, tol["empirical_identity"]))

        ident, closed = [], []
        for c in range(cases):
            cell = _random_cell(rng, f.dim)
            j = int(rng.integers(f.dim))
            b = float(rng.uniform(cell.lower[j], cell.upper[j]))
            d = population.population_impurity_decrease(f, dist, cell, j, b).delta
            dl, dr = population.population_split_parts(f, dist, cell, j, b)
            ident.append(d - (dl + dr))
            closed.append(population.verify_delta_closed_form(f, dist, cell, j, b))
        out.append(_check(name, "population_identity", ident, tol["population_identity"]))
        out.append(_check(name, "closed_form", closed, tol["closed_form"]))

        family = sid_family
        if family is None:
            family = sid.CellFamily("interval-grid", k=8) if f.dim == 1 else sid.CellFamily("dyadic", depth=1)
        report = sid.estimate_sid_coefficient(f, dist, family, grid_size)
        lam_hat = report.lambda_hat

        if not f.is_additive:
            # SID is expected to fail here; the finding is recorded, not an error
            out.append(CheckResult(name, "sid", report.cells_searched, float(lam_hat), 1e-6,
                                   True, bool(lam_hat <= 1e-6),
                                   "SID not satisfied (lambda_hat ~ 0)" if lam_hat <= 1e-6
                                   else "SID unexpectedly satisfied"))
            continue

        slacks = [population.verify_split_lower_bound(f, dist, _random_cell(rng, f.dim), grid_size)
                  for _ in range(max(cases // 2, 1))]
        out.append(_check(name, "split_lower_bound", slacks, tol["split_lower_bound"], lower=True))

        taus, closed_taus = [], []
        for g in f.components:
            cert = lrp.certify_lrp(g, lrp.IntervalFamily("grid", k=10))
            taus.append(cert.tau_measured)
            closed_taus.append(cert.tau_closed_form)
            if cert.tau_closed_form is not None:
                out.append(_check(name, "lrp_bound", [cert.tau_closed_form - cert.tau_measured],
                                  tol["lrp_bound"], lower=True,
                                  detail=f"tau={cert.tau_measured:.6g}"))
            if isinstance(g, Piecewise):
                w = [lrp.weighted_lrp_check(g, *np.sort(rng.random(2))) for _ in range(cases)]
                out.append(_check(name, "weighted_lrp", w, tol["lrp_bound"], lower=True))

        if all(t is not None for t in closed_taus):
            lam_cert = lrp.sid_from_additive_lrp(closed_taus, f.dim)
        elif all(isinstance(g, Piecewise) for g in f.components):
            g0 = max(f.components, key=lambda g: lrp.piecewise_tau2(g.r, g.alpha, g.beta))
            lam_cert = lrp.sid_from_piecewise_lrp(g0.r, g0.alpha, g0.beta, f.dim)
        else:
            lam_cert = None
        if lam_cert is not None:
            out.append(_check(name, "certificate", [lam_hat - lam_cert], tol["certificate"],
                              lower=True, detail=f"certified={lam_cert:.6g}, measured={lam_hat:.6g}"))
    return VerificationReport(out)


def write_verify_outputs(report, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    d = report.to_dict()
    for c in d["checks"]:
        c["worst"] = float(fmt(c["worst"]))
    (outdir / "verify.json").write_text(json.dumps(d, indent=2) + "\n")
    return [outdir / "verify.json"]
