"""Measured sufficient-impurity-decrease coefficients.

For a cell A the ratio is sup_{j,b} Δ(A, j, b) / (P(A) Var(f*|A)).  The
coefficient of a function is the infimum of that ratio over all cells; a
finite family of cells therefore only gives an upper estimate of it.
"""
from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cart import Rectangle
from .errors import DegenerateCellError
from .model.data import fmt, make_rng
from .population import best_population_split, cell_moments

VARIANCE_FLOOR = 1e-12
RATIO_CEILING = 1.0 + 1e-9
DEFAULT_GRID = 512


@dataclass(frozen=True)
class CellFamily:
    """``interval-grid`` (k per axis), ``random-cells`` (count, seed) or ``dyadic`` (depth)."""

    kind: str = "interval-grid"
    k: int = 20
    count: int = 200
    seed: int = 0
    depth: int = 3
    min_width: float = 1e-3

    def __post_init__(self):
        if self.kind not in {"interval-grid", "random-cells", "dyadic"}:
            raise ValueError(f"unknown cell family {self.kind!r}")
        if self.kind == "interval-grid" and self.k < 1:
            raise ValueError("interval-grid needs k >= 1")
        if self.kind == "random-cells" and self.count < 1:
            raise ValueError("random-cells needs count >= 1")
        if self.kind == "dyadic" and self.depth < 0:
            raise ValueError("dyadic needs depth >= 0")

    def describe(self):
        if self.kind == "interval-grid":
            return f"interval-grid(k={self.k})"
        if self.kind == "random-cells":
            return f"random-cells(count={self.count}, seed={self.seed})"
        return f"dyadic(depth={self.depth})"

    def cells(self, p):
        if self.kind == "interval-grid":
            grid = np.arange(self.k + 1) / self.k
            sides = [(grid[i], grid[j]) for i in range(self.k) for j in range(i + 1, self.k + 1)]
            for combo in itertools.product(sides, repeat=p):
                yield Rectangle([s[0] for s in combo], [s[1] for s in combo])
        elif self.kind == "random-cells":
            rng = make_rng(self.seed)
            made = 0
            while made < self.count:
                ends = np.sort(rng.random((p, 2)), axis=1)
                if np.all(ends[:, 1] - ends[:, 0] >= self.min_width):
                    made += 1
                    yield Rectangle(ends[:, 0], ends[:, 1])
        else:
            for levels in itertools.product(range(self.depth + 1), repeat=p):
                if sum(levels) > self.depth:
                    continue
                ranges = [range(2 ** lv) for lv in levels]
                for idx in itertools.product(*ranges):
                    lo = [i / 2 ** lv for i, lv in zip(idx, levels)]
                    hi = [(i + 1) / 2 ** lv for i, lv in zip(idx, levels)]
                    yield Rectangle(lo, hi)

    @classmethod
    def from_dict(cls, spec):
        return cls(**{k: v for k, v in spec.items() if k in cls.__dataclass_fields__})


@dataclass
class CellRecord:
    cell: Rectangle
    ratio: float | None
    mass: float
    variance: float
    split: object = None  # SplitStatistics of the best split, None when skipped

    @property
    def skipped(self):
        return self.ratio is None


def _evaluate_cell(f, dist, cell, grid_size, refine, variance_floor):
    try:
        mom = cell_moments(f, dist, cell)
    except DegenerateCellError:
        return CellRecord(cell, None, 0.0, 0.0)
    if mom.mass * mom.variance <= variance_floor:
        return CellRecord(cell, None, mom.mass, mom.variance)
    best = best_population_split(f, dist, cell, grid_size, refine)
    delta = 0.0 if best is None else best.delta
    ratio = min(max(delta / (mom.mass * mom.variance), 0.0), RATIO_CEILING)
    return CellRecord(cell, ratio, mom.mass, mom.variance, best)


def cell_sid_ratio(f, dist, cell, grid_size=DEFAULT_GRID, *, refine=True,
                   variance_floor=VARIANCE_FLOOR):
    """Best-split ratio on one cell; None when P(A) Var(f|A) <= floor (vacuous)."""
    return _evaluate_cell(f, dist, cell, grid_size, refine, variance_floor).ratio


@dataclass
class SidReport:
    lambda_hat: float
    worst_cell: Rectangle | None
    worst_cell_ratio: float | None
    cells_searched: int
    cells_skipped: int
    grid_spec: str
    family: str
    records: list = field(repr=False, default_factory=list)
    note: str = ("lambda_hat is the minimum over a finite cell family, so it is an upper "
                 "estimate of the true coefficient (infimum over all rectangles)")

    def to_dict(self):
        return {
            "lambda_hat": self.lambda_hat,
            "worst_cell": None if self.worst_cell is None else self.worst_cell.to_dict(),
            "worst_cell_ratio": self.worst_cell_ratio,
            "cells_searched": self.cells_searched,
            "cells_skipped": self.cells_skipped,
            "grid_spec": self.grid_spec,
            "family": self.family,
            "note": self.note,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_csv(self, path):
        p = self.records[0].cell.dim if self.records else 0
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"lower{k + 1}" for k in range(p)] + [f"upper{k + 1}" for k in range(p)]
                       + ["mass", "variance", "ratio", "best_feature", "best_threshold", "delta", "skipped"])
            for r in self.records:
                s = r.split
                w.writerow([fmt(v) for v in r.cell.lower] + [fmt(v) for v in r.cell.upper]
                           + [fmt(r.mass), fmt(r.variance), "" if r.ratio is None else fmt(r.ratio),
                              "" if s is None else s.feature + 1, "" if s is None else fmt(s.threshold),
                              "" if s is None else fmt(s.delta), int(r.skipped)])


def default_family(p):
    """interval-grid(20) for p = 1, interval-grid(6) for p = 2, 200 random cells beyond."""
    if p == 1:
        return CellFamily("interval-grid", k=20)
    if p == 2:
        return CellFamily("interval-grid", k=6)
    return CellFamily("random-cells", count=200)


def estimate_sid_coefficient(f, dist, family=None, grid_size=DEFAULT_GRID, *, refine=True,
                             variance_floor=VARIANCE_FLOOR, threads=1):
    """Minimum best-split ratio over a cell family, with per-cell records."""
    family = family or default_family(f.dim)
    cells = list(family.cells(f.dim))
    if not cells:
        raise ValueError("cell family is empty")

    def work(cell):
        return _evaluate_cell(f, dist, cell, grid_size, refine, variance_floor)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(work, cells))
    else:
        records = [work(c) for c in cells]
    scored = [r for r in records if r.ratio is not None]
    grid_spec = f"{grid_size} thresholds per feature" + (", golden-section refined" if refine else "")
    if not scored:
        return SidReport(1.0, None, None, len(records), len(records), grid_spec, family.describe(),
                         records, "every searched cell has (near) zero variance; SID holds vacuously")
    worst = min(scored, key=lambda r: r.ratio)
    return SidReport(min(worst.ratio, 1.0), worst.cell, worst.ratio, len(records),
                     len(records) - len(scored), grid_spec, family.describe(), records)


def check_certified_lambda(report, certified_lambda, tol=1e-6):
    """A valid certificate never exceeds the measured coefficient."""
    return bool(certified_lambda <= report.lambda_hat + tol)
