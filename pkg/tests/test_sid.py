import csv
import json

import numpy as np
import pytest

from cartlab.cart import Rectangle
from cartlab.experiments import builtin_signal
from cartlab.lrp import sid_from_additive_lrp, sid_from_piecewise_lrp
from cartlab.model import AdditiveSignal, Constant, ProductDistribution, XorSignal, linear_signal, polynomial_signal
from cartlab.sid import (
    CellFamily,
    cell_sid_ratio,
    check_certified_lambda,
    default_family,
    estimate_sid_coefficient,
)

U1 = ProductDistribution.uniform(1)
U2 = ProductDistribution.uniform(2)


def _square_oracle(K, nthr=2000):
    """min over all [i/K, j/K] of the best-split ratio for t^2, from exact antiderivatives."""
    grid = np.arange(K + 1) / K
    s = np.linspace(0.0, 1.0, nthr + 2)[1:-1]
    I = lambda x: x ** 3 / 3
    best = np.inf
    for i in range(K):
        lo, hi = grid[i], grid[i + 1:]
        m = hi - lo
        mean = (I(hi) - I(lo)) / m
        var = (hi ** 5 - lo ** 5) / 5 / m - mean ** 2
        b = lo + np.outer(m, s)
        ml, mr = b - lo, hi[:, None] - b
        D = I(b) - I(lo) - mean[:, None] * ml
        best = min(best, float(((m[:, None] * D ** 2 / (ml * mr)).max(1) / (m * var)).min()))
    return best


@pytest.mark.parametrize("lo,hi", [(0.0, 1.0), (0.3, 0.35), (0.12, 0.97)])
def test_linear_ratio_is_three_quarters_everywhere(lo, hi):
    assert cell_sid_ratio(linear_signal(), U1, Rectangle([lo], [hi])) == pytest.approx(0.75, abs=1e-6)


def test_xor_and_constant_cells():
    assert cell_sid_ratio(XorSignal(), U2, Rectangle.unit(2)) <= 1e-6
    assert cell_sid_ratio(AdditiveSignal([Constant(1.0)]), U1, Rectangle([0.2], [0.4])) is None


def test_linear_coefficient():
    r = estimate_sid_coefficient(linear_signal(), U1, CellFamily("interval-grid", k=20))
    assert r.lambda_hat == pytest.approx(0.75, abs=0.01)
    assert r.cells_searched == 210 and r.cells_skipped == 0
    assert all(abs(rec.ratio - 0.75) < 1e-6 for rec in r.records)
    assert "upper estimate" in r.note


def test_xor_dyadic_worst_cell_is_root():
    r = estimate_sid_coefficient(XorSignal(), U2, CellFamily("dyadic", depth=1))
    assert r.lambda_hat <= 1e-6
    assert r.worst_cell.lower == (0.0, 0.0) and r.worst_cell.upper == (1.0, 1.0)


def test_all_constant_family_is_vacuous():
    r = estimate_sid_coefficient(AdditiveSignal([Constant(3.0)]), U1, CellFamily("interval-grid", k=3))
    assert r.lambda_hat == 1.0 and r.cells_skipped == r.cells_searched == 6


def test_square_against_fine_grid_oracle():
    r = estimate_sid_coefficient(polynomial_signal([0, 0, 1]), U1, CellFamily("interval-grid", k=20))
    assert r.lambda_hat == pytest.approx(_square_oracle(200), abs=1e-3)
    assert r.lambda_hat == pytest.approx(_square_oracle(20), abs=1e-7)


def test_empty_family_and_bad_specs():
    with pytest.raises(ValueError):
        CellFamily("interval-grid", k=0)
    with pytest.raises(ValueError):
        CellFamily("hexagons")

    class Empty(CellFamily):
        def cells(self, p):
            return iter(())

    with pytest.raises(ValueError):
        estimate_sid_coefficient(linear_signal(), U1, Empty())


def test_certified_lambda_ordering():
    r = estimate_sid_coefficient(linear_signal(), U1, CellFamily("interval-grid", k=10))
    assert check_certified_lambda(r, sid_from_additive_lrp([2 * np.sqrt(3)], 1))
    assert sid_from_additive_lrp([2 * np.sqrt(3)], 1) == pytest.approx(1 / 3)
    assert not check_certified_lambda(r, 0.9)


def test_piecewise_certificate_below_measured():
    f = builtin_signal("two-piece")
    g = f.components[0]
    r = estimate_sid_coefficient(f, U1, CellFamily("interval-grid", k=10), grid_size=128)
    assert check_certified_lambda(r, sid_from_piecewise_lrp(g.r, g.alpha, g.beta, 1))


def test_refinement_never_increases_estimate():
    f = polynomial_signal([0.0, 1.0, -3.0, 2.5])
    coarse = estimate_sid_coefficient(f, U1, CellFamily("interval-grid", k=4), grid_size=128)
    fine = estimate_sid_coefficient(f, U1, CellFamily("interval-grid", k=8), grid_size=128)
    # the k=8 grid contains every k=4 cell
    assert fine.lambda_hat <= coarse.lambda_hat + 1e-12


def test_scale_and_shift_invariance():
    f = polynomial_signal([0.0, 1.0, -3.0, 2.5], [0.0, 2.0])
    fam = CellFamily("random-cells", count=15, seed=4)
    a = estimate_sid_coefficient(f, U2, fam, grid_size=128)
    b = estimate_sid_coefficient(f.scaled(-2.5, shift=4.0), U2, fam, grid_size=128)
    for x, y in zip(a.records, b.records):
        assert y.ratio == pytest.approx(x.ratio, abs=1e-9)


def test_ratios_bounded_and_threads_deterministic():
    f = polynomial_signal([0.0, 1.0, -3.0, 2.5])
    fam = CellFamily("interval-grid", k=5)
    one = estimate_sid_coefficient(f, U1, fam, grid_size=64)
    many = estimate_sid_coefficient(f, U1, fam, grid_size=64, threads=4)
    assert [r.ratio for r in one.records] == [r.ratio for r in many.records]
    assert all(0.0 <= r.ratio <= 1 + 1e-9 for r in one.records)
    assert one.lambda_hat == min(r.ratio for r in one.records)


def test_default_families():
    assert default_family(1).describe() == "interval-grid(k=20)"
    assert default_family(2).k == 6
    assert default_family(3).kind == "random-cells"


def test_report_serialisation(tmp_path):
    r = estimate_sid_coefficient(linear_signal(), U1, CellFamily("interval-grid", k=3), grid_size=32)
    d = json.loads(r.to_json(tmp_path / "sid.json"))
    assert d["lambda_hat"] == r.lambda_hat and d["family"] == "interval-grid(k=3)"
    r.to_csv(tmp_path / "cells.csv")
    rows = list(csv.DictReader((tmp_path / "cells.csv").open()))
    assert len(rows) == 6
    assert rows[0]["best_feature"] == "1"
    assert float(rows[0]["ratio"]) == pytest.approx(0.75, abs=1e-6)
