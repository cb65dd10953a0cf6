import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from mfrom import bench


def test_f_high_collapses_at_zero():
    for mu in ([2.0, 3.0], [15.0, 7.5], [8.0, 20.0]):
        assert bench.f_high(0.0, np.array(mu)) == pytest.approx(2 * math.sin(-4) + math.sin(mu[1]), abs=1e-14)


def test_f_high_root_of_square():
    mu = np.array([4.0, 11.0])
    assert bench.f_high(2 / mu[0], mu) == pytest.approx(math.sin(mu[1] * math.cos(10 / mu[0])), abs=1e-14)


def _dsin(x):
    getcontext().prec = 40
    x = Decimal(x)
    term, total, k = x, x, 1
    while abs(term) > Decimal(10) ** -38:
        term *= -x * x / ((2 * k) * (2 * k + 1))
        total += term
        k += 1
    return total


def _dcos(x):
    getcontext().prec = 40
    x = Decimal(x)
    term, total, k = Decimal(1), Decimal(1), 1
    while abs(term) > Decimal(10) ** -38:
        term *= -x * x / ((2 * k - 1) * (2 * k))
        total += term
        k += 1
    return total


def test_f_high_direct_high_precision():
    x, m1, m2 = Decimal("0.5"), Decimal(2), Decimal(3)
    ref = Decimal("0.5") * (m1 * x - 2) ** 2 * _dsin(12 * x - 4) + _dsin(m2 * _dcos(5 * x))
    assert bench.f_high(0.5, np.array([2.0, 3.0])) == pytest.approx(float(ref), abs=1e-14)


def test_lhs_with_corners():
    pts = bench.sample_params_lhs_corners(36, bench.ALGEBRAIC_BOUNDS, seed=0)
    assert pts.shape == (40, 2)
    corners = {tuple(r) for r in pts[-4:]}
    assert corners == {(2.0, 3.0), (2.0, 20.0), (15.0, 3.0), (15.0, 20.0)}
    lhs = pts[:36]
    for d, (lo, hi) in enumerate(bench.ALGEBRAIC_BOUNDS):
        bins = np.floor((lhs[:, d] - lo) / (hi - lo) * 36).astype(int)
        assert sorted(bins.tolist()) == list(range(36))
    np.testing.assert_array_equal(pts, bench.sample_params_lhs_corners(36, bench.ALGEBRAIC_BOUNDS, seed=0))
    assert not np.array_equal(pts, bench.sample_params_lhs_corners(36, bench.ALGEBRAIC_BOUNDS, seed=1))
    assert bench.sample_params_lhs_corners(0, bench.ALGEBRAIC_BOUNDS, 0).shape == (4, 2)


def test_algebraic_snapshots_shapes():
    snaps = bench.algebraic_snapshots(500, 36, seed=0)
    assert snaps.values.shape == (500, 40)
    x = snaps.coordinates[:, 0]
    assert x.min() >= 0 and x.max() <= 1
    np.testing.assert_allclose(snaps.values[:, 3], bench.f_high(x, snaps.parameters[3]))
    assert bench.grid_params(bench.ALGEBRAIC_BOUNDS, 20).shape == (400, 2)


def test_rel_error():
    assert bench.rel_error([1.0, 1.0], [1.0, 1.0]) == 0.0
    assert bench.rel_error([2.0, 0.0], [1.0, 0.0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        bench.rel_error([1.0], [0.0])
    cols = bench.rel_errors_columns(np.array([[2.0, 1.0], [0.0, 1.0]]), np.ones((2, 2)))
    np.testing.assert_allclose(cols, [np.sqrt(2) / np.sqrt(2), 0.0])


def test_pod_full_rank_exact_at_training():
    snaps = bench.algebraic_snapshots(60, 8, seed=0)
    cfg = bench.ComparisonConfig(rank=snaps.n_snapshots, energy=None, methods=("pod",))
    rep = bench.run_comparison(snaps, snaps.parameters, snaps.values, cfg)
    assert np.all(rep.rel_errors <= 1e-6)


def test_report_best_method_and_table():
    rep = bench.ErrorReport(("pod", "deeponet", "mfdeeponet"), np.zeros((3, 2)),
                            np.array([[0.3, 0.2, 0.1], [0.1, 0.2, 0.3], [0.5, 0.1, 0.4]]),
                            label="a", epochs=10)
    np.testing.assert_array_equal(rep.best_method, np.argmin(rep.rel_errors, axis=1))
    agg = rep.aggregates()
    assert sum(a["wins"] for a in agg.values()) == 3
    assert rep.mean()["pod"] == pytest.approx(0.3)
    table = bench.summarize_table([rep])
    assert [table._col_name(c) for c in table.columns] == ["pod", "deeponet@10", "mfdeeponet@10"]
    assert "*0.167*" in table.to_text()
    assert table.to_csv().splitlines()[1].endswith("deeponet@10")
    with pytest.raises(ValueError):
        bench.ErrorReport(("a",), np.zeros((2, 1)), np.array([[np.nan], [0.0]]))


def test_comparison_runs_small():
    snaps = bench.algebraic_snapshots(50, 6, seed=0)
    tp = bench.grid_params(bench.ALGEBRAIC_BOUNDS, 3)
    tv = bench.algebraic_fields(snaps.coordinates, tp)
    cfg = bench.ComparisonConfig(low_fidelity="gappy", epochs=20, architecture=bench.dn.Architecture((5,), (5,), 3))
    rep = bench.run_comparison(snaps, tp, tv, cfg)
    assert rep.methods == ("gappy", "deeponet", "mfdeeponet")
    assert rep.rel_errors.shape == (9, 3)
    assert set(rep.loss_histories) == {"deeponet", "mfdeeponet"}
    with pytest.raises(ValueError):
        bench.ComparisonConfig(methods=("pod", "gappy")).method_names()


def test_synthetic_flow():
    snaps = bench.synthetic_flow_snapshots(10, 5)
    assert snaps.values.shape == (100, 5) and snaps.coordinates.shape == (100, 2)
    assert np.all(np.isfinite(snaps.values))
