"""Evaluation-grid tests: completeness, aggregation arithmetic, CSV
round-trips, and determinism of the harness."""

import math

import numpy as np
import pytest

from ecodrive.harness import (
    ENTRY_SPEEDS_KPH,
    ENTRY_TIMES,
    CellSummary,
    GridSpec,
    MetricsRow,
    cell_summaries,
    grid_eval,
    heatmap_matrix,
    improvement,
    improvement_table,
    improvements_to_csv,
    metrics_from_csv,
    metrics_to_csv,
    per_entry_time_summary,
    run_method_episode,
    summaries_to_csv,
)

TINY = GridSpec(entry_times=(0, 30), entry_speeds_kph=(10, 50),
                methods=("idm",), seeds=(0,))


def _row(method="idm", c=0, s=10, seed=0, tt=100.0, en=1000.0,
         lc=0, col=0, status="success"):
    return MetricsRow(method, c, s, seed, tt, en, lc, col, status)


class TestGridSpec:
    def test_default_grid_shape(self):
        spec = GridSpec()
        assert spec.entry_times == (0, 10, 20, 30, 40, 50)
        assert spec.entry_speeds_kph == (10, 20, 30, 40, 50)
        assert len(list(spec.cells())) == 30

    def test_scenario_mapping(self):
        sc = GridSpec().scenario(30, 20, 7)
        assert sc.entry_offset == 30.0
        assert sc.entry_speed == pytest.approx(20 / 3.6)
        assert sc.seed == 7
        assert sc.flow_rate == 0.1


class TestGridEval:
    def test_completeness_and_order(self):
        rows, logs = grid_eval(TINY)
        assert len(rows) == 2 * 2 * 1
        keys = [(r.method, r.c, r.s, r.seed) for r in rows]
        assert keys == sorted(keys, key=lambda k: (k[0], k[1], k[2], k[3]))
        assert logs == {}

    def test_deterministic_repeat(self):
        a = metrics_to_csv(grid_eval(TINY)[0])
        b = metrics_to_csv(grid_eval(TINY)[0])
        assert a == b

    def test_collects_logs_when_asked(self):
        spec = GridSpec(entry_times=(0,), entry_speeds_kph=(50,),
                        methods=("idm",), seeds=(0,))
        rows, logs = grid_eval(spec, collect_logs=True)
        assert set(logs) == {("idm", 0, 50, 0)}
        assert len(logs["idm", 0, 50, 0]) > 0

    def test_single_episode_matches_grid(self):
        spec = TINY
        rows, _ = grid_eval(spec)
        sc = spec.scenario(0, 10, 0)
        row, _ = run_method_episode("idm", sc, 0, 10)
        assert row in rows


class TestAggregation:
    def test_improvement_arithmetic(self):
        assert improvement(1000.0, 800.0) == pytest.approx(20.0)
        assert improvement(123.4, 123.4) == 0.0
        assert improvement(100.0, 120.0) == pytest.approx(-20.0)

    def test_cell_summaries_mean_std(self):
        rows = [_row(seed=0, tt=100.0, en=1000.0),
                _row(seed=1, tt=110.0, en=1200.0)]
        (s,) = cell_summaries(rows)
        assert s.n == 2
        assert s.travel_time_mean == pytest.approx(105.0)
        assert s.travel_time_std == pytest.approx(5.0)
        assert s.energy_mean == pytest.approx(1100.0)
        assert s.energy_std == pytest.approx(100.0)

    def test_cell_summaries_skip_nan_rows(self):
        rows = [_row(seed=0, tt=100.0, en=1000.0),
                _row(seed=1, tt=math.nan, en=math.nan, status="infeasible")]
        (s,) = cell_summaries(rows)
        assert s.n == 1
        assert s.travel_time_mean == 100.0

    def test_improvement_table_vs_idm(self):
        summaries = [
            CellSummary("idm", 0, 10, 2, 100.0, 0.0, 1000.0, 0.0),
            CellSummary("graph", 0, 10, 2, 90.0, 0.0, 800.0, 0.0),
        ]
        (imp,) = improvement_table(summaries)
        assert imp.method == "graph"
        assert imp.energy_imp_pct == pytest.approx(20.0)
        assert imp.time_imp_pct == pytest.approx(10.0)

    def test_improvement_nan_without_baseline(self):
        summaries = [CellSummary("graph", 0, 10, 2, 90.0, 0.0, 800.0, 0.0)]
        (imp,) = improvement_table(summaries)
        assert math.isnan(imp.energy_imp_pct)

    def test_per_entry_time_average(self):
        summaries = [
            CellSummary("idm", 0, 10, 1, 100.0, 0.0, 1000.0, 0.0),
            CellSummary("idm", 0, 20, 1, 100.0, 0.0, 1000.0, 0.0),
            CellSummary("graph", 0, 10, 1, 90.0, 0.0, 900.0, 0.0),
            CellSummary("graph", 0, 20, 1, 80.0, 0.0, 700.0, 0.0),
        ]
        per_c = per_entry_time_summary(improvement_table(summaries))
        e, t = per_c[("graph", 0)]
        assert e == pytest.approx((10.0 + 30.0) / 2)
        assert t == pytest.approx((10.0 + 20.0) / 2)

    def test_heatmap_shape_and_placement(self):
        summaries = [
            CellSummary("idm", 30, 20, 1, 100.0, 0.0, 1000.0, 0.0),
            CellSummary("hrl", 30, 20, 1, 90.0, 0.0, 850.0, 0.0),
        ]
        mat = heatmap_matrix(improvement_table(summaries), "hrl", "energy")
        assert mat.shape == (len(ENTRY_TIMES), len(ENTRY_SPEEDS_KPH))
        i = ENTRY_TIMES.index(30)
        j = ENTRY_SPEEDS_KPH.index(20)
        assert mat[i, j] == pytest.approx(15.0)
        assert np.isnan(np.delete(mat.ravel(), i * len(ENTRY_SPEEDS_KPH) + j)).all()


class TestCsv:
    def test_metrics_round_trip(self):
        rows = [_row(), _row(method="graph", c=30, s=50, seed=2,
                             tt=87.123456, en=54321.654321, lc=3)]
        assert metrics_from_csv(metrics_to_csv(rows)) == rows

    def test_metrics_header_check(self):
        with pytest.raises(ValueError):
            metrics_from_csv("bogus,header\n1,2\n")

    def test_improvements_csv_with_averages(self):
        summaries = [
            CellSummary("idm", 0, 10, 1, 100.0, 0.0, 1000.0, 0.0),
            CellSummary("graph", 0, 10, 1, 90.0, 0.0, 800.0, 0.0),
        ]
        imps = improvement_table(summaries)
        text = improvements_to_csv(imps, per_entry_time_summary(imps))
        lines = text.strip().split("\n")
        assert lines[0] == "method,C,S,energy_imp_pct,time_imp_pct"
        assert lines[1].startswith("graph,0,10,20.000000,10.000000")
        assert lines[2].startswith("graph,0,avg,")

    def test_summaries_csv_header(self):
        text = summaries_to_csv(cell_summaries([_row()]))
        assert text.startswith("method,C,S,n,travel_time_mean")
        assert len(text.strip().split("\n")) == 2
