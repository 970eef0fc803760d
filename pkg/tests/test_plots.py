"""Plot-data emission: series and heat-map CSVs plus rendered PNG files."""

import numpy as np
import pytest

from ecodrive.episode import TrajectoryLog, TrajectoryRow
from ecodrive.harness import ImprovementRow
from ecodrive.plots import emit_plot_data, heatmap_csv, series_csv


def _log(n=5):
    log = TrajectoryLog()
    for i in range(n):
        log.append(TrajectoryRow(
            t=i * 0.02, x_lon=i * 0.3, lane=2, v=1.0 + i, a=0.5,
            phase="green" if i < 3 else "red", t_r=10.0, d_f=100.0, v_f=0.0,
            w_f=0, w_l=0, w_r=0, energy_step_j=1.0, reward=0.1))
    return log


class TestSeriesCsv:
    def test_speed_series(self):
        lines = series_csv(_log(), "speed").strip().split("\n")
        assert lines[0] == "t,speed,phase"
        assert lines[1] == "0.00,1.000000,green"
        assert lines[-1] == "0.08,5.000000,red"

    def test_distance_series(self):
        lines = series_csv(_log(), "distance").strip().split("\n")
        assert lines[0] == "t,distance,phase"
        assert lines[2].split(",")[1] == "0.300000"

    def test_unknown_series_rejected(self):
        with pytest.raises(ValueError):
            series_csv(_log(), "acceleration")


class TestHeatmapCsv:
    def test_layout(self):
        mat = np.full((6, 5), 1.5)
        mat[3, 1] = -2.0
        lines = heatmap_csv(mat).strip().split("\n")
        assert lines[0] == "C,S10,S20,S30,S40,S50"
        assert len(lines) == 7
        assert lines[1].split(",")[0] == "C0"
        assert lines[4].split(",")[2] == "-2.000000"


class TestEmit:
    def test_files_written(self, tmp_path):
        logs = {("idm", 30, 20, 0): _log()}
        imps = [ImprovementRow("graph", c, s, 5.0, 1.0)
                for c in (0, 10, 20, 30, 40, 50) for s in (10, 20, 30, 40, 50)]
        written = emit_plot_data(str(tmp_path), logs, imps)
        names = sorted(p.name for p in tmp_path.iterdir())
        assert "idm_30_20_0_speed.csv" in names
        assert "idm_30_20_0_speed.png" in names
        assert "idm_30_20_0_distance.csv" in names
        assert "heatmap_graph_energy.csv" in names
        assert "heatmap_graph_time.png" in names
        assert len(written) == len(names)
        for p in tmp_path.glob("*.png"):
            assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
