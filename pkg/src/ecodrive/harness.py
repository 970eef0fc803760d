"""Scenario-grid evaluation: runs each method over entry-time x entry-speed
cells, aggregates seed means, and tabulates improvements against the IDM
baseline."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .driving import GraphDriver, HrlDriver, IdmDriver
from .energy import DEFAULT_ENERGY_PARAMS, EnergyParams
from .episode import EpisodeResult, TrajectoryLog, run_episode
from .gbtpa import PlanInfeasibleError, PlannerGrid, build_graph, plan
from .reward import DEFAULT_WEIGHTS, RewardWeights
from .rl.network import DuelingNetwork
from .rl.preprocess import N_STACK, OBS_DIM
from .world import ScenarioConfig, SignalTiming

METHODS = ("idm", "graph", "hrl")
ENTRY_TIMES = (0, 10, 20, 30, 40, 50)       # C: signal clock at entry, s
ENTRY_SPEEDS_KPH = (10, 20, 30, 40, 50)     # S: entry speed, km/h

METRICS_COLUMNS = ["method", "C", "S", "seed", "travel_time_s", "energy_J",
                   "lane_changes", "collisions", "status"]


@dataclass(frozen=True)
class GridSpec:
    entry_times: tuple[int, ...] = ENTRY_TIMES
    entry_speeds_kph: tuple[int, ...] = ENTRY_SPEEDS_KPH
    methods: tuple[str, ...] = METHODS
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    flow_rate: float = 0.1
    dt: float = 0.02
    signal: SignalTiming = field(default_factory=SignalTiming)

    def cells(self):
        for c in self.entry_times:
            for s in self.entry_speeds_kph:
                yield c, s

    def scenario(self, c: int, s: int, seed: int) -> ScenarioConfig:
        return ScenarioConfig(entry_offset=float(c), entry_speed=s / 3.6,
                              flow_rate=self.flow_rate, seed=seed,
                              dt=self.dt, signal=self.signal)


@dataclass
class MetricsRow:
    method: str
    c: int
    s: int
    seed: int
    travel_time: float
    energy: float
    lane_changes: int
    collisions: int
    status: str

    def sort_key(self):
        return (self.method, self.c, self.s, self.seed)


def make_driver(method: str, scenario: ScenarioConfig,
                net: DuelingNetwork | None = None,
                energy_params: EnergyParams = DEFAULT_ENERGY_PARAMS,
                planner_grid: PlannerGrid = PlannerGrid()):
    """Controller factory; raises PlanInfeasibleError if the graph method
    cannot find a green crossing."""
    if method == "idm":
        return IdmDriver(dt=scenario.dt)
    if method == "graph":
        graph = build_graph(scenario, grid=planner_grid,
                            energy_params=energy_params)
        trajectory = plan(graph, (0.0, 0.0, scenario.entry_speed))
        return GraphDriver(trajectory, dt=scenario.dt)
    if method == "hrl":
        if net is None:
            raise ValueError("the hrl method needs a network (checkpoint)")
        return HrlDriver(net, epsilon=0.0, dt=scenario.dt)
    raise ValueError(f"unknown method {method!r}")


def run_method_episode(method: str, scenario: ScenarioConfig, c: int, s: int,
                       net: DuelingNetwork | None = None,
                       energy_params: EnergyParams = DEFAULT_ENERGY_PARAMS,
                       weights: RewardWeights = DEFAULT_WEIGHTS,
                       collect_log: bool = False
                       ) -> tuple[MetricsRow, TrajectoryLog | None]:
    try:
        driver = make_driver(method, scenario, net, energy_params)
    except PlanInfeasibleError:
        row = MetricsRow(method, c, s, scenario.seed, math.nan, math.nan,
                         0, 0, "infeasible")
        return row, None
    result = run_episode(driver, scenario, energy_params, weights,
                         collect_log=collect_log)
    row = MetricsRow(
        method, c, s, scenario.seed,
        result.travel_time, result.energy, result.lane_changes,
        1 if result.status == "collision" else 0, result.status)
    return row, result.log


def default_network(seed: int = 0) -> DuelingNetwork:
    return DuelingNetwork(N_STACK * OBS_DIM, seed=seed)


def grid_eval(spec: GridSpec = GridSpec(),
              net: DuelingNetwork | None = None,
              energy_params: EnergyParams = DEFAULT_ENERGY_PARAMS,
              weights: RewardWeights = DEFAULT_WEIGHTS,
              collect_logs: bool = False,
              progress=None):
    """Run the whole grid; returns (rows, logs) with rows fully sorted.
    `logs` maps (method, C, S, seed) to the trajectory log when collected."""
    if "hrl" in spec.methods and net is None:
        net = default_network()
    rows: list[MetricsRow] = []
    logs: dict[tuple, TrajectoryLog] = {}
    for method in spec.methods:
        for c, s in spec.cells():
            for seed in spec.seeds:
                scenario = spec.scenario(c, s, seed)
                row, log = run_method_episode(
                    method, scenario, c, s, net, energy_params, weights,
                    collect_log=collect_logs)
                rows.append(row)
                if log is not None:
                    logs[(method, c, s, seed)] = log
                if progress is not None:
                    progress(row)
    rows.sort(key=MetricsRow.sort_key)
    return rows, logs


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

@dataclass
class CellSummary:
    method: str
    c: int
    s: int
    n: int
    travel_time_mean: float
    travel_time_std: float
    energy_mean: float
    energy_std: float


def cell_summaries(rows: list[MetricsRow]) -> list[CellSummary]:
    """Per-cell seed means and standard deviations over finite-metric rows."""
    groups: dict[tuple, list[MetricsRow]] = {}
    for r in rows:
        groups.setdefault((r.method, r.c, r.s), []).append(r)
    out = []
    for (method, c, s), rs in sorted(groups.items()):
        tt = np.array([r.travel_time for r in rs if math.isfinite(r.travel_time)])
        en = np.array([r.energy for r in rs if math.isfinite(r.energy)])
        if len(tt) == 0:
            out.append(CellSummary(method, c, s, 0, math.nan, math.nan,
                                   math.nan, math.nan))
            continue
        out.append(CellSummary(method, c, s, len(tt),
                               float(tt.mean()), float(tt.std()),
                               float(en.mean()), float(en.std())))
    return out


def improvement(idm_value: float, method_value: float) -> float:
    """Percentage gain over the baseline: positive means the method used
    less than IDM."""
    return 100.0 * (idm_value - method_value) / idm_value


@dataclass
class ImprovementRow:
    method: str
    c: int
    s: int
    energy_imp_pct: float
    time_imp_pct: float


def improvement_table(summaries: list[CellSummary]) -> list[ImprovementRow]:
    base = {(x.c, x.s): x for x in summaries if x.method == "idm"}
    out = []
    for x in summaries:
        if x.method == "idm":
            continue
        b = base.get((x.c, x.s))
        if b is None or b.n == 0 or x.n == 0:
            out.append(ImprovementRow(x.method, x.c, x.s, math.nan, math.nan))
            continue
        out.append(ImprovementRow(
            x.method, x.c, x.s,
            improvement(b.energy_mean, x.energy_mean),
            improvement(b.travel_time_mean, x.travel_time_mean)))
    return out


def per_entry_time_summary(imps: list[ImprovementRow]):
    """Average improvement over entry speeds for each (method, C)."""
    groups: dict[tuple, list[ImprovementRow]] = {}
    for r in imps:
        groups.setdefault((r.method, r.c), []).append(r)
    out = {}
    for key, rs in sorted(groups.items()):
        e = [r.energy_imp_pct for r in rs if math.isfinite(r.energy_imp_pct)]
        t = [r.time_imp_pct for r in rs if math.isfinite(r.time_imp_pct)]
        out[key] = (float(np.mean(e)) if e else math.nan,
                    float(np.mean(t)) if t else math.nan)
    return out


def heatmap_matrix(imps: list[ImprovementRow], method: str, metric: str,
                   entry_times=ENTRY_TIMES, entry_speeds=ENTRY_SPEEDS_KPH
                   ) -> np.ndarray:
    """Improvement matrix with one row per entry time C and one column per
    entry speed S."""
    mat = np.full((len(entry_times), len(entry_speeds)), np.nan)
    attr = "energy_imp_pct" if metric == "energy" else "time_imp_pct"
    for r in imps:
        if r.method != method:
            continue
        i = entry_times.index(r.c)
        j = entry_speeds.index(r.s)
        mat[i, j] = getattr(r, attr)
    return mat


# ---------------------------------------------------------------------------
# CSV emission / round-trip
# ---------------------------------------------------------------------------

def metrics_to_csv(rows: list[MetricsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_COLUMNS)
    for r in rows:
        writer.writerow([r.method, r.c, r.s, r.seed,
                         f"{r.travel_time:.6f}", f"{r.energy:.6f}",
                         r.lane_changes, r.collisions, r.status])
    return buf.getvalue()


def metrics_from_csv(text: str) -> list[MetricsRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != METRICS_COLUMNS:
        raise ValueError("unexpected metrics header")
    return [MetricsRow(m, int(c), int(s), int(seed), float(tt), float(en),
                       int(lc), int(col), status)
            for m, c, s, seed, tt, en, lc, col, status in reader]


def improvements_to_csv(imps: list[ImprovementRow],
                        per_c: dict | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "C", "S", "energy_imp_pct", "time_imp_pct"])
    for r in imps:
        writer.writerow([r.method, r.c, r.s,
                         f"{r.energy_imp_pct:.6f}", f"{r.time_imp_pct:.6f}"])
    if per_c:
        for (method, c), (e, t) in sorted(per_c.items()):
            writer.writerow([method, c, "avg", f"{e:.6f}", f"{t:.6f}"])
    return buf.getvalue()


def summaries_to_csv(summaries: list[CellSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "C", "S", "n", "travel_time_mean",
                     "travel_time_std", "energy_mean", "energy_std"])
    for x in summaries:
        writer.writerow([x.method, x.c, x.s, x.n,
                         f"{x.travel_time_mean:.6f}", f"{x.travel_time_std:.6f}",
                         f"{x.energy_mean:.6f}", f"{x.energy_std:.6f}"])
    return buf.getvalue()
