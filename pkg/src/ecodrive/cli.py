"""Command-line entry point: train, single-episode eval, grid evaluation,
and plot-data emission."""

from __future__ import annotations

import argparse
import dataclasses
import os
import re
import sys

from .config import AppConfig, load_config
from .episode import TrajectoryLog
from .harness import (
    GridSpec,
    MetricsRow,
    cell_summaries,
    grid_eval,
    improvement_table,
    improvements_to_csv,
    metrics_to_csv,
    per_entry_time_summary,
    run_method_episode,
    summaries_to_csv,
)
from .plots import emit_plot_data
from .rl.training import load_checkpoint, save_checkpoint, train


def _parse_cell(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"C(\d+):S(\d+)", text)
    if not m:
        raise argparse.ArgumentTypeError("cell must look like C30:S20")
    return int(m.group(1)), int(m.group(2))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecodrive",
        description="Eco-driving simulation at a signalized intersection")
    parser.add_argument("--config", default=None, help="INI config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="out")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the RL agent")
    p_train.add_argument("--episodes", type=int, default=None,
                         help="episode cap (default: run to total steps)")
    p_train.add_argument("--checkpoint", default=None,
                         help="output checkpoint path (.npz)")

    p_eval = sub.add_parser("eval", help="run one scenario cell")
    p_eval.add_argument("--method", choices=("idm", "graph", "hrl"),
                        required=True)
    p_eval.add_argument("--cell", type=_parse_cell, default=(30, 20),
                        help="entry cell, e.g. C30:S20")
    p_eval.add_argument("--checkpoint", default=None,
                        help="trained network for the hrl method")

    p_grid = sub.add_parser("grid", help="run the full evaluation grid")
    p_grid.add_argument("--checkpoint", default=None)
    p_grid.add_argument("--methods", default=None,
                        help="comma-separated subset of idm,graph,hrl")

    p_plot = sub.add_parser("plot-data", help="emit series and heat-map data")
    p_plot.add_argument("--checkpoint", default=None)
    p_plot.add_argument("--cell", type=_parse_cell, default=(30, 20))
    return parser


def _load_net(path: str | None, seed: int):
    if path is None:
        from .harness import default_network
        return default_network(seed)
    net, _ = load_checkpoint(path)
    return net


def _scenario_for_cell(cfg: AppConfig, cell, seed: int):
    c, s = cell
    return dataclasses.replace(cfg.scenario, entry_offset=float(c),
                               entry_speed=s / 3.6, seed=seed)


def cmd_train(args, cfg: AppConfig) -> int:
    train_cfg = dataclasses.replace(cfg.train, seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    curve_path = os.path.join(args.out_dir, "training_curve.csv")

    def factory(episode: int):
        return dataclasses.replace(cfg.scenario, seed=args.seed + episode)

    def progress(record):
        print(f"episode {record.episode}: steps={record.steps} "
              f"avg_speed={record.avg_speed:.2f} return={record.ret:.2f}")

    result = train(train_cfg, factory, cfg.energy, cfg.reward,
                   max_episodes=args.episodes, curve_path=curve_path,
                   progress=progress)
    ckpt = args.checkpoint or os.path.join(args.out_dir, "checkpoint.npz")
    save_checkpoint(ckpt, result.net, train_cfg)
    print(f"trained {result.env_steps} steps over {len(result.records)} "
          f"episodes; checkpoint at {ckpt}, curve at {curve_path}")
    return 0


def cmd_eval(args, cfg: AppConfig) -> int:
    c, s = args.cell
    scenario = _scenario_for_cell(cfg, args.cell, args.seed)
    net = _load_net(args.checkpoint, args.seed) if args.method == "hrl" else None
    row, log = run_method_episode(args.method, scenario, c, s, net,
                                  cfg.energy, cfg.reward, collect_log=True)
    os.makedirs(args.out_dir, exist_ok=True)
    log_path = os.path.join(args.out_dir,
                            f"trajectory_{args.method}_C{c}_S{s}.csv")
    if log is not None:
        with open(log_path, "w") as fh:
            fh.write(log.to_csv())
    print(f"{args.method} C{c}:S{s} seed {args.seed}: status={row.status} "
          f"time={row.travel_time:.1f}s energy={row.energy:.0f}J "
          f"lane_changes={row.lane_changes}")
    if log is not None:
        print(f"trajectory log: {log_path}")
    return 0 if row.collisions == 0 else 1


def cmd_grid(args, cfg: AppConfig) -> int:
    spec = cfg.grid
    if args.methods:
        spec = dataclasses.replace(
            spec, methods=tuple(args.methods.split(",")))
    net = _load_net(args.checkpoint, args.seed) if "hrl" in spec.methods else None
    rows, _ = grid_eval(spec, net, cfg.energy, cfg.reward,
                        progress=lambda r: print(
                            f"{r.method} C{r.c}:S{r.s} seed {r.seed}: {r.status}"))
    os.makedirs(args.out_dir, exist_ok=True)
    metrics_path = os.path.join(args.out_dir, "grid_metrics.csv")
    with open(metrics_path, "w") as fh:
        fh.write(metrics_to_csv(rows))
    summaries = cell_summaries(rows)
    with open(os.path.join(args.out_dir, "grid_summaries.csv"), "w") as fh:
        fh.write(summaries_to_csv(summaries))
    imps = improvement_table(summaries)
    per_c = per_entry_time_summary(imps)
    with open(os.path.join(args.out_dir, "grid_improvements.csv"), "w") as fh:
        fh.write(improvements_to_csv(imps, per_c))
    collisions = sum(r.collisions for r in rows)
    print(f"{len(rows)} rows -> {metrics_path}; collisions: {collisions}")
    return 0 if collisions == 0 else 1


def cmd_plot_data(args, cfg: AppConfig) -> int:
    c, s = args.cell
    net = _load_net(args.checkpoint, args.seed)
    logs: dict[tuple, TrajectoryLog] = {}
    rows: list[MetricsRow] = []
    for method in cfg.grid.methods:
        scenario = _scenario_for_cell(cfg, args.cell, args.seed)
        row, log = run_method_episode(method, scenario, c, s, net,
                                      cfg.energy, cfg.reward, collect_log=True)
        rows.append(row)
        if log is not None:
            logs[(method, c, s, args.seed)] = log
    spec = dataclasses.replace(cfg.grid, seeds=(args.seed,))
    grid_rows, _ = grid_eval(spec, net, cfg.energy, cfg.reward)
    rows += grid_rows
    imps = improvement_table(cell_summaries(grid_rows))
    written = emit_plot_data(args.out_dir, logs, imps)
    print(f"wrote {len(written)} files to {args.out_dir}")
    collisions = sum(r.collisions for r in rows)
    return 0 if collisions == 0 else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config)
    handlers = {"train": cmd_train, "eval": cmd_eval,
                "grid": cmd_grid, "plot-data": cmd_plot_data}
    return handlers[args.command](args, cfg)


if __name__ == "__main__":
    sys.exit(main())
