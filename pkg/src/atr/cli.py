"""Command-line entry points.

Subcommands:

* ``atr train --config F --out DIR [--seed N]`` — run training; writes
  ``log.csv`` (one row per iteration), ``checkpoint.bin`` and
  ``curriculum.csv`` into DIR.
* ``atr eval-grid --ckpt F [--subsample K] [--workers N]`` — tracking
  errors over the command grid; writes the grid CSV and prints the
  command area at the default thresholds.
* ``atr eval-estimators --ckpt F`` — estimation accuracy table over a
  subsampled grid of held commands.
* ``atr rollout --ckpt F --commands F`` — drive a timed command
  sequence (CSV ``t,c_v,c_w``) and log the tracking trace.
* ``atr cot --ckpt F --path F --speed V`` — follow waypoints (CSV
  ``x,y``) with pure pursuit and report the cost of transport.
* ``atr plot --in F --kind {heatmap,series,area,grid} --out F`` —
  render a produced CSV to a pixmap or SVG.

All CSV formats are documented in the modules that write them.
"""

import argparse
import os
import sys
import time

import numpy as np

from . import evaluation, plotting
from .config import build, default_config, load_config
from .curriculum import CommandGrid
from .env import EnvConfig
from .evaluation import (GRID_CSV_HEADER, command_area, command_area_curve,
                         cot, eval_estimators, evaluation_env, grid_cells,
                         load_policy, pursuit_rollout, read_grid_csv,
                         rollout_commands, run_eval_grid, write_grid_csv,
                         write_rollout_csv)
from .curriculum import index_of_command
from .mathutils import make_stream
from .training import LOG_COLUMNS, Trainer


def _fail(message):
    print(f"error: {message}", file=sys.stderr)
    return 2


def _progress(label):
    start = time.time()

    def report(done, total):
        if done == total or done % 50 == 0:
            elapsed = time.time() - start
            print(f"\r{label}: {done}/{total} ({elapsed:.0f}s)",
                  end="" if done < total else "\n", file=sys.stderr)
    return report


def _read_csv_columns(path):
    """(header list, list of float rows) from a comma-separated file."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    return header, rows


def cmd_train(args):
    config = load_config(args.config) if args.config else default_config()
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, "log.csv")
    checkpoint_path = os.path.join(args.out, "checkpoint.bin")
    settings, env_config, ppo_config, weights = build(
        config, seed=args.seed, log_path=log_path,
        checkpoint_path=checkpoint_path)
    trainer = Trainer(settings, env_config, ppo_config, weights)
    print(f"training {settings.iterations} iterations, batch "
          f"{settings.batch}, profile {settings.profile}", file=sys.stderr)
    reward_col = LOG_COLUMNS.index("episode_reward_mean")
    support_col = LOG_COLUMNS.index("curriculum_support")

    def progress(it, row):
        print(f"iter {it}/{settings.iterations} reward {row[reward_col]:.2f} "
              f"support {row[support_col]:.3f}", file=sys.stderr)

    trainer.train(progress=progress)
    trainer.grid.to_csv(os.path.join(args.out, "curriculum.csv"))
    print(f"wrote {log_path}, {checkpoint_path}, "
          f"{os.path.join(args.out, 'curriculum.csv')}")
    return 0


def cmd_eval_grid(args):
    rows = run_eval_grid(args.ckpt, subsample=args.subsample,
                         workers=args.workers, dr_mode=args.dr,
                         seed=args.seed, hold_seconds=args.hold,
                         transient_seconds=args.transient,
                         progress=_progress("cells"))
    write_grid_csv(rows, args.out)
    area = command_area(rows, args.threshold_v, args.threshold_w)
    print(f"wrote {args.out} ({len(rows)} cells)")
    print(f"command area at ({args.threshold_v} m/s, {args.threshold_w} "
          f"rad/s): {area:.4f}")
    return 0


def cmd_eval_estimators(args):
    bundle, env_kwargs = load_policy(args.ckpt)
    env = evaluation_env(env_kwargs, dr_mode=args.dr, seed=args.seed)
    draw = make_stream(args.seed, 999)
    commands = [(draw.uniform(-args.max_speed, args.max_speed),
                 draw.uniform(-args.max_yaw, args.max_yaw))
                for _ in range(args.commands)]
    stats = eval_estimators(bundle, env, commands, hold_seconds=args.hold,
                            seed=args.seed)
    mean = stats["extrinsic_abs_mean"]
    std = stats["extrinsic_abs_std"]
    names = ["contact fl", "contact fr", "contact rl", "contact rr",
             "robot vel x", "robot vel y", "robot vel z",
             "platform vel x", "platform vel y", "platform vel z",
             "platform angvel x", "platform angvel y", "platform angvel z",
             "rel position x", "rel position y", "rel yaw"]
    print(f"latent estimate error (L2): {stats['latent_error_mean']:.4f} "
          f"+/- {stats['latent_error_std']:.4f}  "
          f"({stats['samples']} samples)")
    print(f"{'extrinsic component':<22}{'mean |err|':>12}{'std':>12}")
    for name, m, s in zip(names, mean, std):
        print(f"{name:<22}{m:>12.4f}{s:>12.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("component,abs_error_mean,abs_error_std\n")
            fh.write(f"latent_l2,{stats['latent_error_mean']:.6g},"
                     f"{stats['latent_error_std']:.6g}\n")
            for name, m, s in zip(names, mean, std):
                fh.write(f"{name.replace(' ', '_')},{m:.6g},{s:.6g}\n")
        print(f"wrote {args.out}")
    return 0


def cmd_rollout(args):
    header, rows = _read_csv_columns(args.commands)
    if header != ["t", "c_v", "c_w"]:
        return _fail(f"{args.commands}: expected header 't,c_v,c_w', got "
                     f"{','.join(header)!r}")
    sequence = [(r[0], r[1], r[2]) for r in rows]
    bundle, env_kwargs = load_policy(args.ckpt)
    env = evaluation_env(env_kwargs, dr_mode=args.dr, seed=args.seed)
    out_rows = rollout_commands(bundle, env, sequence)
    write_rollout_csv(out_rows, args.out)
    print(f"wrote {args.out} ({len(out_rows)} steps)")
    return 0


def cmd_cot(args):
    header, rows = _read_csv_columns(args.path)
    if header != ["x", "y"]:
        return _fail(f"{args.path}: expected header 'x,y', got "
                     f"{','.join(header)!r}")
    if len(rows) < 2:
        return _fail(f"{args.path}: need at least two waypoints")
    bundle, env_kwargs = load_policy(args.ckpt)
    env = evaluation_env(env_kwargs, dr_mode=args.dr, seed=args.seed)
    trace, trajectory = pursuit_rollout(
        bundle, env, [(r[0], r[1]) for r in rows],
        cruise_speed=args.speed, lookahead=args.lookahead,
        max_seconds=args.max_seconds)
    if args.out:
        write_rollout_csv(trace, args.out)
        print(f"wrote {args.out} ({len(trace)} steps)")
    mass = env.nominal_rider.mass
    speed = trajectory["average_speed"]
    print(f"trajectory: {os.path.basename(args.path)}  steps {len(trace)}  "
          f"goal reached: {trajectory['reached_goal']}")
    if speed <= evaluation.MIN_TRANSPORT_SPEED:
        return _fail(f"average speed {speed:.3f} m/s too low for a "
                     "transport metric")
    value = cot(trajectory["joint_torques"], trajectory["joint_velocities"],
                mass, speed)
    power = float(np.maximum(trajectory["joint_torques"]
                             * trajectory["joint_velocities"], 0.0)
                  .sum(axis=1).mean())
    print(f"mean positive power: {power:.3f} W  mass: {mass:.2f} kg  "
          f"average speed: {speed:.3f} m/s")
    print(f"cost of transport: {value:.4f}")
    return 0


def cmd_plot(args):
    if args.kind == "heatmap":
        rows = read_grid_csv(args.input)
        plotting.write_heatmap_ppm(rows, args.out, field=args.field,
                                   cap=args.cap, scale=args.scale)
    elif args.kind == "area":
        rows = read_grid_csv(args.input)
        thresholds = np.linspace(0.1, 5.0, 50)
        curve = command_area_curve(rows, thresholds)
        plotting.write_area_curve_svg(curve, args.out)
    elif args.kind == "grid":
        header, rows = _read_csv_columns(args.input)
        if header != ["forward_command", "yaw_command", "weight"]:
            return _fail(f"{args.input}: expected header "
                         f"'forward_command,yaw_command,weight', got "
                         f"{','.join(header)!r}")
        grid = CommandGrid()
        for c_v, c_w, w in rows:
            i, j = index_of_command(c_v, c_w)
            grid.weights[i, j] = w
        plotting.write_weights_ppm(grid.weights, args.out, scale=args.scale)
    elif args.kind == "series":
        header, rows = _read_csv_columns(args.input)
        if not rows:
            plotting.write_series_svg([], args.out, xlabel=header[0])
            print(f"wrote {args.out} (empty)")
            return 0
        columns = (args.columns.split(",") if args.columns
                   else header[1:])
        missing = [c for c in columns if c not in header]
        if missing:
            return _fail(f"{args.input}: no column(s) {missing}; file has "
                         f"{header}")
        xs = [r[0] for r in rows]
        series = [(name, xs, [r[header.index(name)] for r in rows])
                  for name in columns]
        plotting.write_series_svg(series, args.out, xlabel=header[0])
    else:
        return _fail(f"unknown plot kind {args.kind!r}")
    print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="atr",
        description="quadruped-on-transporter simulation and learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a training session")
    p.add_argument("--config", help="YAML config (defaults used if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval-grid", help="tracking errors over the grid")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", default="eval_grid.csv")
    p.add_argument("--subsample", type=int, default=1,
                   help="evaluate every K-th cell along both axes")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dr", choices=("off", "train", "test"), default="test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hold", type=float, default=10.0)
    p.add_argument("--transient", type=float, default=2.0)
    p.add_argument("--threshold-v", type=float, default=1.0)
    p.add_argument("--threshold-w", type=float, default=0.3)
    p.set_defaults(fn=cmd_eval_grid)

    p = sub.add_parser("eval-estimators", help="estimation accuracy table")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", default="")
    p.add_argument("--commands", type=int, default=24,
                   help="number of held commands")
    p.add_argument("--max-speed", type=float, default=2.0)
    p.add_argument("--max-yaw", type=float, default=1.0)
    p.add_argument("--hold", type=float, default=5.0)
    p.add_argument("--dr", choices=("off", "train", "test"), default="test")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_eval_estimators)

    p = sub.add_parser("rollout", help="run a timed command sequence")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--commands", required=True,
                   help="CSV with header t,c_v,c_w")
    p.add_argument("--out", default="rollout.csv")
    p.add_argument("--dr", choices=("off", "train", "test"), default="off")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_rollout)

    p = sub.add_parser("cot", help="cost of transport along a waypoint path")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--path", required=True, help="CSV with header x,y")
    p.add_argument("--speed", type=float, required=True,
                   help="cruise speed (m/s)")
    p.add_argument("--lookahead", type=float, default=1.0)
    p.add_argument("--max-seconds", type=float, default=60.0)
    p.add_argument("--out", default="")
    p.add_argument("--dr", choices=("off", "train", "test"), default="off")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_cot)

    p = sub.add_parser("plot", help="render a CSV artifact to an image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--kind", choices=("heatmap", "series", "area", "grid"),
                   required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--field", choices=("forward", "yaw"), default="forward")
    p.add_argument("--cap", type=float, default=None)
    p.add_argument("--scale", type=int, default=1)
    p.add_argument("--columns", default="",
                   help="comma-separated y columns for series plots")
    p.set_defaults(fn=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
