"""Evaluation protocols and their file formats.

Artifacts:

* eval_grid: hold each command on the 301 x 41 grid for 10 s, drop a
  2 s transient, record RMS forward-speed and yaw-rate errors plus an
  episode-completed flag.  CSV header:
  ``forward_command,yaw_command,rms_forward_error,rms_yaw_error,completed``
  (one row per evaluated cell; the full grid gives 12341 rows).
* command_area: fraction of evaluated cells whose both errors sit under
  thresholds and which completed the hold.
* cot: cost of transport, time-mean of summed positive joint power over
  m*g*v_avg; rejected below 0.1 m/s.
* eval_estimators: deployment rollouts scoring the latent estimate
  (L2 norm) and each extrinsic component (L1).
* rollout_commands: timed command sequence; CSV header:
  ``t,c_v,c_w,v_actual,w_actual,v_est,w_est`` where the estimates are
  the platform linear/angular velocity components of the extrinsic
  estimate (body-frame x and z).
* PurePursuit: waypoint follower emitting (c_v, c_w) from the current
  planar pose; curvature command 2*v*sin(bearing)/lookahead.

Deployment mode everywhere: the policy consumes estimator outputs, not
privileged state.  Scheduled pushes are disabled during evaluation so
the scores measure tracking, not push recovery.
"""

import math
import multiprocessing

import numpy as np
import yaml

from .checkpoint import load_arrays
from .curriculum import (N_SPEED, N_YAW, index_of_command, speed_of_index,
                         yaw_of_index)
from .env import EnvConfig, RidingEnv
from .mathutils import make_stream, wrap_angle
from .networks import PolicyBundle

GRID_CSV_HEADER = "forward_command,yaw_command,rms_forward_error,rms_yaw_error,completed"
ROLLOUT_CSV_HEADER = "t,c_v,c_w,v_actual,w_actual,v_est,w_est"
AREA_CSV_HEADER = "threshold_v,threshold_w,area"
MIN_TRANSPORT_SPEED = 0.1

EXT_PLATFORM_VEL = slice(7, 10)   # extrinsic components: platform velocity
EXT_PLATFORM_ANGVEL = slice(10, 13)
EXT_REL_POSITION = slice(13, 15)


def load_policy(path):
    """(PolicyBundle, env config dict) from a training checkpoint."""
    arrays = load_arrays(path)
    meta = yaml.safe_load(arrays["meta"].decode("utf-8"))
    bundle = PolicyBundle(seed=0, profile=meta["profile"],
                          estimator_variant=meta["estimator_variant"])
    for name, p in bundle.named_parameters():
        p.data = arrays[f"param.{name}"].reshape(p.data.shape).copy()
    return bundle, meta["env"]


def evaluation_env(env_kwargs, dr_mode=None, seed=None):
    """Environment for scoring: pushes off, overridable DR mode/seed."""
    kwargs = dict(env_kwargs)
    kwargs["perturb_body_max"] = 0.0
    kwargs["perturb_deck_max"] = 0.0
    if dr_mode is not None:
        kwargs["dr_mode"] = dr_mode
    if seed is not None:
        kwargs["seed"] = seed
    return RidingEnv(EnvConfig(**kwargs))


def deployment_policy(bundle):
    """action = actor(obs | z_hat | x_hat) from the observation history."""
    def act(env):
        z_hat, x_hat = bundle.estimate_np(env.history[None])
        mean = bundle.action_mean_np(env.obs[None], z_hat, x_hat)
        return mean[0], z_hat[0], x_hat[0]
    return act


def hold_command_rollout(bundle, env, command, hold_seconds=10.0):
    """Reset, pin `command`, run the deployment policy for the hold.

    Returns per-control-step forward speeds, yaw rates, and a completed
    flag (False when the episode terminated before the hold ended)."""
    steps = int(round(hold_seconds / env.config.control_dt))
    env.set_command(np.asarray(command, dtype=float))
    env.reset()
    act = deployment_policy(bundle)
    speeds = np.zeros(steps)
    yaw_rates = np.zeros(steps)
    completed = True
    for t in range(steps):
        action, _, _ = act(env)
        result = env.step(action)
        speeds[t] = env.platform_forward_speed
        yaw_rates[t] = env.platform_yaw_rate
        if result.done and result.termination != "timeout":
            speeds = speeds[:t + 1]
            yaw_rates = yaw_rates[:t + 1]
            completed = False
            break
        if result.done and t + 1 < steps:
            env.set_command(np.asarray(command, dtype=float))
            env.reset()
    return speeds, yaw_rates, completed


def grid_cells(subsample=1):
    """(i, j) index pairs of the evaluated cells at the given stride."""
    return [(i, j) for i in range(0, N_SPEED, subsample)
            for j in range(0, N_YAW, subsample)]


def _summarize_cell(command, speeds, yaw_rates, completed, skip):
    """One grid row from a recorded hold; drop the transient first.

    A cell that fell before producing any post-transient sample reports
    the stationary-deck error |command|."""
    speeds = np.asarray(speeds, dtype=float)[skip:]
    yaw_rates = np.asarray(yaw_rates, dtype=float)[skip:]
    if speeds.size == 0:
        return (command[0], command[1], abs(command[0]), abs(command[1]), False)
    rms_v = float(np.sqrt(np.mean((speeds - command[0]) ** 2)))
    rms_w = float(np.sqrt(np.mean((yaw_rates - command[1]) ** 2)))
    return (command[0], command[1], rms_v, rms_w, bool(completed))


def eval_grid(rollout_fn, subsample=1, hold_seconds=10.0, transient_seconds=2.0,
              control_dt=0.02, progress=None):
    """Tracking-error grid over injectable rollouts.

    rollout_fn(command) -> (forward speeds, yaw rates, completed); the
    RMS errors are computed here after dropping the transient.  Returns
    a list of rows (c_v, c_w, rms_v, rms_w, completed flag).
    """
    skip = int(round(transient_seconds / control_dt))
    rows = []
    cells = grid_cells(subsample)
    for n, (i, j) in enumerate(cells):
        command = (speed_of_index(i), yaw_of_index(j))
        speeds, yaw_rates, completed = rollout_fn(np.asarray(command))
        rows.append(_summarize_cell(command, speeds, yaw_rates, completed, skip))
        if progress is not None:
            progress(n + 1, len(cells))
    return rows


# -- checkpoint-backed grid runs -------------------------------------
#
# Each cell gets its own random stream keyed by its flat grid index, so
# the output is identical whatever the evaluation order or worker count.

_WORKER = {}


def _cell_rollout(bundle, env, seed, cell, hold_seconds):
    i, j = cell
    env.rng = make_stream(seed, i * N_YAW + j)
    command = (speed_of_index(i), yaw_of_index(j))
    return hold_command_rollout(bundle, env, command, hold_seconds)


def _grid_worker_init(checkpoint_path, dr_mode, seed, hold_seconds):
    bundle, env_kwargs = load_policy(checkpoint_path)
    _WORKER["bundle"] = bundle
    _WORKER["env"] = evaluation_env(env_kwargs, dr_mode=dr_mode, seed=seed)
    _WORKER["seed"] = seed
    _WORKER["hold_seconds"] = hold_seconds


def _grid_worker_cell(cell):
    return _cell_rollout(_WORKER["bundle"], _WORKER["env"], _WORKER["seed"],
                         cell, _WORKER["hold_seconds"])


def run_eval_grid(checkpoint_path, subsample=1, workers=1, dr_mode="test",
                  seed=0, hold_seconds=10.0, transient_seconds=2.0,
                  progress=None):
    """Evaluate a checkpoint over the command grid; returns CSV rows."""
    cells = grid_cells(subsample)
    bundle, env_kwargs = load_policy(checkpoint_path)
    env = evaluation_env(env_kwargs, dr_mode=dr_mode, seed=seed)
    if workers > 1:
        with multiprocessing.Pool(
                workers, _grid_worker_init,
                (checkpoint_path, dr_mode, seed, hold_seconds)) as pool:
            results = []
            for n, r in enumerate(pool.imap(_grid_worker_cell, cells,
                                            chunksize=4)):
                results.append(r)
                if progress is not None:
                    progress(n + 1, len(cells))
    else:
        results = []
        for n, cell in enumerate(cells):
            results.append(_cell_rollout(bundle, env, seed, cell, hold_seconds))
            if progress is not None:
                progress(n + 1, len(cells))
    skip = int(round(transient_seconds / env.config.control_dt))
    rows = []
    for (i, j), (speeds, yaw_rates, completed) in zip(cells, results):
        command = (speed_of_index(i), yaw_of_index(j))
        rows.append(_summarize_cell(command, speeds, yaw_rates, completed, skip))
    return rows


def write_grid_csv(rows, path):
    with open(path, "w") as fh:
        fh.write(GRID_CSV_HEADER + "\n")
        for c_v, c_w, rms_v, rms_w, completed in rows:
            fh.write(f"{c_v:.6g},{c_w:.6g},{rms_v:.6g},{rms_w:.6g},"
                     f"{1 if completed else 0}\n")


def read_grid_csv(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != GRID_CSV_HEADER:
            raise ValueError(f"{path}: expected header {GRID_CSV_HEADER!r}, "
                             f"got {header!r}")
        for line in fh:
            c_v, c_w, rms_v, rms_w, completed = line.strip().split(",")
            rows.append((float(c_v), float(c_w), float(rms_v), float(rms_w),
                         completed == "1"))
    return rows


def command_area(rows, threshold_v=1.0, threshold_w=0.3):
    """Fraction of evaluated cells tracked within both thresholds."""
    if not rows:
        return 0.0
    good = sum(1 for _, _, rms_v, rms_w, completed in rows
               if completed and rms_v <= threshold_v and rms_w <= threshold_w)
    return good / len(rows)


def command_area_curve(rows, thresholds_v, threshold_w_ratio=0.3):
    """(threshold_v, threshold_w, area) triples over a threshold sweep."""
    out = []
    for tv in thresholds_v:
        tw = tv * threshold_w_ratio
        out.append((float(tv), float(tw), command_area(rows, tv, tw)))
    return out


def cot(joint_torques, joint_velocities, mass, average_speed,
        gravity=9.81):
    """Cost of transport of one trajectory.

    joint_torques/joint_velocities: (steps, 12).  The numerator is the
    time-mean of the summed positive joint powers."""
    if average_speed <= MIN_TRANSPORT_SPEED:
        raise ValueError(f"average speed {average_speed:.3f} m/s too low "
                         f"for a transport metric (need > {MIN_TRANSPORT_SPEED})")
    torques = np.asarray(joint_torques, dtype=float)
    rates = np.asarray(joint_velocities, dtype=float)
    power = np.maximum(torques * rates, 0.0).sum(axis=1)
    return float(np.mean(power) / (mass * gravity * average_speed))


def eval_estimators(bundle, env, commands, hold_seconds=5.0, estimate_fn=None,
                    seed=None):
    """Estimation accuracy over deployment rollouts at given commands.

    estimate_fn(env) -> (z_hat, x_hat) lets tests inject a passthrough
    stub (ground truth in, zero error out); the default runs the
    checkpoint's estimators on the observation history.  With `seed`
    each command gets a random stream keyed by its grid cell, making
    the result independent of command order.

    Returns a dict with the latent-error norm mean/std and the
    per-component absolute extrinsic errors (16 columns).
    """
    if estimate_fn is None:
        def estimate_fn(env):
            z_hat, x_hat = bundle.estimate_np(env.history[None])
            return z_hat[0], x_hat[0]
    latent_errors = []
    ext_errors = []
    steps = int(round(hold_seconds / env.config.control_dt))
    for command in commands:
        if seed is not None:
            i, j = index_of_command(command[0], command[1])
            env.rng = make_stream(seed, i * N_YAW + j)
        env.set_command(np.asarray(command, dtype=float))
        env.reset()
        for _ in range(steps):
            z_hat, x_hat = estimate_fn(env)
            action = bundle.action_mean_np(env.obs[None], z_hat[None],
                                           x_hat[None])[0]
            z_true = bundle.latent_np(env.intrinsic[None])[0]
            latent_errors.append(float(np.linalg.norm(z_hat - z_true)))
            ext_errors.append(np.abs(x_hat - env.extrinsic))
            result = env.step(action)
            if result.done:
                break
    ext_errors = np.asarray(ext_errors)
    return {
        "latent_error_mean": float(np.mean(latent_errors)),
        "latent_error_std": float(np.std(latent_errors)),
        "extrinsic_abs_mean": ext_errors.mean(axis=0),
        "extrinsic_abs_std": ext_errors.std(axis=0),
        "samples": len(latent_errors),
    }


def rollout_commands(bundle, env, sequence, extra_seconds=0.0):
    """Drive a timed command sequence; returns rollout CSV rows.

    sequence: list of (start time, c_v, c_w), times strictly increasing
    from 0.  The run lasts until the last start time plus
    `extra_seconds` (default: one command period after the last).
    """
    if not sequence:
        return []
    times = [s[0] for s in sequence]
    if times[0] != 0.0 or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("command times must increase strictly from 0")
    dt = env.config.control_dt
    if extra_seconds <= 0.0:
        extra_seconds = (times[-1] - times[-2]) if len(times) > 1 else 5.0
    total_steps = int(round((times[-1] + extra_seconds) / dt))
    env.set_command(np.array(sequence[0][1:], dtype=float))
    env.reset()
    act = deployment_policy(bundle)
    rows = []
    cursor = 0
    for t in range(total_steps):
        now = t * dt
        while cursor + 1 < len(sequence) and sequence[cursor + 1][0] <= now + 1e-9:
            cursor += 1
            env.set_command(np.array(sequence[cursor][1:], dtype=float))
        action, _, x_hat = act(env)
        result = env.step(action)
        rows.append((now, env.command[0], env.command[1],
                     env.platform_forward_speed, env.platform_yaw_rate,
                     float(x_hat[EXT_PLATFORM_VEL][0]),
                     float(x_hat[EXT_PLATFORM_ANGVEL][2])))
        if result.done and result.termination != "timeout":
            break
        if result.done:
            command = env.command.copy()
            env.set_command(command)
            env.reset()
    return rows


def write_rollout_csv(rows, path):
    with open(path, "w") as fh:
        fh.write(ROLLOUT_CSV_HEADER + "\n")
        for row in rows:
            fh.write(f"{row[0]:.3f}," + ",".join(f"{v:.6g}" for v in row[1:]) + "\n")


class PurePursuit:
    """Geometric waypoint follower producing (c_v, c_w) commands."""

    def __init__(self, waypoints, lookahead=1.0, cruise_speed=1.0,
                 goal_tolerance=0.3):
        self.path = np.asarray(waypoints, dtype=float)
        if self.path.ndim != 2 or self.path.shape[0] < 2 or self.path.shape[1] != 2:
            raise ValueError("need at least two planar waypoints")
        if lookahead <= 0.0:
            raise ValueError("lookahead must be positive")
        self.lookahead = lookahead
        self.cruise_speed = cruise_speed
        self.goal_tolerance = goal_tolerance
        self.finished = False

    def _lookahead_point(self, position):
        """Farthest path point at the lookahead radius; fallback nearest."""
        best = None
        for a, b in zip(self.path[:-1], self.path[1:]):
            d = b - a
            f = a - position
            aa = float(d @ d)
            if aa < 1e-12:
                continue
            bb = 2.0 * float(f @ d)
            cc = float(f @ f) - self.lookahead ** 2
            disc = bb * bb - 4.0 * aa * cc
            if disc < 0.0:
                continue
            for root in ((-bb + math.sqrt(disc)) / (2.0 * aa),):
                if 0.0 <= root <= 1.0:
                    best = a + root * d
        if best is not None:
            return best
        # nearest point on the polyline
        nearest, nearest_d = self.path[0], float("inf")
        for a, b in zip(self.path[:-1], self.path[1:]):
            d = b - a
            aa = float(d @ d)
            s = 0.0 if aa < 1e-12 else float(np.clip((position - a) @ d / aa, 0.0, 1.0))
            p = a + s * d
            dist = float(np.linalg.norm(p - position))
            if dist < nearest_d:
                nearest, nearest_d = p, dist
        return nearest

    def command(self, position, heading):
        """(c_v, c_w) toward the lookahead point; (0, 0) once at goal."""
        position = np.asarray(position, dtype=float)
        if np.linalg.norm(self.path[-1] - position) <= self.goal_tolerance:
            self.finished = True
        if self.finished:
            return 0.0, 0.0
        target = self._lookahead_point(position)
        bearing = wrap_angle(math.atan2(target[1] - position[1],
                                        target[0] - position[0]) - heading)
        yaw_rate = 2.0 * self.cruise_speed * math.sin(bearing) / self.lookahead
        return self.cruise_speed, yaw_rate


def pursuit_rollout(bundle, env, waypoints, cruise_speed=1.0, lookahead=1.0,
                    max_seconds=60.0):
    """Follow waypoints; returns (rows, trajectory dict) for CoT scoring."""
    tracker = PurePursuit(waypoints, lookahead, cruise_speed)
    act = deployment_policy(bundle)
    x, y, yaw = env.platform_planar_pose
    env.set_command(np.asarray(tracker.command((x, y), yaw)))
    env.reset()
    dt = env.config.control_dt
    rows = []
    torques, rates, speeds = [], [], []
    for t in range(int(round(max_seconds / dt))):
        x, y, yaw = env.platform_planar_pose
        env.set_command(np.asarray(tracker.command((x, y), yaw)))
        action, _, x_hat = act(env)
        result = env.step(action)
        rows.append((t * dt, env.command[0], env.command[1],
                     env.platform_forward_speed, env.platform_yaw_rate,
                     float(x_hat[EXT_PLATFORM_VEL][0]),
                     float(x_hat[EXT_PLATFORM_ANGVEL][2])))
        torques.append(env.joint_torques)
        rates.append(env.joint_velocities)
        speeds.append(abs(env.platform_forward_speed))
        if tracker.finished or (result.done and result.termination != "timeout"):
            break
        if result.done:
            command = env.command.copy()
            env.set_command(command)
            env.reset()
    trajectory = {
        "joint_torques": np.asarray(torques),
        "joint_velocities": np.asarray(rates),
        "average_speed": float(np.mean(speeds)) if speeds else 0.0,
        "reached_goal": tracker.finished,
    }
    return rows, trajectory
