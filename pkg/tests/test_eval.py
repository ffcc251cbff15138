"""Evaluation protocols: CoT, tracking grid, estimators, pure pursuit."""

import math

import numpy as np
import pytest

from atr import evaluation as ev
from atr.curriculum import N_SPEED, N_YAW, speed_of_index, yaw_of_index
from atr.env import EnvConfig, RidingEnv
from atr.networks import PolicyBundle
from atr.ppo import TrainConfig
from atr.training import Trainer, TrainSettings

QUIET_ENV = dict(dr_mode="off", obs_noise=False, seed=5,
                 perturb_body_max=0.0, perturb_deck_max=0.0)


class ZeroPolicy:
    """Deployment stub: zero actions, zero estimates."""

    latent_dim = 16

    def estimate_np(self, histories):
        n = histories.shape[0]
        return np.zeros((n, self.latent_dim)), np.zeros((n, 16))

    def action_mean_np(self, obs, latent, extrinsic):
        return np.zeros((np.atleast_2d(obs).shape[0], 12))


# -- cost of transport -------------------------------------------------

def test_cot_is_zero_without_joint_torque():
    torques = np.zeros((50, 12))
    rates = np.ones((50, 12))
    assert ev.cot(torques, rates, mass=11.74, average_speed=1.5) == 0.0


def test_cot_matches_the_constant_power_fixture():
    # one joint at 2 N*m, 5 rad/s: 10 W against 11.74 kg moving 1.5 m/s
    torques = np.zeros((200, 12))
    rates = np.zeros((200, 12))
    torques[:, 3] = 2.0
    rates[:, 3] = 5.0
    value = ev.cot(torques, rates, mass=11.74, average_speed=1.5)
    assert abs(value - 10.0 / (11.74 * 9.81 * 1.5)) < 1e-12
    assert abs(value - 0.05788574627172379) < 1e-6


def test_cot_counts_only_positive_joint_power():
    torques = np.full((10, 12), 2.0)
    rates = np.full((10, 12), -5.0)     # all joints braking
    assert ev.cot(torques, rates, mass=11.74, average_speed=1.5) == 0.0


def test_cot_rejects_trajectories_that_barely_move():
    torques = np.ones((10, 12))
    rates = np.ones((10, 12))
    for speed in (0.0, 0.05, ev.MIN_TRANSPORT_SPEED):
        with pytest.raises(ValueError, match="too low"):
            ev.cot(torques, rates, mass=11.74, average_speed=speed)
    assert ev.cot(torques, rates, mass=11.74, average_speed=0.11) > 0.0


# -- grid summaries ----------------------------------------------------

def test_grid_cells_cover_the_command_grid():
    cells = ev.grid_cells()
    assert len(cells) == N_SPEED * N_YAW == 12341
    assert cells[0] == (0, 0)
    assert cells[-1] == (N_SPEED - 1, N_YAW - 1)
    strided = ev.grid_cells(subsample=30)
    assert len(strided) == 11 * 2
    assert all(i % 30 == 0 and j % 30 == 0 for i, j in strided)


def test_summarize_cell_drops_the_transient():
    speeds = [9.0] * 5 + [1.0] * 10       # wild transient, then on-command
    yaw_rates = [0.0] * 15
    row = ev._summarize_cell((1.0, 0.0), speeds, yaw_rates, True, skip=5)
    assert row == (1.0, 0.0, 0.0, 0.0, True)


def test_summarize_cell_with_no_surviving_samples_reports_the_command():
    row = ev._summarize_cell((-0.7, 0.2), [1.0, 2.0], [0.0, 0.0], False, skip=5)
    assert row == (-0.7, 0.2, 0.7, 0.2, False)


def test_eval_grid_with_a_perfect_tracker_scores_zero_error():
    calls = []

    def rollout(command):
        return (np.full(20, command[0]), np.full(20, command[1]), True)

    progress = []
    rows = ev.eval_grid(rollout, subsample=30, hold_seconds=0.4,
                        transient_seconds=0.1,
                        progress=lambda n, total: progress.append((n, total)))
    assert len(rows) == 22
    assert progress[0] == (1, 22) and progress[-1] == (22, 22)
    for c_v, c_w, rms_v, rms_w, completed in rows:
        assert rms_v == 0.0 and rms_w == 0.0 and completed
    assert ev.command_area(rows) == 1.0


def test_command_area_thresholds_are_inclusive_and_skip_failures():
    rows = [
        (0.0, 0.0, 1.0, 0.3, True),    # exactly at both thresholds: counts
        (0.1, 0.0, 1.0001, 0.0, True),  # over on speed
        (0.2, 0.0, 0.0, 0.0, False),   # perfect but incomplete
        (0.3, 0.0, 0.2, 0.1, True),    # well inside
    ]
    assert ev.command_area(rows, threshold_v=1.0, threshold_w=0.3) == 0.5
    assert ev.command_area([]) == 0.0


def test_command_area_curve_is_monotone_in_the_threshold():
    rng = np.random.default_rng(3)
    rows = [(0.0, 0.0, float(rng.uniform(0, 2)), float(rng.uniform(0, 0.6)),
             bool(rng.random() < 0.8)) for _ in range(200)]
    curve = ev.command_area_curve(rows, np.linspace(0.05, 2.0, 20))
    areas = [a for _, _, a in curve]
    assert all(b >= a for a, b in zip(areas, areas[1:]))
    for tv, tw, _ in curve:
        assert abs(tw - 0.3 * tv) < 1e-12


def test_grid_csv_round_trip_keeps_grid_commands_distinct(tmp_path):
    rows = [(speed_of_index(i), yaw_of_index(j), 0.123456, 0.05, True)
            for i in (0, 1, 150, 299) for j in (0, 20, 40)]
    rows.append((speed_of_index(7), yaw_of_index(3), 1.5, 2.5, False))
    path = tmp_path / "grid.csv"
    ev.write_grid_csv(rows, path)
    text = path.read_text().splitlines()
    assert text[0] == ev.GRID_CSV_HEADER
    assert len(text) == len(rows) + 1
    loaded = ev.read_grid_csv(path)
    # commands survive to 6 significant digits: every grid cell stays
    # distinct and lands back on its own value after rounding
    for got, want in zip(loaded, rows):
        assert got[0] == round(want[0], 6) and got[1] == round(want[1], 6)
        assert abs(got[2] - want[2]) < 1e-6 and abs(got[3] - want[3]) < 1e-6
        assert got[4] == want[4]
    assert len({(r[0], r[1]) for r in loaded}) == len(rows)


def test_read_grid_csv_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="expected header"):
        ev.read_grid_csv(path)


# -- deployment rollouts ----------------------------------------------

def test_hold_command_rollout_with_zero_actions_completes():
    env = RidingEnv(EnvConfig(**QUIET_ENV))
    speeds, yaw_rates, completed = ev.hold_command_rollout(
        ZeroPolicy(), env, np.zeros(2), hold_seconds=0.5)
    assert completed
    assert speeds.shape == (25,) and yaw_rates.shape == (25,)
    assert np.max(np.abs(speeds)) < 0.05
    assert np.max(np.abs(yaw_rates)) < 0.05


def test_rollout_commands_follows_the_schedule(tmp_path):
    env = RidingEnv(EnvConfig(**QUIET_ENV))
    sequence = [(0.0, 0.0, 0.0), (0.2, 0.1, -0.05)]
    rows = ev.rollout_commands(ZeroPolicy(), env, sequence)
    # default tail: one command period (0.2 s) past the last switch
    assert len(rows) == 20
    for t, c_v, c_w, *_ in rows[:10]:
        assert (c_v, c_w) == (0.0, 0.0)
    for t, c_v, c_w, *_ in rows[10:]:
        assert (c_v, c_w) == (0.1, -0.05)
    assert abs(rows[1][0] - 0.02) < 1e-12
    path = tmp_path / "rollout.csv"
    ev.write_rollout_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ev.ROLLOUT_CSV_HEADER
    assert lines[1].startswith("0.000,0,0,")
    assert lines[11].startswith("0.200,0.1,-0.05,")


def test_rollout_commands_validates_the_sequence():
    env = RidingEnv(EnvConfig(**QUIET_ENV))
    with pytest.raises(ValueError, match="increase strictly"):
        ev.rollout_commands(ZeroPolicy(), env, [(0.5, 0.0, 0.0)])
    with pytest.raises(ValueError, match="increase strictly"):
        ev.rollout_commands(ZeroPolicy(), env,
                            [(0.0, 0.0, 0.0), (0.2, 0.1, 0.0), (0.2, 0.2, 0.0)])
    assert ev.rollout_commands(ZeroPolicy(), env, []) == []


def test_eval_estimators_passthrough_scores_zero_error():
    bundle = PolicyBundle(seed=0, profile="small")
    env = RidingEnv(EnvConfig(**QUIET_ENV))

    def truth(env):
        return bundle.latent_np(env.intrinsic[None])[0], env.extrinsic.copy()

    report = ev.eval_estimators(bundle, env, [(0.0, 0.0), (0.2, 0.0)],
                                hold_seconds=0.2, estimate_fn=truth, seed=9)
    assert report["latent_error_mean"] == 0.0
    assert report["latent_error_std"] == 0.0
    assert np.all(report["extrinsic_abs_mean"] == 0.0)
    assert report["extrinsic_abs_mean"].shape == (16,)
    assert report["samples"] == 20


def test_eval_estimators_seeded_runs_ignore_command_order():
    bundle = PolicyBundle(seed=0, profile="small")
    commands = [(0.0, 0.0), (0.3, 0.1), (-0.2, 0.0)]
    reports = []
    for ordering in (commands, commands[::-1]):
        env = RidingEnv(EnvConfig(**QUIET_ENV))
        reports.append(ev.eval_estimators(bundle, env, ordering,
                                          hold_seconds=0.2, seed=11))
    assert reports[0]["samples"] == reports[1]["samples"]
    assert np.isclose(reports[0]["latent_error_mean"],
                      reports[1]["latent_error_mean"])
    assert np.allclose(reports[0]["extrinsic_abs_mean"],
                       reports[1]["extrinsic_abs_mean"])


# -- checkpoint-backed grid runs ---------------------------------------

@pytest.fixture(scope="module")
def saved_policy(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "policy.bin"
    settings = TrainSettings(iterations=0, horizon=4, batch=2, profile="small")
    trainer = Trainer(settings, EnvConfig(**QUIET_ENV), TrainConfig())
    trainer.save(path)
    return path, trainer


def test_load_policy_round_trips_parameters(saved_policy):
    path, trainer = saved_policy
    bundle, env_kwargs = ev.load_policy(path)
    for (name, p), (want_name, want) in zip(bundle.named_parameters(),
                                            trainer.bundle.named_parameters()):
        assert name == want_name
        assert np.array_equal(p.data, want.data)
    assert env_kwargs["dr_mode"] == "off"
    assert env_kwargs["seed"] == 5


def test_evaluation_env_disables_pushes(saved_policy):
    _, trainer = saved_policy
    kwargs = dict(dr_mode="train", obs_noise=True, seed=1,
                  perturb_body_max=30.0, perturb_deck_max=20.0)
    env = ev.evaluation_env(kwargs, dr_mode="off", seed=77)
    assert env.config.perturb_body_max == 0.0
    assert env.config.perturb_deck_max == 0.0
    assert env.config.dr_mode == "off"
    assert env.config.seed == 77
    assert kwargs["perturb_body_max"] == 30.0    # caller's dict untouched


def test_parallel_grid_evaluation_matches_sequential(saved_policy):
    path, _ = saved_policy
    kwargs = dict(subsample=150, dr_mode="off", seed=3,
                  hold_seconds=0.3, transient_seconds=0.1)
    sequential = ev.run_eval_grid(path, workers=1, **kwargs)
    parallel = ev.run_eval_grid(path, workers=2, **kwargs)
    assert len(sequential) == 3 * 1
    assert sequential == parallel


# -- pure pursuit -------------------------------------------------------

def test_pure_pursuit_validates_inputs():
    with pytest.raises(ValueError, match="two planar waypoints"):
        ev.PurePursuit([(0.0, 0.0)])
    with pytest.raises(ValueError, match="two planar waypoints"):
        ev.PurePursuit(np.zeros((3, 3)))
    with pytest.raises(ValueError, match="lookahead"):
        ev.PurePursuit([(0.0, 0.0), (1.0, 0.0)], lookahead=0.0)


def test_pure_pursuit_curvature_matches_the_geometry():
    # straight path along x, rider at the origin
    tracker = ev.PurePursuit([(0.0, 0.0), (10.0, 0.0)], lookahead=1.0,
                             cruise_speed=1.0)
    c_v, c_w = tracker.command((0.0, 0.0), heading=0.0)
    assert c_v == 1.0 and abs(c_w) < 1e-12
    # heading 45 degrees off: bearing -pi/4, curvature 2 v sin(b) / L
    c_v, c_w = tracker.command((0.0, 0.0), heading=math.pi / 4)
    assert abs(c_w - 2.0 * math.sin(-math.pi / 4)) < 1e-12
    # path straight up, rider facing x: bearing +pi/2
    upward = ev.PurePursuit([(0.0, 0.0), (0.0, 10.0)], lookahead=1.0,
                            cruise_speed=0.7)
    c_v, c_w = upward.command((0.0, 0.0), heading=0.0)
    assert c_v == 0.7
    assert abs(c_w - 2.0 * 0.7 * 1.0 / 1.0) < 1e-12


def test_pure_pursuit_chases_the_farthest_intersection():
    tracker = ev.PurePursuit([(0.0, 0.0), (10.0, 0.0)], lookahead=1.0,
                             cruise_speed=1.0)
    # at (5, 0) the lookahead circle cuts the path at x=4 and x=6; the
    # forward point wins, so facing +y the turn is clockwise
    _, c_w = tracker.command((5.0, 0.0), heading=math.pi / 2)
    assert abs(c_w - (-2.0)) < 1e-12


def test_pure_pursuit_stops_inside_the_goal_tolerance():
    tracker = ev.PurePursuit([(0.0, 0.0), (2.0, 0.0)], lookahead=1.0,
                             goal_tolerance=0.3)
    assert tracker.command((1.85, 0.0), heading=0.0) == (0.0, 0.0)
    assert tracker.finished
    # latched: even far away it stays stopped
    assert tracker.command((0.0, 0.0), heading=0.0) == (0.0, 0.0)


def test_pure_pursuit_falls_back_to_the_nearest_path_point():
    tracker = ev.PurePursuit([(0.0, 0.0), (10.0, 0.0)], lookahead=1.0,
                             cruise_speed=1.0)
    # 5 m off the path: no circle intersection; steer toward (3, 0)
    c_v, c_w = tracker.command((3.0, 5.0), heading=-math.pi / 2)
    assert c_v == 1.0
    assert abs(c_w) < 1e-12
