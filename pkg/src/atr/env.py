"""Riding environment: one quadruped standing on one transporter.

The POMDP surface exposed to the learner:

* observation (46): accelerometer 3, gyro 3, body roll/pitch 2,
  joint positions 12, joint velocities 12, previous action 12,
  command 2 — raw sensor units (normalization constants live here as
  OBS_CENTER/OBS_SCALE for the networks to apply),
* intrinsic state (34): payload mass 1, CoM shift 3, PD stiffness 12,
  PD damping 12, platform mass delta 1, deck friction 1, self-balance
  stiffness 2, self-balance damping 2 — constant within an episode,
* extrinsic state (16): contact flags 4, body velocity in body frame 3,
  platform velocity in body frame 3, platform angular velocity in body
  frame 3, body position relative to the deck pivot in the planar deck
  frame 2, relative yaw 1.

Actions are joint displacements in [-1, 1], scaled by 0.25 rad around
the nominal stance.  Commands are held between 5 s resample ticks;
scheduled pushes hit the trunk and the deck every 3 s for 0.2 s.
Episodes end on flipping, leaving the deck footprint, collapsing, a
physics fault, or the 10 s limit (timeout, flagged for bootstrapping).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .kernels import core
from .mathutils import (euler_rates_to_body_rates, euler_to_rot, mat_vec,
                        mat_vec_t, make_stream, pack_rng_state,
                        unpack_rng_state, wrap_angle)
from .rewards import (DEFAULT_WEIGHTS, N_TERMS, RewardInputs, compute_rewards)
from .rider import RiderParams, accelerometer, robot_preset, stance_state
from .transporter import TransporterParams, deck_preset

OBS_DIM = 46
INTRINSIC_DIM = 34
EXTRINSIC_DIM = 16
ACTION_DIM = 12
HISTORY_LENGTH = 10

ACTION_SCALE = 0.25
RESET_HEIGHT_JITTER = 0.02
RESET_JOINT_JITTER = 0.05
FLIP_LIMIT = 1.0          # rad on body roll or pitch
OFFBOARD_MARGIN = 0.1     # m beyond the deck half-extent
COLLAPSE_FRACTION = 0.5   # of the desired ride height

NOISE_GYRO = 0.02
NOISE_ACCEL = 0.1
NOISE_JOINT = 0.005

# Domain randomization ranges: (low, high) per scalar; vector-valued
# entries draw each component independently.
DR_RANGES = {
    "train": {
        "payload": (0.0, 1.0),
        "com_shift": (-0.2, 0.2),
        "pd_kp": (36.0, 44.0),
        "pd_kd": (0.8, 1.2),
        "deck_mass": (-0.5, 0.5),
        "friction": (0.8, 1.2),
        "sb_kp": (0.8, 1.5),
        "sb_kd": (0.02, 0.03),
    },
    "test": {
        "payload": (0.0, 3.0),
        "com_shift": (-0.25, 0.25),
        "pd_kp": (32.0, 48.0),
        "pd_kd": (0.6, 1.4),
        "deck_mass": (-1.0, 1.0),
        "friction": (0.7, 1.5),
        "sb_kp": (0.5, 2.0),
        "sb_kd": (0.01, 0.05),
    },
}

# Fixed affine maps for network inputs (raw -> roughly unit scale).
OBS_CENTER = np.zeros(OBS_DIM)
OBS_CENTER[2] = kernels.GRAVITY
OBS_SCALE = np.concatenate([
    np.full(3, 10.0),          # accelerometer
    np.full(3, 3.0),           # gyro
    np.full(2, 1.0),           # body roll/pitch
    np.full(12, 1.0),          # joint positions
    np.full(12, 10.0),         # joint velocities
    np.full(12, 1.0),          # previous action
    np.array([5.0, 2.0]),      # command
])

# Intrinsic standardization built from the midpoints/half-widths of the
# wider (test) ranges so train and test distributions share one map.
def _intrinsic_affine():
    spans = [("payload", 1), ("com_shift", 3), ("pd_kp", 12), ("pd_kd", 12),
             ("deck_mass", 1), ("friction", 1), ("sb_kp", 2), ("sb_kd", 2)]
    center = np.zeros(INTRINSIC_DIM)
    scale = np.zeros(INTRINSIC_DIM)
    i = 0
    for name, width in spans:
        lo, hi = DR_RANGES["test"][name]
        center[i:i + width] = 0.5 * (lo + hi)
        scale[i:i + width] = 0.5 * (hi - lo)
        i += width
    return center, scale


INTRINSIC_CENTER, INTRINSIC_SCALE = _intrinsic_affine()


@dataclass
class EnvConfig:
    transporter: str = "single"     # "single" or "split"
    deck: str = "small"             # deck preset name
    robot: str = "a1"               # robot preset name
    dt: float = 0.002               # physics step
    decimation: int = 10            # physics steps per control step
    episode_seconds: float = 10.0
    command_seconds: float = 5.0
    perturb_seconds: float = 3.0
    perturb_duration: float = 0.2
    perturb_body_max: float = 30.0  # N on the trunk
    perturb_deck_max: float = 20.0  # N on the deck
    dr_mode: str = "train"          # "train", "test", or "off"
    obs_noise: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.dr_mode not in ("train", "test", "off"):
            raise ValueError(f"unknown dr_mode {self.dr_mode!r}")
        if self.transporter not in ("single", "split"):
            raise ValueError(f"unknown transporter kind {self.transporter!r}")
        control_dt = self.dt * self.decimation
        for name in ("episode_seconds", "command_seconds", "perturb_seconds"):
            period = getattr(self, name)
            steps = period / control_dt
            if abs(steps - round(steps)) > 1e-9:
                raise ValueError(f"{name}={period} is not a multiple of the "
                                 f"control step {control_dt}")

    @property
    def control_dt(self):
        return self.dt * self.decimation

    @property
    def episode_steps(self):
        return int(round(self.episode_seconds / self.control_dt))

    @property
    def command_steps(self):
        return int(round(self.command_seconds / self.control_dt))

    @property
    def perturb_steps(self):
        return int(round(self.perturb_seconds / self.control_dt))

    @property
    def perturb_duration_steps(self):
        return int(round(self.perturb_duration / self.control_dt))


@dataclass
class StepResult:
    observation: np.ndarray
    intrinsic: np.ndarray
    extrinsic: np.ndarray
    reward: float
    reward_terms: np.ndarray
    done: bool
    termination: str        # "", "flip", "offboard", "collapse", "fault", "timeout"
    timeout: bool
    segments: list = field(default_factory=list)


class RidingEnv:
    """Single riding scene; step one control tick at a time."""

    def __init__(self, config=None, rng=None, command_source=None,
                 reward_weights=None):
        self.config = config if config is not None else EnvConfig()
        self.nominal_transporter = deck_preset(self.config.deck,
                                               kind=self.config.transporter)
        self.nominal_rider = robot_preset(self.config.robot)
        self.rng = rng if rng is not None else make_stream(self.config.seed, 0)
        self.command_source = command_source
        self.reward_weights = (DEFAULT_WEIGHTS if reward_weights is None
                               else np.asarray(reward_weights, dtype=float))
        self._fixed_command = None
        self.episode_count = 0

        # scratch buffers for the kernel call
        self._out_force = np.zeros((4, 3))
        self._out_flag = np.zeros(4)
        self._out_foot_world = np.zeros((4, 3))
        self._out_torque = np.zeros(12)
        self._out_accel = np.zeros(6)
        self._out_status = np.zeros(2, dtype=np.int64)

        self.reset()

    # -- episode setup -------------------------------------------------

    def set_command(self, command):
        """Pin the command (evaluation); None returns to sampling."""
        self._fixed_command = (None if command is None
                               else np.asarray(command, dtype=float).copy())
        if self._fixed_command is not None:
            self.command = self._fixed_command.copy()

    def _draw_command(self):
        if self._fixed_command is not None:
            return self._fixed_command.copy()
        if self.command_source is not None:
            return np.asarray(self.command_source(self.rng), dtype=float).copy()
        return np.zeros(2)

    def _draw_intrinsic(self):
        mode = self.config.dr_mode
        x = np.zeros(INTRINSIC_DIM)
        if mode == "off":
            x[0] = 0.0
            x[1:4] = 0.0
            x[4:16] = self.nominal_rider.pd_kp
            x[16:28] = self.nominal_rider.pd_kd
            x[28] = 0.0
            x[29] = self.nominal_transporter.friction
            x[30:32] = self.nominal_transporter.balance_kp
            x[32:34] = self.nominal_transporter.balance_kd
            return x
        ranges = DR_RANGES[mode]
        x[0] = self.rng.uniform(*ranges["payload"])
        x[1:4] = self.rng.uniform(*ranges["com_shift"], size=3)
        x[4:16] = self.rng.uniform(*ranges["pd_kp"], size=12)
        x[16:28] = self.rng.uniform(*ranges["pd_kd"], size=12)
        x[28] = self.rng.uniform(*ranges["deck_mass"])
        x[29] = self.rng.uniform(*ranges["friction"])
        x[30:32] = self.rng.uniform(*ranges["sb_kp"], size=2)
        x[32:34] = self.rng.uniform(*ranges["sb_kd"], size=2)
        return x

    def _apply_intrinsic(self, x):
        rider = replace(self.nominal_rider,
                        payload_mass=float(x[0]),
                        com_shift=tuple(x[1:4]),
                        pd_kp=tuple(x[4:16]),
                        pd_kd=tuple(x[16:28]))
        transporter = replace(self.nominal_transporter,
                              mass=self.nominal_transporter.mass + float(x[28]),
                              friction=float(x[29]),
                              balance_kp=tuple(x[30:32]),
                              balance_kd=tuple(x[32:34]))
        return transporter, rider

    def reset(self):
        cfg = self.config
        self.intrinsic = self._draw_intrinsic()
        transporter, rider = self._apply_intrinsic(self.intrinsic)
        self.transporter_params = transporter
        self.rider_params = rider
        self.tp_par = transporter.packed()
        self.rd_par = rider.packed()

        self.tp_state = np.zeros(core.TPS_SIZE)
        self.tp_state[core.TPS_POS_Z] = transporter.hover_height

        deck_top = transporter.hover_height
        self.rd_state = stance_state(rider, deck_top_z=deck_top)
        if cfg.dr_mode != "off":
            self.rd_state[core.RS_POS + 2] += self.rng.uniform(
                -RESET_HEIGHT_JITTER, RESET_HEIGHT_JITTER)
            self.rd_state[core.RS_JOINT_POS:core.RS_JOINT_POS + 12] += (
                self.rng.uniform(-RESET_JOINT_JITTER, RESET_JOINT_JITTER, size=12))

        self.command = self._draw_command()
        self.prev_action = np.zeros(ACTION_DIM)
        self.prev_body_vel = self.rd_state[core.RS_VEL:core.RS_VEL + 3].copy()
        self.prev_joint_vel = self.rd_state[core.RS_JOINT_VEL:core.RS_JOINT_VEL + 12].copy()
        self.step_count = 0
        self.episode_count += 1
        self.done = False

        self.body_push = np.zeros(3)
        self.deck_push = np.zeros(3)
        self.push_remaining = 0

        self._segment_sums = np.zeros(2)
        self._segment_steps = 0
        self._segment_command = self.command.copy()

        self.history = np.zeros((HISTORY_LENGTH, OBS_DIM))
        self.obs = self._assemble_observation()
        self.extrinsic = self._assemble_extrinsic()
        self._push_history(self.obs)
        return self.obs

    # -- readouts for evaluation ----------------------------------------

    @property
    def platform_forward_speed(self):
        return float(self.tp_state[core.TPS_FWD_VEL])

    @property
    def platform_yaw_rate(self):
        return float(self.tp_state[core.TPS_YAW_RATE])

    @property
    def platform_planar_pose(self):
        """(x, y, yaw) of the deck pivot."""
        return (float(self.tp_state[core.TPS_POS_X]),
                float(self.tp_state[core.TPS_POS_Y]),
                float(self.tp_state[core.TPS_YAW]))

    @property
    def joint_torques(self):
        """PD torques applied on the last physics substep."""
        return self._out_torque.copy()

    @property
    def joint_velocities(self):
        return self.rd_state[core.RS_JOINT_VEL:core.RS_JOINT_VEL + 12].copy()

    # -- observation assembly ------------------------------------------

    def _body_rotation(self):
        return euler_to_rot(self.rd_state[core.RS_EULER:core.RS_EULER + 3])

    def _assemble_observation(self):
        rd = self.rd_state
        cfg = self.config
        accel = accelerometer(rd[core.RS_EULER:core.RS_EULER + 3],
                              rd[core.RS_VEL:core.RS_VEL + 3],
                              self.prev_body_vel, cfg.control_dt)
        gyro = rd[core.RS_ANGVEL:core.RS_ANGVEL + 3].copy()
        q = rd[core.RS_JOINT_POS:core.RS_JOINT_POS + 12].copy()
        qd = rd[core.RS_JOINT_VEL:core.RS_JOINT_VEL + 12].copy()
        if cfg.obs_noise:
            accel += self.rng.normal(0.0, NOISE_ACCEL, 3)
            gyro += self.rng.normal(0.0, NOISE_GYRO, 3)
            q += self.rng.normal(0.0, NOISE_JOINT, 12)
        obs = np.concatenate([
            accel, gyro, rd[core.RS_EULER:core.RS_EULER + 2],
            q, qd, self.prev_action, self.command,
        ])
        return obs

    def _platform_angular_world(self):
        tp = self.tp_state
        if int(self.tp_par[core.TPP_KIND]) == kernels.KIND_SINGLE_DECK:
            euler = tp[core.TPS_ROLL:core.TPS_ROLL + 3]
            rates = np.array([tp[core.TPS_ROLL_RATE], tp[core.TPS_PITCH_RATE],
                              tp[core.TPS_YAW_RATE]])
            omega_body = euler_rates_to_body_rates(euler, rates)
            return mat_vec(euler_to_rot(euler), omega_body)
        pitch_rate = 0.5 * (tp[core.TPS_RIGHT_PITCH_RATE] + tp[core.TPS_LEFT_PITCH_RATE])
        yaw = tp[core.TPS_YAW]
        return np.array([-math.sin(yaw) * pitch_rate,
                         math.cos(yaw) * pitch_rate,
                         tp[core.TPS_YAW_RATE]])

    def _assemble_extrinsic(self):
        tp, rd = self.tp_state, self.rd_state
        rot_body = self._body_rotation()
        body_vel = rd[core.RS_VEL:core.RS_VEL + 3]
        yaw = tp[core.TPS_YAW]
        deck_vel = np.array([
            tp[core.TPS_FWD_VEL] * math.cos(yaw),
            tp[core.TPS_FWD_VEL] * math.sin(yaw),
            tp[core.TPS_VERT_VEL],
        ])
        rel = rd[core.RS_POS:core.RS_POS + 3] - tp[core.TPS_POS_X:core.TPS_POS_X + 3]
        cy, sy = math.cos(yaw), math.sin(yaw)
        rel_planar = np.array([cy * rel[0] + sy * rel[1],
                               -sy * rel[0] + cy * rel[1]])
        return np.concatenate([
            self._out_flag.copy(),
            mat_vec_t(rot_body, body_vel),
            mat_vec_t(rot_body, deck_vel),
            mat_vec_t(rot_body, self._platform_angular_world()),
            rel_planar,
            [wrap_angle(rd[core.RS_EULER + 2] - yaw)],
        ])

    def _push_history(self, obs):
        self.history[:-1] = self.history[1:]
        self.history[-1] = obs

    # -- termination ----------------------------------------------------

    def _check_termination(self):
        rd, tp = self.rd_state, self.tp_state
        if self._out_status[0] != 0:
            return "fault"
        if (abs(rd[core.RS_EULER]) > FLIP_LIMIT
                or abs(rd[core.RS_EULER + 1]) > FLIP_LIMIT):
            return "flip"
        rel = rd[core.RS_POS:core.RS_POS + 3] - tp[core.TPS_POS_X:core.TPS_POS_X + 3]
        yaw = tp[core.TPS_YAW]
        cy, sy = math.cos(yaw), math.sin(yaw)
        rx = cy * rel[0] + sy * rel[1]
        ry = -sy * rel[0] + cy * rel[1]
        if (abs(rx) > 0.5 * self.transporter_params.length + OFFBOARD_MARGIN
                or abs(ry) > 0.5 * self.transporter_params.width + OFFBOARD_MARGIN):
            return "offboard"
        height = rd[core.RS_POS + 2] - tp[core.TPS_POS_Z]
        if height < COLLAPSE_FRACTION * self.rider_params.desired_ride_height:
            return "collapse"
        return ""

    # -- stepping --------------------------------------------------------

    def _update_pushes(self):
        cfg = self.config
        if cfg.dr_mode == "off":
            return
        if self.step_count > 0 and self.step_count % cfg.perturb_steps == 0:
            direction = self.rng.normal(size=3)
            norm = np.linalg.norm(direction)
            direction = direction / norm if norm > 1e-12 else np.array([1.0, 0.0, 0.0])
            self.body_push = direction * self.rng.uniform(0.0, cfg.perturb_body_max)
            direction = self.rng.normal(size=3)
            norm = np.linalg.norm(direction)
            direction = direction / norm if norm > 1e-12 else np.array([1.0, 0.0, 0.0])
            self.deck_push = direction * self.rng.uniform(0.0, cfg.perturb_deck_max)
            self.push_remaining = cfg.perturb_duration_steps
        if self.push_remaining > 0:
            self.push_remaining -= 1
        else:
            self.body_push[:] = 0.0
            self.deck_push[:] = 0.0

    def step(self, action):
        if self.done:
            raise RuntimeError("step() after done; call reset()")
        cfg = self.config
        action = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        targets = self.rider_params.joint_home + ACTION_SCALE * action

        self._update_pushes()
        self.prev_body_vel = self.rd_state[core.RS_VEL:core.RS_VEL + 3].copy()
        self.prev_joint_vel = self.rd_state[core.RS_JOINT_VEL:core.RS_JOINT_VEL + 12].copy()

        core.control_step(self.tp_state, self.rd_state, self.tp_par, self.rd_par,
                          targets, self.body_push, self.deck_push,
                          cfg.dt, cfg.decimation,
                          self._out_force, self._out_flag, self._out_foot_world,
                          self._out_torque, self._out_accel, self._out_status)
        self.step_count += 1

        reason = self._check_termination()
        timeout = reason == "" and self.step_count >= cfg.episode_steps
        terminated = reason != ""
        self.done = terminated or timeout
        if timeout:
            reason = "timeout"

        terms = self._compute_reward_terms(action, terminated)
        self._segment_sums[0] += terms[0]
        self._segment_sums[1] += terms[1]
        self._segment_steps += 1

        segments = []
        resample = (not self.done and self.step_count % cfg.command_steps == 0)
        if self.done or resample:
            segments.append((self._segment_command.copy(),
                             self._segment_sums[0] / self._segment_steps,
                             self._segment_sums[1] / self._segment_steps))
            self._segment_sums[:] = 0.0
            self._segment_steps = 0
        if resample:
            self.command = self._draw_command()
            self._segment_command = self.command.copy()

        self.prev_action = action.copy()
        self.obs = self._assemble_observation()
        self.extrinsic = self._assemble_extrinsic()
        self._push_history(self.obs)

        return StepResult(
            observation=self.obs,
            intrinsic=self.intrinsic,
            extrinsic=self.extrinsic,
            reward=float(terms.sum()),
            reward_terms=terms,
            done=self.done,
            termination=reason,
            timeout=timeout,
            segments=segments,
        )

    def _compute_reward_terms(self, action, terminated):
        tp, rd = self.tp_state, self.rd_state
        cfg = self.config
        rot_body = self._body_rotation()
        com_world = (rd[core.RS_POS:core.RS_POS + 3]
                     + mat_vec(rot_body, np.asarray(self.rider_params.com_shift)))
        joint_vel = rd[core.RS_JOINT_VEL:core.RS_JOINT_VEL + 12]
        inputs = RewardInputs(
            command=self.command,
            platform_forward_speed=tp[core.TPS_FWD_VEL],
            platform_yaw_rate=tp[core.TPS_YAW_RATE],
            platform_accel=self._out_accel.copy(),
            platform_planar=tp[core.TPS_POS_X:core.TPS_POS_X + 2].copy(),
            platform_yaw=tp[core.TPS_YAW],
            platform_height=tp[core.TPS_POS_Z],
            body_planar=rd[core.RS_POS:core.RS_POS + 2].copy(),
            body_yaw=rd[core.RS_EULER + 2],
            body_height=rd[core.RS_POS + 2],
            body_roll_pitch=rd[core.RS_EULER:core.RS_EULER + 2].copy(),
            body_angvel=rd[core.RS_ANGVEL:core.RS_ANGVEL + 3].copy(),
            body_vertical_speed=rd[core.RS_VEL + 2],
            com_planar=com_world[:2],
            foot_planar=self._out_foot_world[:, :2].copy(),
            contact_flags=self._out_flag.copy(),
            contact_forces=self._out_force.copy(),
            joint_pos=rd[core.RS_JOINT_POS:core.RS_JOINT_POS + 12].copy(),
            joint_vel=joint_vel.copy(),
            joint_acc=(joint_vel - self.prev_joint_vel) / cfg.control_dt,
            joint_torque=self._out_torque.copy(),
            joint_home=self.rider_params.joint_home,
            action=action,
            prev_action=self.prev_action,
            desired_height=self.rider_params.desired_ride_height,
            collision=bool(self._out_status[1]),
            terminated=terminated,
        )
        return compute_rewards(inputs, self.reward_weights)

    # -- persistence ------------------------------------------------------

    def get_state(self):
        """Everything needed to resume mid-episode bit-exactly."""
        return {
            "tp_state": self.tp_state.copy(),
            "rd_state": self.rd_state.copy(),
            "intrinsic": self.intrinsic.copy(),
            "command": self.command.copy(),
            "prev_action": self.prev_action.copy(),
            "prev_body_vel": self.prev_body_vel.copy(),
            "prev_joint_vel": self.prev_joint_vel.copy(),
            "pushes": np.concatenate([self.body_push, self.deck_push,
                                      [float(self.push_remaining)]]),
            "segment": np.concatenate([self._segment_sums,
                                       [float(self._segment_steps)],
                                       self._segment_command]),
            "counters": np.array([float(self.step_count),
                                  float(self.episode_count),
                                  1.0 if self.done else 0.0]),
            "history": self.history.copy(),
            "observation": self.obs.copy(),
            "extrinsic_state": self.extrinsic.copy(),
            "contact_flags": self._out_flag.copy(),
            "rng": pack_rng_state(self.rng),
        }

    def set_state(self, state):
        self.intrinsic = state["intrinsic"].copy()
        transporter, rider = self._apply_intrinsic(self.intrinsic)
        self.transporter_params = transporter
        self.rider_params = rider
        self.tp_par = transporter.packed()
        self.rd_par = rider.packed()
        self.tp_state = state["tp_state"].copy()
        self.rd_state = state["rd_state"].copy()
        self.command = state["command"].copy()
        self.prev_action = state["prev_action"].copy()
        self.prev_body_vel = state["prev_body_vel"].copy()
        self.prev_joint_vel = state["prev_joint_vel"].copy()
        self.body_push = state["pushes"][0:3].copy()
        self.deck_push = state["pushes"][3:6].copy()
        self.push_remaining = int(state["pushes"][6])
        self._segment_sums = state["segment"][0:2].copy()
        self._segment_steps = int(state["segment"][2])
        self._segment_command = state["segment"][3:5].copy()
        self.step_count = int(state["counters"][0])
        self.episode_count = int(state["counters"][1])
        self.done = bool(state["counters"][2])
        self.history = state["history"].copy()
        self.obs = state["observation"].copy()
        self.extrinsic = state["extrinsic_state"].copy()
        self._out_flag = state["contact_flags"].copy()
        self.rng = unpack_rng_state(state["rng"])


class BatchEnv:
    """Fixed batch of independent environments with auto-reset.

    Done environments reset inside step(); the terminal observation,
    intrinsic, and extrinsic vectors ride along in the info entry so a
    trainer can bootstrap timeouts.
    """

    def __init__(self, config=None, batch=64, command_source=None,
                 reward_weights=None):
        self.config = config if config is not None else EnvConfig()
        self.batch = batch
        self.envs = [
            RidingEnv(self.config,
                      rng=make_stream(self.config.seed, i),
                      command_source=command_source,
                      reward_weights=reward_weights)
            for i in range(batch)
        ]

    def observations(self):
        return np.stack([e.obs for e in self.envs])

    def intrinsics(self):
        return np.stack([e.intrinsic for e in self.envs])

    def extrinsics(self):
        return np.stack([e.extrinsic for e in self.envs])

    def histories(self):
        return np.stack([e.history for e in self.envs])

    def reset_all(self):
        for env in self.envs:
            env.reset()
        return self.observations()

    def step(self, actions):
        """Returns (rewards, reward_terms, dones, timeouts, infos)."""
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (self.batch, ACTION_DIM):
            raise ValueError(f"actions must be {(self.batch, ACTION_DIM)}, "
                             f"got {actions.shape}")
        rewards = np.zeros(self.batch)
        terms = np.zeros((self.batch, N_TERMS))
        dones = np.zeros(self.batch, dtype=bool)
        timeouts = np.zeros(self.batch, dtype=bool)
        infos = []
        for i, env in enumerate(self.envs):
            result = env.step(actions[i])
            rewards[i] = result.reward
            terms[i] = result.reward_terms
            dones[i] = result.done
            timeouts[i] = result.timeout
            info = {"segments": result.segments,
                    "termination": result.termination}
            if result.done:
                info["terminal_observation"] = result.observation
                info["terminal_intrinsic"] = result.intrinsic
                info["terminal_extrinsic"] = result.extrinsic
                env.reset()
            infos.append(info)
        return rewards, terms, dones, timeouts, infos

    def get_state(self):
        return [env.get_state() for env in self.envs]

    def set_state(self, states):
        if len(states) != self.batch:
            raise ValueError("state list length does not match batch")
        for env, state in zip(self.envs, states):
            env.set_state(state)
