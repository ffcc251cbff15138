"""Reduced quadruped rider: rigid trunk, four massless 3-joint legs.

Legs are ordered front-right, rear-right, front-left, rear-left (the
right pair rides the right half of a split deck).  Each leg is
abduction / hip pitch / knee with the home pose placing the foot
straight below the hip.  Rear legs mirror the front ones fore-aft
(knees point inward): gravity sag then moves front and rear feet
symmetrically, so the standing center of pressure stays put instead of
torquing the deck.  Joints carry a small inertia proxy so contact loads
deflect them; a PD loop tracks the commanded joint targets with a hard
torque clamp.

Presets derive from published overall box dimensions and masses; the
link proportions (thigh = shank = half the box height, abduction link a
fifth of it, hips at 40% of the trunk box) land within a few percent of
the public link lengths for the small robots.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .kernels import core
from .mathutils import GRAVITY, euler_to_rot


ROBOT_PRESETS = {
    # overall box (m), mass (kg), joint torque limit (N m)
    "a1": ((0.50, 0.30, 0.40), 11.74, 33.5),
    "go1": ((0.65, 0.28, 0.40), 12.14, 33.5),
    "anymalc": ((0.93, 0.53, 0.89), 43.51, 80.0),
    "spot": ((1.10, 0.50, 0.61), 32.60, 80.0),
}

HOME_ABDUCTION = 0.0
HOME_HIP = 0.8
HOME_KNEE = -1.6

# abduction / hip / knee ranges; rear legs use the fore-aft mirror
JOINT_LIMITS_FRONT = ((-0.8, 0.8), (-1.0, 2.5), (-2.7, -0.45))
JOINT_LIMITS_REAR = ((-0.8, 0.8), (-2.5, 1.0), (0.45, 2.7))

FRONT_LEGS = (0, 2)  # FR, FL; legs 1 and 3 are the rear pair


@dataclass
class RiderParams:
    mass: float = 11.74
    trunk_length: float = 0.40
    trunk_width: float = 0.18
    trunk_height: float = 0.12
    abduct_len: float = 0.08
    thigh_len: float = 0.20
    shank_len: float = 0.20
    hip_x: float = 0.16
    hip_y: float = 0.09
    torque_max: float = 33.5
    payload_mass: float = 0.0
    com_shift: np.ndarray = field(default_factory=lambda: np.zeros(3))
    pd_kp: np.ndarray = field(default_factory=lambda: np.full(12, 40.0))
    pd_kd: np.ndarray = field(default_factory=lambda: np.full(12, 1.0))
    joint_inertia: float = 0.02
    contact_kp: float = 5.0e4
    contact_kd: float = 500.0
    slip_vel: float = 0.01

    def __post_init__(self):
        self.com_shift = np.asarray(self.com_shift, dtype=float)
        self.pd_kp = np.asarray(self.pd_kp, dtype=float) * np.ones(12)
        self.pd_kd = np.asarray(self.pd_kd, dtype=float) * np.ones(12)
        for name in ("mass", "thigh_len", "shank_len", "joint_inertia",
                     "contact_kp", "slip_vel", "torque_max"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.payload_mass < 0.0:
            raise ValueError("payload_mass cannot be negative")

    @property
    def total_mass(self):
        return self.mass + self.payload_mass

    @property
    def trunk_inertia(self):
        m = self.total_mass
        lx, ly, lz = self.trunk_length, self.trunk_width, self.trunk_height
        return np.array([m * (ly ** 2 + lz ** 2) / 12.0,
                         m * (lx ** 2 + lz ** 2) / 12.0,
                         m * (lx ** 2 + ly ** 2) / 12.0])

    @property
    def hip_offsets(self):
        out = np.zeros((4, 3))
        signs = ((1, -1), (-1, -1), (1, 1), (-1, 1))  # FR, RR, FL, RL
        for leg, (sx, sy) in enumerate(signs):
            out[leg, 0] = sx * self.hip_x
            out[leg, 1] = sy * self.hip_y
        return out

    @property
    def joint_home(self):
        home = np.empty(12)
        for leg in range(4):
            mirror = 1.0 if leg in FRONT_LEGS else -1.0
            home[3 * leg] = HOME_ABDUCTION
            home[3 * leg + 1] = mirror * HOME_HIP
            home[3 * leg + 2] = mirror * HOME_KNEE
        return home

    @property
    def standing_height(self):
        """Trunk origin above the feet at the home pose."""
        return (self.thigh_len * np.cos(HOME_HIP)
                + self.shank_len * np.cos(HOME_HIP + HOME_KNEE))

    @property
    def desired_ride_height(self):
        return 0.9 * self.standing_height

    def packed(self):
        par = np.zeros(core.RP_SIZE)
        par[core.RP_MASS] = self.total_mass
        par[core.RP_INERTIA:core.RP_INERTIA + 3] = self.trunk_inertia
        par[core.RP_COM_OFFSET:core.RP_COM_OFFSET + 3] = self.com_shift
        par[core.RP_ABDUCT_LEN] = self.abduct_len
        par[core.RP_THIGH_LEN] = self.thigh_len
        par[core.RP_SHANK_LEN] = self.shank_len
        par[core.RP_JOINT_INERTIA] = self.joint_inertia
        par[core.RP_CONTACT_KP] = self.contact_kp
        par[core.RP_CONTACT_KD] = self.contact_kd
        par[core.RP_SLIP_VEL] = self.slip_vel
        par[core.RP_TORQUE_MAX] = self.torque_max
        par[core.RP_BODY_LEN] = self.trunk_length
        par[core.RP_BODY_WIDTH] = self.trunk_width
        par[core.RP_BODY_HEIGHT] = self.trunk_height
        par[core.RP_HIP_OFFSETS:core.RP_HIP_OFFSETS + 12] = self.hip_offsets.ravel()
        par[core.RP_JOINT_HOME:core.RP_JOINT_HOME + 12] = self.joint_home
        for leg in range(4):
            limits = JOINT_LIMITS_FRONT if leg in FRONT_LEGS else JOINT_LIMITS_REAR
            for j, (lo, hi) in enumerate(limits):
                par[core.RP_JOINT_MIN + 3 * leg + j] = lo
                par[core.RP_JOINT_MAX + 3 * leg + j] = hi
        par[core.RP_PD_KP:core.RP_PD_KP + 12] = self.pd_kp
        par[core.RP_PD_KD:core.RP_PD_KD + 12] = self.pd_kd
        return par


def robot_preset(name, **overrides):
    (length, width, height), mass, torque_max = ROBOT_PRESETS[name]
    trunk_length = 0.8 * length
    trunk_width = 0.6 * width
    return RiderParams(
        mass=mass,
        trunk_length=trunk_length,
        trunk_width=trunk_width,
        trunk_height=0.3 * height,
        abduct_len=0.2 * height,
        thigh_len=0.5 * height,
        shank_len=0.5 * height,
        hip_x=0.4 * trunk_length,
        hip_y=0.5 * trunk_width,
        torque_max=torque_max,
        **overrides,
    )


def stance_state(params, deck_top_z=0.15, planar=(0.0, 0.0), yaw=0.0):
    """Rider standing at the home pose with feet on the deck plane."""
    state = np.zeros(core.RS_SIZE)
    state[core.RS_POS] = planar[0]
    state[core.RS_POS + 1] = planar[1]
    state[core.RS_POS + 2] = deck_top_z + params.standing_height
    state[core.RS_EULER + 2] = yaw
    state[core.RS_JOINT_POS:core.RS_JOINT_POS + 12] = params.joint_home
    return state


def foot_positions(state_vec, params_vec):
    """Foot positions for all legs, (body frame, world frame)."""
    body = np.empty((4, 3))
    rot = euler_to_rot(state_vec[core.RS_EULER:core.RS_EULER + 3])
    world = np.empty((4, 3))
    for leg in range(4):
        sign = -1.0 if leg < 2 else 1.0
        q = state_vec[core.RS_JOINT_POS + 3 * leg:core.RS_JOINT_POS + 3 * leg + 3]
        rel = kernels.leg_forward_kinematics(
            q, sign, params_vec[core.RP_ABDUCT_LEN],
            params_vec[core.RP_THIGH_LEN], params_vec[core.RP_SHANK_LEN])
        body[leg] = params_vec[core.RP_HIP_OFFSETS + 3 * leg:
                               core.RP_HIP_OFFSETS + 3 * leg + 3] + rel
        world[leg] = state_vec[core.RS_POS:core.RS_POS + 3] + rot @ body[leg]
    return body, world


def leg_jacobians(state_vec, params_vec):
    out = np.empty((4, 3, 3))
    for leg in range(4):
        sign = -1.0 if leg < 2 else 1.0
        q = state_vec[core.RS_JOINT_POS + 3 * leg:core.RS_JOINT_POS + 3 * leg + 3]
        out[leg] = kernels.leg_jacobian(
            q, sign, params_vec[core.RP_ABDUCT_LEN],
            params_vec[core.RP_THIGH_LEN], params_vec[core.RP_SHANK_LEN])
    return out


def compute_contacts(tp_state, tp_params, rd_state, rd_params, dt=0.002):
    """Contact forces (deck on feet, world frame) and flags."""
    force = np.zeros((4, 3))
    flag = np.zeros(4)
    foot_world = np.zeros((4, 3))
    foot_body = np.zeros((4, 3))
    jac = np.zeros((4, 3, 3))
    kernels.compute_contacts(tp_state, tp_params, rd_state, rd_params, float(dt),
                             force, flag, foot_world, foot_body, jac)
    return {"force": force, "flag": flag, "foot_world": foot_world,
            "foot_body": foot_body, "jacobian": jac}


def accelerometer(body_euler, vel_now, vel_prev, dt):
    """Trunk-frame specific force from control-rate velocity differences.

    At rest this reads (0, 0, +9.81): the sensor measures reaction to
    gravity, not gravity itself.
    """
    rot = euler_to_rot(np.asarray(body_euler, dtype=float))
    accel_world = (np.asarray(vel_now, dtype=float) - np.asarray(vel_prev, dtype=float)) / dt
    accel_world = accel_world - np.array([0.0, 0.0, -GRAVITY])
    return rot.T @ accel_world
