"""Reduced-order tilt-controlled transporter models.

Two kinds are modeled:

* ``single``: one rigid deck.  Leaning forward (pitch) drives forward
  speed, leaning sideways (roll) steers while pitched.
* ``split``: two half decks pitching independently about the shared
  lateral axle.  The mean pitch drives, the differential pitch steers,
  and the pivot cannot roll.

Drive terms saturate once tilt passes ``tilt_normalization``; speeds are
opposed by the quadratic rolling resistance, with a static deadband that
keeps a level board parked.  Altitude is held by a critically damped
hover loop instead of modeling ground support.  A weak self-balance PD
recenters tilt; foot contact moments dominate it by design, which is
what makes the deck rideable.

States are flat float64 vectors (see `atr.kernels.core` for the index
map); the dataclasses here pack parameters and expose named views.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .kernels import core


DECK_PRESETS = {
    # length, width, thickness (m), mass (kg)
    "small": (0.9, 0.7, 0.05, 11.5),
    "large": (1.5, 1.1, 0.05, 30.0),
}


@dataclass
class TransporterParams:
    kind: str = "single"
    length: float = 0.9
    width: float = 0.7
    thickness: float = 0.05
    mass: float = 11.5
    forward_drive_max: float = 12.0
    yaw_drive_max: float = 3.0
    tilt_normalization: float = 0.78
    balance_kp: tuple = (1.15, 1.15)
    balance_kd: tuple = (0.025, 0.025)
    resistance: tuple = (0.2, 0.05, 0.005)
    friction: float = 1.0
    altitude_kp: float = 400.0
    altitude_kd: float = 40.0
    hover_height: float = 0.15

    def __post_init__(self):
        if self.kind not in ("single", "split"):
            raise ValueError(f"unknown transporter kind {self.kind!r}")
        for name in ("length", "width", "thickness", "mass", "tilt_normalization"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if min(self.balance_kp) <= 0.0 or min(self.balance_kd) <= 0.0:
            raise ValueError("self-balance gains must be positive")

    @property
    def roll_inertia(self):
        return self.mass * (self.width ** 2 + self.thickness ** 2) / 12.0

    @property
    def pitch_inertia(self):
        """Single deck: full plate.  Split deck: one half plate about the
        shared axle (its centroid sits on the axle, no offset term)."""
        if self.kind == "single":
            return self.mass * (self.length ** 2 + self.thickness ** 2) / 12.0
        half_mass = 0.5 * self.mass
        return half_mass * (self.length ** 2 + self.thickness ** 2) / 12.0

    @property
    def yaw_inertia(self):
        if self.kind == "single":
            return self.mass * (self.length ** 2 + self.width ** 2) / 12.0
        half_mass = 0.5 * self.mass
        half_width = 0.5 * self.width
        own = half_mass * (self.length ** 2 + half_width ** 2) / 12.0
        shift = half_mass * (0.5 * half_width) ** 2
        return 2.0 * (own + shift)

    def packed(self):
        par = np.zeros(core.TPP_SIZE)
        par[core.TPP_KIND] = core.KIND_SINGLE_DECK if self.kind == "single" else core.KIND_SPLIT_DECK
        par[core.TPP_MASS] = self.mass
        par[core.TPP_LENGTH] = self.length
        par[core.TPP_WIDTH] = self.width
        par[core.TPP_THICKNESS] = self.thickness
        par[core.TPP_INERTIA_ROLL] = self.roll_inertia
        par[core.TPP_INERTIA_PITCH] = self.pitch_inertia
        par[core.TPP_INERTIA_YAW] = self.yaw_inertia
        par[core.TPP_FWD_DRIVE_MAX] = self.forward_drive_max
        par[core.TPP_YAW_DRIVE_MAX] = self.yaw_drive_max
        par[core.TPP_TILT_NORM] = self.tilt_normalization
        par[core.TPP_SB_KP_A] = self.balance_kp[0]
        par[core.TPP_SB_KP_B] = self.balance_kp[1]
        par[core.TPP_SB_KD_A] = self.balance_kd[0]
        par[core.TPP_SB_KD_B] = self.balance_kd[1]
        par[core.TPP_RESIST_0] = self.resistance[0]
        par[core.TPP_RESIST_1] = self.resistance[1]
        par[core.TPP_RESIST_2] = self.resistance[2]
        par[core.TPP_ALT_KP] = self.altitude_kp
        par[core.TPP_ALT_KD] = self.altitude_kd
        par[core.TPP_HOVER_HEIGHT] = self.hover_height
        par[core.TPP_FRICTION] = self.friction
        return par


def deck_preset(name, kind="single", **overrides):
    length, width, thickness, mass = DECK_PRESETS[name]
    return TransporterParams(kind=kind, length=length, width=width,
                             thickness=thickness, mass=mass, **overrides)


@dataclass
class TransporterState:
    data: np.ndarray = field(default_factory=lambda: np.zeros(core.TPS_SIZE))

    @classmethod
    def at_rest(cls, params):
        state = cls()
        state.data[core.TPS_POS_Z] = params.hover_height
        return state

    @property
    def position(self):
        return self.data[core.TPS_POS_X:core.TPS_POS_X + 3]

    @property
    def tilt(self):
        """(roll, pitch) for the single deck."""
        return self.data[core.TPS_ROLL:core.TPS_ROLL + 2]

    @property
    def yaw(self):
        return self.data[core.TPS_YAW]

    @property
    def forward_speed(self):
        return self.data[core.TPS_FWD_VEL]

    @property
    def yaw_rate(self):
        return self.data[core.TPS_YAW_RATE]

    @property
    def platform_pitches(self):
        """(right, left) half-deck pitches for the split deck."""
        return self.data[core.TPS_RIGHT_PITCH:core.TPS_RIGHT_PITCH + 2]


def step(state_vec, params_vec, torque_right=None, torque_left=None,
         vertical_load=0.0, deck_force=None, dt=0.002, out_accel=None):
    """Advance the transporter one substep in place."""
    if torque_right is None:
        torque_right = np.zeros(3)
    if torque_left is None:
        torque_left = np.zeros(3)
    if deck_force is None:
        deck_force = np.zeros(3)
    if out_accel is None:
        out_accel = np.empty(6)
    kernels.transporter_substep(state_vec, params_vec, torque_right, torque_left,
                                float(vertical_load), deck_force, float(dt), out_accel)
    return out_accel


def steady_state_speed(params, lean):
    """Terminal forward speed for a held lean angle.

    Root of resistance(v) = drive from the quadratic coefficients; zero
    when the drive cannot beat the static term.
    """
    c0, c1, c2 = params.resistance
    drive = params.forward_drive_max * kernels.clip_unit(lean / params.tilt_normalization)
    magnitude = abs(drive)
    if magnitude <= c0:
        return 0.0
    root = (-c1 + np.sqrt(c1 * c1 + 4.0 * c2 * (magnitude - c0))) / (2.0 * c2)
    return np.copysign(root, drive)
