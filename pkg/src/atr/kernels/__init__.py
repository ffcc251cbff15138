"""Kernel dispatch: numba-compiled by default, pure numpy on request.

Set ``ATR_PURE_NUMPY=1`` to skip compilation and run the identical
Python source directly (the fallback path); the flag is read once at
import.  ``USING_NUMBA`` reports which path is live.  The compiled
functions keep their Python originals on ``.py_func``.
"""

import os

from . import core

_COMPILED_NAMES = [
    "sign_positive",
    "clip_unit",
    "wrap_angle",
    "rolling_resistance",
    "euler_to_rot",
    "rot_to_euler",
    "body_rates_to_euler_rates",
    "euler_rates_to_body_rates",
    "mat_vec",
    "mat_vec_t",
    "cross",
    "leg_forward_kinematics",
    "leg_jacobian",
    "_platform_frames",
    "platform_world_velocity",
    "platform_torque",
    "_effective_inv_mass",
    "compute_contacts",
    "_check_collision",
    "transporter_substep",
    "rider_substep",
    "control_step",
]

USING_NUMBA = False
if os.environ.get("ATR_PURE_NUMPY", "0") not in ("1", "true", "yes"):
    try:
        import numba
    except ImportError:
        numba = None
    if numba is not None:
        for _name in _COMPILED_NAMES:
            setattr(core, _name, numba.njit(cache=True)(getattr(core, _name)))
        USING_NUMBA = True

sign_positive = core.sign_positive
clip_unit = core.clip_unit
wrap_angle = core.wrap_angle
rolling_resistance = core.rolling_resistance
euler_to_rot = core.euler_to_rot
rot_to_euler = core.rot_to_euler
body_rates_to_euler_rates = core.body_rates_to_euler_rates
euler_rates_to_body_rates = core.euler_rates_to_body_rates
mat_vec = core.mat_vec
mat_vec_t = core.mat_vec_t
cross = core.cross
leg_forward_kinematics = core.leg_forward_kinematics
leg_jacobian = core.leg_jacobian
platform_world_velocity = core.platform_world_velocity
platform_torque = core.platform_torque
compute_contacts = core.compute_contacts
transporter_substep = core.transporter_substep
rider_substep = core.rider_substep
control_step = core.control_step

GRAVITY = core.GRAVITY
KIND_SINGLE_DECK = core.KIND_SINGLE_DECK
KIND_SPLIT_DECK = core.KIND_SPLIT_DECK
