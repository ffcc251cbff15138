"""Per-step reward terms for the riding task.

Eighteen terms: two tracking carrots, six stability shapers, and ten
regularizers, combined with fixed non-negative weights (penalties carry
their minus sign in the term, not the weight).  Terms are reported
individually (r0..r17 in the training log) and summed for the scalar
reward.  All inputs come in one flat bundle so the terms stay pure and
unit-testable without an environment.
"""

from dataclasses import dataclass

import numpy as np

from .mathutils import wrap_angle

# k0..k19; terms r12 consumes k12-k14, r13 k15, r14 k16, r15 k17, r16 k18, r17 k19
DEFAULT_WEIGHTS = np.array([
    8.0, 8.0, 30.0, 4.0, 1.0, 1.0, 2.0, 1.0, 1.0, 0.9,
    1.0e-3, 1.0e-5, 1.0e-4, 1.0e-4, 1.0e-7, 1.0e-2, 1.0e-4, 1.0e-2, 10.0, 10.0,
])

FORCE_TOLERANCE = 100.0  # N, per-foot overage threshold
TRACKING_SCALE = 0.5     # exponential kernel width for both commands
MIN_SUPPORT_FEET = 3     # fewer contacts -> degenerate support polygon

TERM_NAMES = [
    "forward_tracking", "yaw_tracking", "position_alignment", "heading_alignment",
    "com_support", "pressure_support", "contact_count", "ride_height",
    "platform_smoothness", "body_orientation", "body_velocity", "action_smoothness",
    "joint_smoothness", "posture", "energy", "contact_force", "collision", "termination",
]

N_TERMS = len(TERM_NAMES)


@dataclass
class RewardInputs:
    command: np.ndarray            # (2,) forward speed, yaw rate
    platform_forward_speed: float
    platform_yaw_rate: float
    platform_accel: np.ndarray     # (6,) linear world + angular
    platform_planar: np.ndarray    # (2,) pivot xy
    platform_yaw: float
    platform_height: float         # pivot z (deck top)
    body_planar: np.ndarray        # (2,) trunk xy
    body_yaw: float
    body_height: float
    body_roll_pitch: np.ndarray    # (2,)
    body_angvel: np.ndarray        # (3,) trunk frame
    body_vertical_speed: float
    com_planar: np.ndarray         # (2,) combined CoM ground projection
    foot_planar: np.ndarray        # (4, 2) world xy
    contact_flags: np.ndarray      # (4,)
    contact_forces: np.ndarray     # (4, 3) deck-on-foot, world
    joint_pos: np.ndarray          # (12,)
    joint_vel: np.ndarray
    joint_acc: np.ndarray
    joint_torque: np.ndarray
    joint_home: np.ndarray
    action: np.ndarray             # (12,)
    prev_action: np.ndarray
    desired_height: float          # above deck top
    collision: bool
    terminated: bool


def convex_hull(points):
    """Monotone-chain hull, counterclockwise, for tiny point sets."""
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) <= 2:
        return [np.array(p) for p in pts]
    lower = []
    for p in pts:
        while len(lower) >= 2 and _turn(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and _turn(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return [np.array(p) for p in lower[:-1] + upper[:-1]]


def _turn(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def point_in_polygon(point, vertices, tol=1e-9):
    """Inside-or-on test for a convex CCW polygon; degenerate -> False."""
    if len(vertices) < 3:
        return False
    for i in range(len(vertices)):
        a = vertices[i]
        b = vertices[(i + 1) % len(vertices)]
        if _turn(a, b, point) < -tol:
            return False
    return True


def zero_moment_point(foot_planar, normal_forces):
    """Pressure-weighted contact centroid; None when nearly unloaded."""
    total = float(np.sum(normal_forces))
    if total < 1.0:
        return None
    xy = np.zeros(2)
    for i in range(len(normal_forces)):
        xy += normal_forces[i] * foot_planar[i]
    return xy / total


def compute_rewards(inputs, weights=None):
    """All reward terms as an (18,) vector; total = vector sum."""
    k = DEFAULT_WEIGHTS if weights is None else np.asarray(weights, dtype=float)
    terms = np.zeros(N_TERMS)

    terms[0] = k[0] * np.exp(-abs(inputs.platform_forward_speed - inputs.command[0]) / TRACKING_SCALE)
    terms[1] = k[1] * np.exp(-abs(inputs.platform_yaw_rate - inputs.command[1]) / TRACKING_SCALE)

    offset = inputs.body_planar - inputs.platform_planar
    terms[2] = -k[2] * np.linalg.norm(offset)
    terms[3] = -k[3] * abs(wrap_angle(inputs.body_yaw - inputs.platform_yaw))

    in_contact = inputs.contact_flags > 0.5
    support = [inputs.foot_planar[i] for i in range(4) if in_contact[i]]
    degenerate = len(support) < MIN_SUPPORT_FEET
    hull = convex_hull(support) if not degenerate else []
    com_ok = not degenerate and point_in_polygon(inputs.com_planar, hull)
    terms[4] = -k[4] * (0.0 if com_ok else 1.0)

    normal_forces = np.maximum(inputs.contact_forces[:, 2], 0.0)
    pressure_point = zero_moment_point(inputs.foot_planar, normal_forces)
    pressure_ok = (not degenerate and pressure_point is not None
                   and point_in_polygon(pressure_point, hull))
    terms[5] = -k[5] * (0.0 if pressure_ok else 1.0)

    terms[6] = -k[6] * (4.0 - float(np.sum(in_contact)))
    terms[7] = -k[7] * abs(inputs.body_height - inputs.platform_height - inputs.desired_height)
    terms[8] = -k[8] * (np.linalg.norm(inputs.platform_accel[:3])
                        + np.linalg.norm(inputs.platform_accel[3:]))
    terms[9] = -k[9] * np.linalg.norm(inputs.body_roll_pitch)
    terms[10] = -k[10] * (np.linalg.norm(inputs.body_angvel[:2]) + abs(inputs.body_vertical_speed))
    terms[11] = -k[11] * np.linalg.norm(inputs.action - inputs.prev_action)
    terms[12] = -(k[12] * np.linalg.norm(inputs.joint_torque)
                  + k[13] * np.linalg.norm(inputs.joint_vel)
                  + k[14] * np.linalg.norm(inputs.joint_acc))
    terms[13] = -k[15] * np.linalg.norm(inputs.joint_pos - inputs.joint_home)
    terms[14] = -k[16] * float(np.sum(np.maximum(inputs.joint_torque * inputs.joint_vel, 0.0)))
    force_mag = np.linalg.norm(inputs.contact_forces, axis=1)
    terms[15] = -k[17] * float(np.sum(np.maximum(force_mag - FORCE_TOLERANCE, 0.0)))
    terms[16] = -k[18] * (1.0 if inputs.collision else 0.0)
    terms[17] = -k[19] * (1.0 if inputs.terminated else 0.0)
    return terms
