"""Physics kernels for the rider/transporter simulation.

Everything in this module is written in njit-compatible numpy (explicit
loops, preallocated outputs, float64 throughout) so the exact same source
runs compiled under numba or as plain Python when `ATR_PURE_NUMPY=1` is
set or numba is unavailable.  `atr.kernels` applies the decorator.

Semantics
---------
* World frame: x/y horizontal, z up, gravity -z.
* Orientations are intrinsic x-y-z Euler angles (roll, pitch, yaw) with
  rotation matrix R = Rz @ Ry @ Rx mapping body coordinates to world.
* Positive pitch tips the +x (nose) axis downward, which for the
  transporter means "lean forward"; forward drive follows the lean.
* The transporter is a reduced-order model: forward speed, yaw and tilt
  evolve per-axis; an altitude controller replaces ground support.
* The rider is a single rigid trunk with four massless 3-joint legs.
  Joints carry a small inertia proxy so contact loads can deflect them.
* Contact is a penalty model on the deck plane: spring-damper normal
  force plus regularized Coulomb friction.  Velocity-proportional force
  components are capped by the one-step momentum bound m_eff*|v|/dt
  (effective mass of the foot along the force direction); without the
  cap the regularized friction slope exceeds the explicit-integration
  stability limit of the light joint proxy and feet chatter.

State and parameter layouts are flat float64 vectors indexed by the
constants below; wrapper dataclasses in `atr.transporter` / `atr.rider`
do the packing.
"""

import math

import numpy as np

GRAVITY = 9.81

# Transporter kinds.
KIND_SINGLE_DECK = 0  # one rigid deck, tilt steering (roll axis steers)
KIND_SPLIT_DECK = 1   # two half decks pitching independently

# --- transporter state vector ---------------------------------------------
TPS_POS_X = 0
TPS_POS_Y = 1
TPS_POS_Z = 2
TPS_ROLL = 3
TPS_PITCH = 4
TPS_YAW = 5
TPS_FWD_VEL = 6
TPS_ROLL_RATE = 7
TPS_PITCH_RATE = 8
TPS_YAW_RATE = 9
TPS_VERT_VEL = 10
TPS_RIGHT_PITCH = 11
TPS_LEFT_PITCH = 12
TPS_RIGHT_PITCH_RATE = 13
TPS_LEFT_PITCH_RATE = 14
TPS_SIZE = 15

# --- transporter parameter vector ------------------------------------------
TPP_KIND = 0
TPP_MASS = 1
TPP_LENGTH = 2
TPP_WIDTH = 3
TPP_THICKNESS = 4
TPP_INERTIA_ROLL = 5    # single deck: full-plate roll inertia
TPP_INERTIA_PITCH = 6   # split deck: per-half-plate pitch inertia
TPP_INERTIA_YAW = 7     # split deck: combined (parallel-axis) yaw inertia
TPP_FWD_DRIVE_MAX = 8
TPP_YAW_DRIVE_MAX = 9
TPP_TILT_NORM = 10
TPP_SB_KP_A = 11        # single deck: roll;  split deck: right platform
TPP_SB_KP_B = 12        # single deck: pitch; split deck: left platform
TPP_SB_KD_A = 13
TPP_SB_KD_B = 14
TPP_RESIST_0 = 15
TPP_RESIST_1 = 16
TPP_RESIST_2 = 17
TPP_ALT_KP = 18
TPP_ALT_KD = 19
TPP_HOVER_HEIGHT = 20
TPP_FRICTION = 21
TPP_SIZE = 22

# --- rider state vector -----------------------------------------------------
RS_POS = 0       # 3: trunk origin, world
RS_VEL = 3       # 3: trunk velocity, world
RS_EULER = 6     # 3: trunk roll/pitch/yaw
RS_ANGVEL = 9    # 3: trunk angular velocity, body frame
RS_JOINT_POS = 12   # 12
RS_JOINT_VEL = 24   # 12
RS_SIZE = 36

# --- rider parameter vector --------------------------------------------------
RP_MASS = 0             # trunk + payload
RP_INERTIA = 1          # 3: diagonal trunk inertia
RP_COM_OFFSET = 4       # 3: combined CoM offset, body frame
RP_ABDUCT_LEN = 7
RP_THIGH_LEN = 8
RP_SHANK_LEN = 9
RP_JOINT_INERTIA = 10
RP_CONTACT_KP = 11
RP_CONTACT_KD = 12
RP_SLIP_VEL = 13
RP_TORQUE_MAX = 14
RP_BODY_LEN = 15
RP_BODY_WIDTH = 16
RP_BODY_HEIGHT = 17
RP_HIP_OFFSETS = 18     # 12: 4 x (x, y, z), legs ordered FR, RR, FL, RL
RP_JOINT_HOME = 30      # 12
RP_JOINT_MIN = 42       # 12
RP_JOINT_MAX = 54       # 12
RP_PD_KP = 66           # 12
RP_PD_KD = 78           # 12
RP_SIZE = 90

N_LEGS = 4
N_JOINTS = 12

# Fault codes written to out_status[0].
OK = 0
FAULT_NONFINITE = 1


def sign_positive(x):
    """Sign with sign_positive(0) = +1, matching the drive-term convention."""
    if x < 0.0:
        return -1.0
    return 1.0


def clip_unit(x):
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    two_pi = 2.0 * math.pi
    y = (x + math.pi) % two_pi
    if y == 0.0:
        y = two_pi
    return y - math.pi


def rolling_resistance(speed, magnitude, c0, c1, c2):
    """Resistance opposing `speed`; static deadband against |drive| = `magnitude` at rest.

    Returns the signed resistance to subtract from the drive term.
    """
    if speed == 0.0:
        cap = abs(magnitude)
        if c0 < cap:
            return sign_positive(magnitude) * c0
        return sign_positive(magnitude) * cap
    mag = c0 + c1 * abs(speed) + c2 * speed * speed
    return sign_positive(speed) * mag


def euler_to_rot(euler):
    """Rotation matrix R = Rz(yaw) @ Ry(pitch) @ Rx(roll), body-to-world."""
    cr = math.cos(euler[0])
    sr = math.sin(euler[0])
    cp = math.cos(euler[1])
    sp = math.sin(euler[1])
    cy = math.cos(euler[2])
    sy = math.sin(euler[2])
    rot = np.empty((3, 3))
    rot[0, 0] = cy * cp
    rot[0, 1] = cy * sp * sr - sy * cr
    rot[0, 2] = cy * sp * cr + sy * sr
    rot[1, 0] = sy * cp
    rot[1, 1] = sy * sp * sr + cy * cr
    rot[1, 2] = sy * sp * cr - cy * sr
    rot[2, 0] = -sp
    rot[2, 1] = cp * sr
    rot[2, 2] = cp * cr
    return rot


def rot_to_euler(rot):
    """Inverse of euler_to_rot away from the pitch = +-pi/2 singularity."""
    euler = np.empty(3)
    sp = -rot[2, 0]
    if sp > 1.0:
        sp = 1.0
    if sp < -1.0:
        sp = -1.0
    euler[1] = math.asin(sp)
    euler[0] = math.atan2(rot[2, 1], rot[2, 2])
    euler[2] = math.atan2(rot[1, 0], rot[0, 0])
    return euler


def body_rates_to_euler_rates(euler, omega_body):
    """Map body-frame angular velocity to Euler angle rates.

    Singular at |pitch| = pi/2; the denominator is clamped, callers fault
    on the orientation limits long before the clamp matters.
    """
    cr = math.cos(euler[0])
    sr = math.sin(euler[0])
    cp = math.cos(euler[1])
    if abs(cp) < 1e-8:
        cp = 1e-8 if cp >= 0.0 else -1e-8
    tp = math.sin(euler[1]) / cp
    rates = np.empty(3)
    lateral = omega_body[1] * sr + omega_body[2] * cr
    rates[0] = omega_body[0] + lateral * tp
    rates[1] = omega_body[1] * cr - omega_body[2] * sr
    rates[2] = lateral / cp
    return rates


def euler_rates_to_body_rates(euler, rates):
    """Forward map (inverse of body_rates_to_euler_rates)."""
    cr = math.cos(euler[0])
    sr = math.sin(euler[0])
    cp = math.cos(euler[1])
    sp = math.sin(euler[1])
    omega = np.empty(3)
    omega[0] = rates[0] - rates[2] * sp
    omega[1] = rates[1] * cr + rates[2] * cp * sr
    omega[2] = -rates[1] * sr + rates[2] * cp * cr
    return omega


def mat_vec(rot, vec):
    out = np.empty(3)
    out[0] = rot[0, 0] * vec[0] + rot[0, 1] * vec[1] + rot[0, 2] * vec[2]
    out[1] = rot[1, 0] * vec[0] + rot[1, 1] * vec[1] + rot[1, 2] * vec[2]
    out[2] = rot[2, 0] * vec[0] + rot[2, 1] * vec[1] + rot[2, 2] * vec[2]
    return out


def mat_vec_t(rot, vec):
    """rot.T @ vec (world-to-body for a body-to-world rotation)."""
    out = np.empty(3)
    out[0] = rot[0, 0] * vec[0] + rot[1, 0] * vec[1] + rot[2, 0] * vec[2]
    out[1] = rot[0, 1] * vec[0] + rot[1, 1] * vec[1] + rot[2, 1] * vec[2]
    out[2] = rot[0, 2] * vec[0] + rot[1, 2] * vec[1] + rot[2, 2] * vec[2]
    return out


def cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


def leg_forward_kinematics(q, lateral_sign, abduct_len, thigh_len, shank_len):
    """Foot position relative to the hip, body frame.

    foot = Rx(q_ab) @ (Ry(q_hip) @ [0, s*l_ab, -l_thigh]
                       + Ry(q_hip + q_knee) @ [0, 0, -l_shank])
    where s = -1 for right legs and +1 for left legs.
    """
    ch = math.cos(q[1])
    sh = math.sin(q[1])
    ck = math.cos(q[1] + q[2])
    sk = math.sin(q[1] + q[2])
    # Ry(a) @ [x, y, z] = [ x*ca + z*sa, y, -x*sa + z*ca ]
    x = -thigh_len * sh - shank_len * sk
    y = lateral_sign * abduct_len
    z = -thigh_len * ch - shank_len * ck
    ca = math.cos(q[0])
    sa = math.sin(q[0])
    out = np.empty(3)
    out[0] = x
    out[1] = ca * y - sa * z
    out[2] = sa * y + ca * z
    return out


def leg_jacobian(q, lateral_sign, abduct_len, thigh_len, shank_len):
    """d(foot)/d(q), 3x3, body frame, same convention as the FK."""
    ch = math.cos(q[1])
    sh = math.sin(q[1])
    ck = math.cos(q[1] + q[2])
    sk = math.sin(q[1] + q[2])
    x = -thigh_len * sh - shank_len * sk
    y = lateral_sign * abduct_len
    z = -thigh_len * ch - shank_len * ck
    dx_dhip = -thigh_len * ch - shank_len * ck
    dz_dhip = thigh_len * sh + shank_len * sk
    dx_dknee = -shank_len * ck
    dz_dknee = shank_len * sk
    ca = math.cos(q[0])
    sa = math.sin(q[0])
    jac = np.empty((3, 3))
    # column 0: abduction
    jac[0, 0] = 0.0
    jac[1, 0] = -sa * y - ca * z
    jac[2, 0] = ca * y - sa * z
    # column 1: hip pitch
    jac[0, 1] = dx_dhip
    jac[1, 1] = -sa * dz_dhip
    jac[2, 1] = ca * dz_dhip
    # column 2: knee
    jac[0, 2] = dx_dknee
    jac[1, 2] = -sa * dz_dknee
    jac[2, 2] = ca * dz_dknee
    return jac


def _platform_frames(tp_state, tp_par, rot_right, rot_left, omega_right, omega_left):
    """Contact frames and world angular velocities for each deck half.

    For the single deck both outputs are the same full deck frame.  The
    returned angular velocities treat tilt rates as axes of the yawed
    frame (exact in yaw, first order in the small tilt angles).
    """
    yaw = tp_state[TPS_YAW]
    cy = math.cos(yaw)
    sy = math.sin(yaw)
    if int(tp_par[TPP_KIND]) == KIND_SINGLE_DECK:
        e = np.empty(3)
        e[0] = tp_state[TPS_ROLL]
        e[1] = tp_state[TPS_PITCH]
        e[2] = yaw
        rot = euler_to_rot(e)
        for i in range(3):
            for j in range(3):
                rot_right[i, j] = rot[i, j]
                rot_left[i, j] = rot[i, j]
        wr = tp_state[TPS_ROLL_RATE]
        wp = tp_state[TPS_PITCH_RATE]
        omega_right[0] = cy * wr - sy * wp
        omega_right[1] = sy * wr + cy * wp
        omega_right[2] = tp_state[TPS_YAW_RATE]
        for i in range(3):
            omega_left[i] = omega_right[i]
    else:
        er = np.empty(3)
        er[0] = 0.0
        er[1] = tp_state[TPS_RIGHT_PITCH]
        er[2] = yaw
        rr = euler_to_rot(er)
        el = np.empty(3)
        el[0] = 0.0
        el[1] = tp_state[TPS_LEFT_PITCH]
        el[2] = yaw
        rl = euler_to_rot(el)
        for i in range(3):
            for j in range(3):
                rot_right[i, j] = rr[i, j]
                rot_left[i, j] = rl[i, j]
        omega_right[0] = -sy * tp_state[TPS_RIGHT_PITCH_RATE]
        omega_right[1] = cy * tp_state[TPS_RIGHT_PITCH_RATE]
        omega_right[2] = tp_state[TPS_YAW_RATE]
        omega_left[0] = -sy * tp_state[TPS_LEFT_PITCH_RATE]
        omega_left[1] = cy * tp_state[TPS_LEFT_PITCH_RATE]
        omega_left[2] = tp_state[TPS_YAW_RATE]


def platform_world_velocity(tp_state):
    """Pivot translational velocity in the world frame."""
    out = np.empty(3)
    yaw = tp_state[TPS_YAW]
    out[0] = tp_state[TPS_FWD_VEL] * math.cos(yaw)
    out[1] = tp_state[TPS_FWD_VEL] * math.sin(yaw)
    out[2] = tp_state[TPS_VERT_VEL]
    return out


def platform_torque(foot_positions, foot_forces):
    """Net moment about the pivot: sum of r x f over the feet.

    Positions and forces share one frame; the result is in that frame.
    A 50 N push straight down at (0.1, 0, 0) yields (0, 5, 0): pressing
    the nose tips the nose down (forward lean).
    """
    torque = np.zeros(3)
    for i in range(foot_positions.shape[0]):
        torque[0] += foot_positions[i, 1] * foot_forces[i, 2] - foot_positions[i, 2] * foot_forces[i, 1]
        torque[1] += foot_positions[i, 2] * foot_forces[i, 0] - foot_positions[i, 0] * foot_forces[i, 2]
        torque[2] += foot_positions[i, 0] * foot_forces[i, 1] - foot_positions[i, 1] * foot_forces[i, 0]
    return torque


def _effective_inv_mass(direction_body, foot_body, jac, inv_mass, inv_inertia, inv_joint_inertia):
    """Apparent inverse mass of a foot along a body-frame direction.

    Combines trunk translation, trunk rotation about the foot lever arm,
    and the three joint DoFs behind the foot.  Used to bound
    velocity-proportional contact forces by the one-step momentum limit.
    """
    lever = cross(foot_body, direction_body)
    inv_m = inv_mass
    inv_m += lever[0] * lever[0] * inv_inertia[0]
    inv_m += lever[1] * lever[1] * inv_inertia[1]
    inv_m += lever[2] * lever[2] * inv_inertia[2]
    for j in range(3):
        proj = (jac[0, j] * direction_body[0]
                + jac[1, j] * direction_body[1]
                + jac[2, j] * direction_body[2])
        inv_m += proj * proj * inv_joint_inertia
    return inv_m


def compute_contacts(tp_state, tp_par, rd_state, rd_par, dt,
                     out_force, out_flag, out_foot_world, out_foot_body, out_jac):
    """Deck contact forces for all four feet.

    out_force[i] is the force the deck applies TO foot i (world frame);
    the foot pushes on the deck with the opposite force.  out_flag[i] is
    1.0 when the normal force exceeds 1 N.  Feet 0-1 can only touch the
    right half deck, feet 2-3 the left (identical halves for the single
    deck).  `dt` feeds the stability cap on damping-like terms.
    """
    rot_right = np.empty((3, 3))
    rot_left = np.empty((3, 3))
    omega_right = np.empty(3)
    omega_left = np.empty(3)
    _platform_frames(tp_state, tp_par, rot_right, rot_left, omega_right, omega_left)
    pivot = np.empty(3)
    pivot[0] = tp_state[TPS_POS_X]
    pivot[1] = tp_state[TPS_POS_Y]
    pivot[2] = tp_state[TPS_POS_Z]
    pivot_vel = platform_world_velocity(tp_state)

    body_euler = rd_state[RS_EULER:RS_EULER + 3]
    rot_body = euler_to_rot(body_euler)
    body_pos = rd_state[RS_POS:RS_POS + 3]
    body_vel = rd_state[RS_VEL:RS_VEL + 3]
    omega_body = rd_state[RS_ANGVEL:RS_ANGVEL + 3]

    half_len = 0.5 * tp_par[TPP_LENGTH]
    half_wid = 0.5 * tp_par[TPP_WIDTH]
    split = int(tp_par[TPP_KIND]) == KIND_SPLIT_DECK
    kc = rd_par[RP_CONTACT_KP]
    dc = rd_par[RP_CONTACT_KD]
    slip_vel = rd_par[RP_SLIP_VEL]
    friction = tp_par[TPP_FRICTION]
    inv_mass = 1.0 / rd_par[RP_MASS]
    inv_inertia = np.empty(3)
    inv_inertia[0] = 1.0 / rd_par[RP_INERTIA]
    inv_inertia[1] = 1.0 / rd_par[RP_INERTIA + 1]
    inv_inertia[2] = 1.0 / rd_par[RP_INERTIA + 2]
    inv_joint = 1.0 / rd_par[RP_JOINT_INERTIA]

    for leg in range(N_LEGS):
        lateral_sign = -1.0 if leg < 2 else 1.0
        q = rd_state[RS_JOINT_POS + 3 * leg:RS_JOINT_POS + 3 * leg + 3]
        qd = rd_state[RS_JOINT_VEL + 3 * leg:RS_JOINT_VEL + 3 * leg + 3]
        rel = leg_forward_kinematics(q, lateral_sign, rd_par[RP_ABDUCT_LEN],
                                     rd_par[RP_THIGH_LEN], rd_par[RP_SHANK_LEN])
        jac = leg_jacobian(q, lateral_sign, rd_par[RP_ABDUCT_LEN],
                           rd_par[RP_THIGH_LEN], rd_par[RP_SHANK_LEN])
        foot_body = np.empty(3)
        for i in range(3):
            foot_body[i] = rd_par[RP_HIP_OFFSETS + 3 * leg + i] + rel[i]
            for j in range(3):
                out_jac[leg, i, j] = jac[i, j]
        foot_world = mat_vec(rot_body, foot_body)
        for i in range(3):
            foot_world[i] += body_pos[i]
            out_foot_world[leg, i] = foot_world[i]
            out_foot_body[leg, i] = foot_body[i]

        # foot velocity: trunk + rotation + joint motion
        local_vel = np.empty(3)
        for i in range(3):
            local_vel[i] = (jac[i, 0] * qd[0] + jac[i, 1] * qd[1] + jac[i, 2] * qd[2])
        spin = cross(omega_body, foot_body)
        for i in range(3):
            local_vel[i] += spin[i]
        foot_vel = mat_vec(rot_body, local_vel)
        for i in range(3):
            foot_vel[i] += body_vel[i]

        if split and leg >= 2:
            rot_deck = rot_left
            omega_deck = omega_left
        else:
            rot_deck = rot_right
            omega_deck = omega_right

        rel_world = np.empty(3)
        for i in range(3):
            rel_world[i] = foot_world[i] - pivot[i]
        local = mat_vec_t(rot_deck, rel_world)

        out_flag[leg] = 0.0
        for i in range(3):
            out_force[leg, i] = 0.0

        penetration = -local[2]
        if penetration <= 0.0:
            continue
        if local[0] < -half_len or local[0] > half_len:
            continue
        if split:
            if leg < 2:
                if local[1] < -half_wid or local[1] > 0.0:
                    continue
            else:
                if local[1] < 0.0 or local[1] > half_wid:
                    continue
        else:
            if local[1] < -half_wid or local[1] > half_wid:
                continue

        deck_point_vel = cross(omega_deck, rel_world)
        rel_vel = np.empty(3)
        for i in range(3):
            deck_point_vel[i] += pivot_vel[i]
            rel_vel[i] = foot_vel[i] - deck_point_vel[i]

        normal = np.empty(3)
        normal[0] = rot_deck[0, 2]
        normal[1] = rot_deck[1, 2]
        normal[2] = rot_deck[2, 2]
        sep_vel = rel_vel[0] * normal[0] + rel_vel[1] * normal[1] + rel_vel[2] * normal[2]

        normal_body = mat_vec_t(rot_body, normal)
        inv_m_n = _effective_inv_mass(normal_body, foot_body, jac, inv_mass, inv_inertia, inv_joint)
        dc_eff = dc
        cap = 1.0 / (inv_m_n * dt)
        if dc_eff > cap:
            dc_eff = cap
        normal_force = kc * penetration - dc_eff * sep_vel
        if normal_force <= 0.0:
            continue

        tangent = np.empty(3)
        for i in range(3):
            tangent[i] = rel_vel[i] - sep_vel * normal[i]
        tangent_speed = math.sqrt(tangent[0] ** 2 + tangent[1] ** 2 + tangent[2] ** 2)
        friction_mag = 0.0
        if tangent_speed > 1e-12:
            tangent_body = mat_vec_t(rot_body, tangent)
            for i in range(3):
                tangent_body[i] /= tangent_speed
            inv_m_t = _effective_inv_mass(tangent_body, foot_body, jac, inv_mass, inv_inertia, inv_joint)
            slope = friction * normal_force / slip_vel
            cap_t = 1.0 / (inv_m_t * dt)
            if slope > cap_t:
                slope = cap_t
            friction_mag = slope * tangent_speed
            limit = friction * normal_force
            if friction_mag > limit:
                friction_mag = limit

        for i in range(3):
            force = normal_force * normal[i]
            if tangent_speed > 1e-12:
                force -= friction_mag * tangent[i] / tangent_speed
            out_force[leg, i] = force
        if normal_force > 1.0:
            out_flag[leg] = 1.0


def _check_collision(tp_state, tp_par, rd_state, rd_par):
    """1.0 when any trunk box corner penetrates a deck top surface."""
    rot_right = np.empty((3, 3))
    rot_left = np.empty((3, 3))
    omega_right = np.empty(3)
    omega_left = np.empty(3)
    _platform_frames(tp_state, tp_par, rot_right, rot_left, omega_right, omega_left)
    rot_body = euler_to_rot(rd_state[RS_EULER:RS_EULER + 3])
    half_len = 0.5 * tp_par[TPP_LENGTH]
    half_wid = 0.5 * tp_par[TPP_WIDTH]
    split = int(tp_par[TPP_KIND]) == KIND_SPLIT_DECK
    hx = 0.5 * rd_par[RP_BODY_LEN]
    hy = 0.5 * rd_par[RP_BODY_WIDTH]
    hz = 0.5 * rd_par[RP_BODY_HEIGHT]
    corner_b = np.empty(3)
    for cx in range(2):
        for cy in range(2):
            for cz in range(2):
                corner_b[0] = hx if cx == 1 else -hx
                corner_b[1] = hy if cy == 1 else -hy
                corner_b[2] = hz if cz == 1 else -hz
                corner_w = mat_vec(rot_body, corner_b)
                corner_w[0] += rd_state[RS_POS]
                corner_w[1] += rd_state[RS_POS + 1]
                corner_w[2] += rd_state[RS_POS + 2]
                corner_w[0] -= tp_state[TPS_POS_X]
                corner_w[1] -= tp_state[TPS_POS_Y]
                corner_w[2] -= tp_state[TPS_POS_Z]
                for side in range(2):
                    if side == 0:
                        local = mat_vec_t(rot_right, corner_w)
                        if split and local[1] > 0.0:
                            continue
                    else:
                        if not split:
                            continue
                        local = mat_vec_t(rot_left, corner_w)
                        if local[1] < 0.0:
                            continue
                    if (local[2] < 0.0 and -half_len <= local[0] <= half_len
                            and -half_wid <= local[1] <= half_wid):
                        return 1.0
    return 0.0


def transporter_substep(tp_state, tp_par, torque_right, torque_left,
                        vertical_load, deck_force, dt, out_accel):
    """One semi-implicit integration step of the reduced transporter.

    torque_right/torque_left: contact moments about the pivot in the
    respective deck frames (identical full-deck moment twice for the
    single deck; only the right one is used then).  vertical_load is the
    world-z contact force the feet apply to the deck.  deck_force is an
    external perturbation; its heading component drives the forward
    equation, its z component the altitude loop, the lateral component
    has no DoF to act on.  out_accel receives (linear world xyz,
    angular xyz) for smoothness penalties.
    """
    yaw = tp_state[TPS_YAW]
    cy = math.cos(yaw)
    sy = math.sin(yaw)
    heading_force = deck_force[0] * cy + deck_force[1] * sy
    mass = tp_par[TPP_MASS]
    tilt_norm = tp_par[TPP_TILT_NORM]
    single = int(tp_par[TPP_KIND]) == KIND_SINGLE_DECK

    if single:
        lean = tp_state[TPS_PITCH]
        steer = clip_unit(-tp_state[TPS_ROLL] / tilt_norm)
    else:
        avg = 0.5 * (tp_state[TPS_RIGHT_PITCH] + tp_state[TPS_LEFT_PITCH])
        dif = 0.5 * (tp_state[TPS_RIGHT_PITCH] - tp_state[TPS_LEFT_PITCH])
        lean = avg
        steer = clip_unit(-dif / tilt_norm)

    fwd_drive = tp_par[TPP_FWD_DRIVE_MAX] * clip_unit(lean / tilt_norm)
    fwd_accel = (fwd_drive
                 - rolling_resistance(tp_state[TPS_FWD_VEL], fwd_drive,
                                      tp_par[TPP_RESIST_0], tp_par[TPP_RESIST_1], tp_par[TPP_RESIST_2])
                 + heading_force) / mass

    yaw_drive = tp_par[TPP_YAW_DRIVE_MAX] * sign_positive(lean) * steer
    yaw_accel = (yaw_drive
                 - rolling_resistance(tp_state[TPS_YAW_RATE], yaw_drive,
                                      tp_par[TPP_RESIST_0], tp_par[TPP_RESIST_1], tp_par[TPP_RESIST_2])
                 ) / tp_par[TPP_INERTIA_YAW]

    alt_accel = (-tp_par[TPP_ALT_KP] * (tp_state[TPS_POS_Z] - tp_par[TPP_HOVER_HEIGHT])
                 - tp_par[TPP_ALT_KD] * tp_state[TPS_VERT_VEL]
                 + (vertical_load + deck_force[2]) / mass)

    if single:
        roll_accel = (-tp_par[TPP_SB_KP_A] * tp_state[TPS_ROLL]
                      - tp_par[TPP_SB_KD_A] * tp_state[TPS_ROLL_RATE]
                      + torque_right[0]) / tp_par[TPP_INERTIA_ROLL]
        pitch_accel = (-tp_par[TPP_SB_KP_B] * tp_state[TPS_PITCH]
                       - tp_par[TPP_SB_KD_B] * tp_state[TPS_PITCH_RATE]
                       + torque_right[1]) / tp_par[TPP_INERTIA_PITCH]

        tp_state[TPS_FWD_VEL] += dt * fwd_accel
        tp_state[TPS_ROLL_RATE] += dt * roll_accel
        tp_state[TPS_PITCH_RATE] += dt * pitch_accel
        tp_state[TPS_YAW_RATE] += dt * yaw_accel
        tp_state[TPS_VERT_VEL] += dt * alt_accel
        tp_state[TPS_ROLL] += dt * tp_state[TPS_ROLL_RATE]
        tp_state[TPS_PITCH] += dt * tp_state[TPS_PITCH_RATE]
        mean_pitch_accel = pitch_accel
        out_accel[3] = roll_accel
    else:
        right_accel = (-tp_par[TPP_SB_KP_A] * tp_state[TPS_RIGHT_PITCH]
                       - tp_par[TPP_SB_KD_A] * tp_state[TPS_RIGHT_PITCH_RATE]
                       + torque_right[1]) / tp_par[TPP_INERTIA_PITCH]
        left_accel = (-tp_par[TPP_SB_KP_B] * tp_state[TPS_LEFT_PITCH]
                      - tp_par[TPP_SB_KD_B] * tp_state[TPS_LEFT_PITCH_RATE]
                      + torque_left[1]) / tp_par[TPP_INERTIA_PITCH]

        tp_state[TPS_FWD_VEL] += dt * fwd_accel
        tp_state[TPS_RIGHT_PITCH_RATE] += dt * right_accel
        tp_state[TPS_LEFT_PITCH_RATE] += dt * left_accel
        tp_state[TPS_YAW_RATE] += dt * yaw_accel
        tp_state[TPS_VERT_VEL] += dt * alt_accel
        tp_state[TPS_RIGHT_PITCH] += dt * tp_state[TPS_RIGHT_PITCH_RATE]
        tp_state[TPS_LEFT_PITCH] += dt * tp_state[TPS_LEFT_PITCH_RATE]
        tp_state[TPS_ROLL] = 0.0
        tp_state[TPS_ROLL_RATE] = 0.0
        mean_pitch_accel = 0.5 * (right_accel + left_accel)
        out_accel[3] = 0.0

    tp_state[TPS_YAW] += dt * tp_state[TPS_YAW_RATE]
    cy = math.cos(tp_state[TPS_YAW])
    sy = math.sin(tp_state[TPS_YAW])
    tp_state[TPS_POS_X] += dt * tp_state[TPS_FWD_VEL] * cy
    tp_state[TPS_POS_Y] += dt * tp_state[TPS_FWD_VEL] * sy
    tp_state[TPS_POS_Z] += dt * tp_state[TPS_VERT_VEL]

    out_accel[0] = fwd_accel * cy
    out_accel[1] = fwd_accel * sy
    out_accel[2] = alt_accel
    out_accel[4] = mean_pitch_accel
    out_accel[5] = yaw_accel


def rider_substep(rd_state, rd_par, joint_targets, contact_forces,
                  foot_body, jacobians, body_force, dt, out_torque):
    """One semi-implicit step of trunk + joint dynamics.

    contact_forces are deck-on-foot forces in the world frame (from
    compute_contacts).  body_force is an external world-frame
    perturbation at the trunk origin.  out_torque receives the applied
    joint torques (post clamp).
    """
    rot_body = euler_to_rot(rd_state[RS_EULER:RS_EULER + 3])
    mass = rd_par[RP_MASS]
    torque_max = rd_par[RP_TORQUE_MAX]
    inv_joint = 1.0 / rd_par[RP_JOINT_INERTIA]

    total_force = np.empty(3)
    total_force[0] = body_force[0]
    total_force[1] = body_force[1]
    total_force[2] = body_force[2] - mass * GRAVITY

    gravity_world = np.empty(3)
    gravity_world[0] = 0.0
    gravity_world[1] = 0.0
    gravity_world[2] = -mass * GRAVITY
    gravity_body = mat_vec_t(rot_body, gravity_world)
    com = rd_par[RP_COM_OFFSET:RP_COM_OFFSET + 3]
    total_torque = cross(com, gravity_body)

    joint_acc = np.empty(N_JOINTS)
    for leg in range(N_LEGS):
        force_w = contact_forces[leg]
        total_force[0] += force_w[0]
        total_force[1] += force_w[1]
        total_force[2] += force_w[2]
        force_b = mat_vec_t(rot_body, force_w)
        lever = cross(foot_body[leg], force_b)
        total_torque[0] += lever[0]
        total_torque[1] += lever[1]
        total_torque[2] += lever[2]
        for j in range(3):
            idx = 3 * leg + j
            err = joint_targets[idx] - rd_state[RS_JOINT_POS + idx]
            torque = (rd_par[RP_PD_KP + idx] * err
                      - rd_par[RP_PD_KD + idx] * rd_state[RS_JOINT_VEL + idx])
            if torque > torque_max:
                torque = torque_max
            elif torque < -torque_max:
                torque = -torque_max
            out_torque[idx] = torque
            # load transmitted to the joint: the foot pushes back on the
            # deck, so the generalized force is -J^T f_deck = +J^T f_foot
            load = (jacobians[leg, 0, j] * force_b[0]
                    + jacobians[leg, 1, j] * force_b[1]
                    + jacobians[leg, 2, j] * force_b[2])
            joint_acc[idx] = (torque + load) * inv_joint

    inertia = rd_par[RP_INERTIA:RP_INERTIA + 3]
    omega = rd_state[RS_ANGVEL:RS_ANGVEL + 3]
    gyro = np.empty(3)
    gyro[0] = omega[1] * omega[2] * (inertia[1] - inertia[2])
    gyro[1] = omega[2] * omega[0] * (inertia[2] - inertia[0])
    gyro[2] = omega[0] * omega[1] * (inertia[0] - inertia[1])

    for i in range(3):
        rd_state[RS_VEL + i] += dt * total_force[i] / mass
        rd_state[RS_ANGVEL + i] += dt * (total_torque[i] + gyro[i]) / inertia[i]
    for i in range(3):
        rd_state[RS_POS + i] += dt * rd_state[RS_VEL + i]
    rates = body_rates_to_euler_rates(rd_state[RS_EULER:RS_EULER + 3],
                                      rd_state[RS_ANGVEL:RS_ANGVEL + 3])
    for i in range(3):
        rd_state[RS_EULER + i] += dt * rates[i]

    for idx in range(N_JOINTS):
        rd_state[RS_JOINT_VEL + idx] += dt * joint_acc[idx]
        rd_state[RS_JOINT_POS + idx] += dt * rd_state[RS_JOINT_VEL + idx]
        lo = rd_par[RP_JOINT_MIN + idx]
        hi = rd_par[RP_JOINT_MAX + idx]
        if rd_state[RS_JOINT_POS + idx] < lo:
            rd_state[RS_JOINT_POS + idx] = lo
            if rd_state[RS_JOINT_VEL + idx] < 0.0:
                rd_state[RS_JOINT_VEL + idx] = 0.0
        elif rd_state[RS_JOINT_POS + idx] > hi:
            rd_state[RS_JOINT_POS + idx] = hi
            if rd_state[RS_JOINT_VEL + idx] > 0.0:
                rd_state[RS_JOINT_VEL + idx] = 0.0


def control_step(tp_state, rd_state, tp_par, rd_par, joint_targets,
                 body_force, deck_force, dt, substeps,
                 out_force, out_flag, out_foot_world, out_torque,
                 out_platform_accel, out_status):
    """Advance the coupled system by `substeps` physics steps of size dt.

    Contact/force outputs reflect the final substep; out_status[0] is a
    fault code (non-finite state), out_status[1] a sticky trunk/deck
    collision flag over the window.
    """
    foot_body = np.empty((N_LEGS, 3))
    jacobians = np.empty((N_LEGS, 3, 3))
    rot_right = np.empty((3, 3))
    rot_left = np.empty((3, 3))
    omega_right = np.empty(3)
    omega_left = np.empty(3)
    deck_force_right = np.empty((N_LEGS, 3))
    positions_right = np.empty((N_LEGS, 3))
    out_status[0] = OK
    out_status[1] = 0

    for _ in range(substeps):
        compute_contacts(tp_state, tp_par, rd_state, rd_par, dt,
                         out_force, out_flag, out_foot_world, foot_body, jacobians)

        _platform_frames(tp_state, tp_par, rot_right, rot_left, omega_right, omega_left)
        split = int(tp_par[TPP_KIND]) == KIND_SPLIT_DECK
        vertical_load = 0.0
        n_right = 0
        torque_left = np.zeros(3)
        for leg in range(N_LEGS):
            vertical_load -= out_force[leg, 2]
        # moments about the pivot from deck-on-deck reaction (r x f with
        # f the force the feet apply), accumulated per half in its frame
        for leg in range(N_LEGS):
            rel = np.empty(3)
            rel[0] = out_foot_world[leg, 0] - tp_state[TPS_POS_X]
            rel[1] = out_foot_world[leg, 1] - tp_state[TPS_POS_Y]
            rel[2] = out_foot_world[leg, 2] - tp_state[TPS_POS_Z]
            if split and leg >= 2:
                local = mat_vec_t(rot_left, rel)
                force_l = mat_vec_t(rot_left, -out_force[leg])
                lever = cross(local, force_l)
                torque_left[0] += lever[0]
                torque_left[1] += lever[1]
                torque_left[2] += lever[2]
            else:
                local = mat_vec_t(rot_right, rel)
                force_r = mat_vec_t(rot_right, -out_force[leg])
                for i in range(3):
                    deck_force_right[n_right, i] = force_r[i]
                    positions_right[n_right, i] = local[i]
                n_right += 1
        torque_right = platform_torque(positions_right[:n_right], deck_force_right[:n_right])

        transporter_substep(tp_state, tp_par, torque_right, torque_left,
                            vertical_load, deck_force, dt, out_platform_accel)
        rider_substep(rd_state, rd_par, joint_targets, out_force,
                      foot_body, jacobians, body_force, dt, out_torque)

        if _check_collision(tp_state, tp_par, rd_state, rd_par) > 0.0:
            out_status[1] = 1

    finite = True
    for i in range(TPS_SIZE):
        if not math.isfinite(tp_state[i]):
            finite = False
    for i in range(RS_SIZE):
        if not math.isfinite(rd_state[i]):
            finite = False
    if not finite:
        out_status[0] = FAULT_NONFINITE
