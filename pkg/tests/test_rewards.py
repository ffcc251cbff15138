"""Hand-computed fixtures for every reward term, plus hull/pressure helpers.

The baseline state tracks both commands perfectly with a symmetric
four-foot stance, so every penalty is exactly zero and the two carrots
are at their ceiling.  Each fixture then perturbs one input and checks
the term against a frozen value.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atr.rewards import (DEFAULT_WEIGHTS, N_TERMS, TERM_NAMES, RewardInputs,
                         compute_rewards, convex_hull, point_in_polygon,
                         zero_moment_point)

SQUARE_FEET = np.array([[0.2, -0.15], [-0.2, -0.15], [0.2, 0.15], [-0.2, 0.15]])


def baseline(**overrides):
    inputs = RewardInputs(
        command=np.zeros(2),
        platform_forward_speed=0.0,
        platform_yaw_rate=0.0,
        platform_accel=np.zeros(6),
        platform_planar=np.zeros(2),
        platform_yaw=0.0,
        platform_height=0.15,
        body_planar=np.zeros(2),
        body_yaw=0.0,
        body_height=0.40,
        body_roll_pitch=np.zeros(2),
        body_angvel=np.zeros(3),
        body_vertical_speed=0.0,
        com_planar=np.zeros(2),
        foot_planar=SQUARE_FEET.copy(),
        contact_flags=np.ones(4),
        contact_forces=np.tile([0.0, 0.0, 30.0], (4, 1)),
        joint_pos=np.zeros(12),
        joint_vel=np.zeros(12),
        joint_acc=np.zeros(12),
        joint_torque=np.zeros(12),
        joint_home=np.zeros(12),
        action=np.zeros(12),
        prev_action=np.zeros(12),
        desired_height=0.25,
        collision=False,
        terminated=False,
    )
    for name, value in overrides.items():
        setattr(inputs, name, value)
    return inputs


def test_default_weights_are_frozen():
    expect = [8.0, 8.0, 30.0, 4.0, 1.0, 1.0, 2.0, 1.0, 1.0, 0.9,
              1e-3, 1e-5, 1e-4, 1e-4, 1e-7, 1e-2, 1e-4, 1e-2, 10.0, 10.0]
    assert DEFAULT_WEIGHTS.tolist() == expect
    assert len(TERM_NAMES) == N_TERMS == 18


def test_baseline_has_full_carrots_and_no_penalties():
    terms = compute_rewards(baseline())
    assert terms[0] == 8.0
    assert terms[1] == 8.0
    assert np.all(terms[2:] == 0.0)
    assert terms.sum() == 16.0


def test_forward_tracking_at_half_speed_error():
    terms = compute_rewards(baseline(platform_forward_speed=0.5))
    assert terms[0] == pytest.approx(2.9430355293715387, abs=1e-12)  # 8/e


def test_yaw_tracking_at_quarter_rate_error():
    terms = compute_rewards(baseline(platform_yaw_rate=0.25))
    assert terms[1] == pytest.approx(4.852245277701067, abs=1e-12)  # 8 e^-1/2


def test_tracking_kernel_is_symmetric_in_the_error_sign():
    fast = compute_rewards(baseline(platform_forward_speed=0.5))
    slow = compute_rewards(baseline(platform_forward_speed=-0.5))
    assert fast[0] == slow[0]


def test_position_alignment_charges_the_planar_offset():
    terms = compute_rewards(baseline(body_planar=np.array([0.3, 0.4])))
    assert terms[2] == pytest.approx(-15.0, abs=1e-12)  # -30 * 0.5


def test_heading_alignment_wraps_the_yaw_difference():
    # 3pi/2 ahead is pi/2 behind after wrapping
    terms = compute_rewards(baseline(body_yaw=1.5 * np.pi))
    assert terms[3] == pytest.approx(-6.283185307179586, abs=1e-12)
    shifted = compute_rewards(baseline(body_yaw=0.1 + 2.0 * np.pi))
    assert shifted[3] == pytest.approx(-0.4, abs=1e-12)


def test_two_contacts_degenerate_both_support_terms_fire():
    terms = compute_rewards(baseline(contact_flags=np.array([1.0, 1.0, 0.0, 0.0])))
    assert terms[4] == -1.0
    assert terms[5] == -1.0
    assert terms[6] == -4.0  # two missing feet at weight 2


def test_one_foot_off_costs_two():
    # three feet still triangulate the center, so only the count term fires
    forces = np.tile([0.0, 0.0, 30.0], (4, 1))
    forces[3] = 0.0
    terms = compute_rewards(baseline(contact_flags=np.array([1.0, 1.0, 1.0, 0.0]),
                                     contact_forces=forces))
    assert terms[6] == -2.0
    assert terms[4] == 0.0
    assert terms[5] == 0.0


def test_com_outside_the_support_square():
    terms = compute_rewards(baseline(com_planar=np.array([1.0, 0.0])))
    assert terms[4] == -1.0
    assert terms[5] == 0.0


def test_com_on_the_hull_edge_counts_as_supported():
    terms = compute_rewards(baseline(com_planar=np.array([0.2, 0.0])))
    assert terms[4] == 0.0


def test_pressure_point_is_the_force_weighted_centroid():
    zmp = zero_moment_point(SQUARE_FEET, np.array([100.0, 50.0, 50.0, 0.0]))
    assert zmp == pytest.approx([0.1, -0.075], abs=1e-12)
    forces = np.zeros((4, 3))
    forces[:, 2] = [100.0, 50.0, 50.0, 0.0]
    terms = compute_rewards(baseline(contact_forces=forces))
    assert terms[5] == 0.0


def test_unloaded_stance_has_no_pressure_point():
    assert zero_moment_point(SQUARE_FEET, np.full(4, 0.2)) is None
    forces = np.tile([0.0, 0.0, 0.1], (4, 1))
    terms = compute_rewards(baseline(contact_forces=forces))
    assert terms[5] == -1.0
    assert terms[4] == 0.0


def test_ride_height_error():
    terms = compute_rewards(baseline(body_height=0.50))
    assert terms[7] == pytest.approx(-0.1, abs=1e-12)


def test_platform_smoothness_sums_both_norms():
    terms = compute_rewards(baseline(platform_accel=np.array([3.0, 4.0, 0.0,
                                                              0.0, 0.0, 2.0])))
    assert terms[8] == pytest.approx(-7.0, abs=1e-12)


def test_body_orientation_penalty():
    terms = compute_rewards(baseline(body_roll_pitch=np.array([0.3, 0.4])))
    assert terms[9] == pytest.approx(-0.45, abs=1e-12)  # -0.9 * 0.5


def test_body_velocity_ignores_yaw_rate():
    terms = compute_rewards(baseline(body_angvel=np.array([0.3, 0.4, 7.0]),
                                     body_vertical_speed=0.5))
    assert terms[10] == pytest.approx(-0.001, abs=1e-15)  # -(0.5 + 0.5) / 1000


def test_action_smoothness():
    terms = compute_rewards(baseline(action=np.ones(12)))
    assert terms[11] == pytest.approx(-3.464101615137755e-05, abs=1e-18)


def test_joint_smoothness_stacks_three_norms():
    terms = compute_rewards(baseline(joint_torque=np.full(12, 2.0),
                                     joint_vel=np.full(12, 3.0),
                                     joint_acc=np.full(12, 4.0)))
    assert terms[12] == pytest.approx(-0.0017334364482149325, abs=1e-15)


def test_posture_distance_from_home():
    terms = compute_rewards(baseline(joint_pos=np.full(12, 0.1)))
    assert terms[13] == pytest.approx(-0.0034641016151377543, abs=1e-15)


def test_energy_charges_positive_work_only():
    torque = np.zeros(12)
    vel = np.zeros(12)
    torque[0], vel[0] = 5.0, 2.0    # +10 W
    torque[1], vel[1] = 5.0, -2.0   # braking, clamped to zero
    terms = compute_rewards(baseline(joint_torque=torque, joint_vel=vel))
    assert terms[14] == pytest.approx(-0.001, abs=1e-15)


def test_energy_at_ten_watts_with_a_heavier_weight():
    # same 10 W drawing -0.1 when the energy weight is raised to 1e-2
    torque = np.zeros(12)
    vel = np.zeros(12)
    torque[0], vel[0] = 5.0, 2.0
    weights = DEFAULT_WEIGHTS.copy()
    weights[16] = 1e-2
    terms = compute_rewards(baseline(joint_torque=torque, joint_vel=vel), weights)
    assert terms[14] == pytest.approx(-0.1, abs=1e-12)


def test_contact_force_overage():
    forces = np.tile([0.0, 0.0, 30.0], (4, 1))
    forces[0] = [0.0, 0.0, 150.0]
    terms = compute_rewards(baseline(contact_forces=forces))
    assert terms[15] == pytest.approx(-0.5, abs=1e-12)  # (150 - 100) / 100


def test_collision_and_termination_flags():
    assert compute_rewards(baseline(collision=True))[16] == -10.0
    assert compute_rewards(baseline(terminated=True))[17] == -10.0


def test_zero_weights_silence_everything():
    terms = compute_rewards(baseline(platform_forward_speed=3.0,
                                     collision=True, terminated=True),
                            np.zeros(20))
    assert np.all(terms == 0.0)


def test_hull_of_the_square_has_four_ccw_vertices():
    pts = list(SQUARE_FEET) + [np.array([0.0, 0.0])]
    hull = convex_hull(pts)
    assert len(hull) == 4
    area2 = sum(hull[i][0] * hull[(i + 1) % 4][1]
                - hull[(i + 1) % 4][0] * hull[i][1] for i in range(4))
    assert area2 == pytest.approx(2 * 0.4 * 0.3, abs=1e-12)  # CCW: positive


def test_collinear_points_make_a_degenerate_hull():
    hull = convex_hull([np.array([0.0, 0.0]), np.array([1.0, 0.0]),
                        np.array([2.0, 0.0])])
    assert len(hull) <= 2
    assert not point_in_polygon(np.array([1.0, 0.0]), hull)


@settings(max_examples=60, deadline=None)
@given(speed=st.floats(-5, 5), command=st.floats(-5, 5),
       offset=st.floats(0, 2), lifted=st.integers(0, 4))
def test_terms_stay_bounded_and_signed(speed, command, offset, lifted):
    flags = np.ones(4)
    flags[:lifted] = 0.0
    terms = compute_rewards(baseline(platform_forward_speed=speed,
                                     command=np.array([command, 0.0]),
                                     body_planar=np.array([offset, 0.0]),
                                     contact_flags=flags))
    assert np.all(np.isfinite(terms))
    assert 0.0 <= terms[0] <= 8.0
    assert 0.0 <= terms[1] <= 8.0
    assert np.all(terms[2:] <= 0.0)
    assert terms.sum() == pytest.approx(float(np.sum(terms)), abs=1e-9)
