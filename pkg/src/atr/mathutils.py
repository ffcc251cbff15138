"""Shared math helpers: rotations, integration, counter-based RNG streams.

Vectors are numpy float64 arrays: Vec3 shape (3,), Mat3 shape (3, 3)
row-major, Euler angles (roll, pitch, yaw) applied intrinsically x-y-z.
The rotation/rate maps live in `atr.kernels` (compiled); this module
re-exports them and adds the pieces that never sit on the hot path.
"""

import numpy as np

from .kernels import (  # noqa: F401  (re-exported API)
    GRAVITY,
    body_rates_to_euler_rates,
    clip_unit,
    cross,
    euler_rates_to_body_rates,
    euler_to_rot,
    mat_vec,
    mat_vec_t,
    rot_to_euler,
    sign_positive,
    wrap_angle,
)

RNG_STATE_WORDS = 13  # packed Philox state: counter(4) key(2) buffer(4) pos/flag/word


def integrate_semi_implicit(position, velocity, acceleration, dt):
    """One symplectic Euler step: velocity first, then position with it."""
    velocity = velocity + dt * acceleration
    position = position + dt * velocity
    return position, velocity


def integrate_orientation(euler, omega_body, accel_body, dt):
    """Angular analog: body rates stepped, then Euler angles through the
    rate map evaluated at the current attitude."""
    omega_body = omega_body + dt * accel_body
    rates = body_rates_to_euler_rates(euler, omega_body)
    return euler + dt * rates, omega_body


def make_stream(seed, stream_id=0):
    """Independent reproducible generator for (seed, stream_id).

    Philox is counter-based, so per-environment streams never overlap
    and serialize to a handful of integers.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(seed=seq))


def pack_rng_state(generator):
    """Philox generator state as a flat uint64 vector (checkpointable)."""
    state = generator.bit_generator.state
    out = np.empty(RNG_STATE_WORDS, dtype=np.uint64)
    out[0:4] = state["state"]["counter"]
    out[4:6] = state["state"]["key"]
    out[6:10] = state["buffer"]
    out[10] = np.uint64(state["buffer_pos"])
    out[11] = np.uint64(state["has_uint32"])
    out[12] = np.uint64(state["uinteger"])
    return out


def unpack_rng_state(words):
    """Rebuild a generator from pack_rng_state output."""
    words = np.asarray(words, dtype=np.uint64)
    bitgen = np.random.Philox()
    bitgen.state = {
        "bit_generator": "Philox",
        "state": {
            "counter": words[0:4].copy(),
            "key": words[4:6].copy(),
        },
        "buffer": words[6:10].copy(),
        "buffer_pos": int(words[10]),
        "has_uint32": int(words[11]),
        "uinteger": int(words[12]),
    }
    return np.random.Generator(bitgen)
