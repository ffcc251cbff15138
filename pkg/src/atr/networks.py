"""Policy, value, and estimator networks on the gradient engine.

Pieces and shapes:

* actor: (observation 46 | intrinsic latent 16 | extrinsic 16) = 78
  -> [512, 256, 128] -> 12 action means, plus a free log-std vector,
* encoder: intrinsic parameters 34 -> [128, 64] -> latent 16,
* critic: same 78 input -> [512, 256, 128] -> 1,
* estimators: observation history (H=10) x 46 -> two 1-D convolutions
  (kernel 3, valid) -> GRU -> [128] -> 16; the extrinsic head squashes
  its first four outputs (contact indicators) through a sigmoid.
  A flattened dense variant exists as an ablation.

The "small" profile divides every width by 4 for desk-scale training.
Every forward pass exists twice: graph-building on Tensors for updates
and a plain-numpy mirror for rollouts.  All parameters are named for
checkpointing.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, concat
from .env import (EXTRINSIC_DIM, HISTORY_LENGTH, INTRINSIC_CENTER,
                  INTRINSIC_DIM, INTRINSIC_SCALE, OBS_CENTER, OBS_DIM,
                  OBS_SCALE, ACTION_DIM)

LATENT_DIM = 16
ACTOR_INPUT = OBS_DIM + LATENT_DIM + EXTRINSIC_DIM  # 78
N_CONTACT_OUTPUTS = 4
INITIAL_ACTION_STD = 0.3

PROFILES = {
    "paper": {"actor": (512, 256, 128), "encoder": (128, 64),
              "conv": (32, 32), "gru": 64, "head": 128},
    "small": {"actor": (128, 64, 32), "encoder": (32, 16),
              "conv": (8, 8), "gru": 16, "head": 32},
}


class Linear:
    def __init__(self, fan_in, fan_out, rng, scale=None):
        if scale is None:
            scale = np.sqrt(2.0 / fan_in)
        self.weight = ad.parameter(rng.normal(0.0, scale, (fan_in, fan_out)))
        self.bias = ad.parameter(np.zeros(fan_out))

    def __call__(self, x):
        return x @ self.weight + self.bias

    def forward_np(self, x):
        return x @ self.weight.data + self.bias.data

    def named(self, prefix):
        return [(prefix + ".weight", self.weight), (prefix + ".bias", self.bias)]


class MLP:
    """Dense stack with ELU between layers; linear output."""

    def __init__(self, sizes, rng, out_scale=0.01):
        self.layers = []
        for i in range(len(sizes) - 1):
            last = i == len(sizes) - 2
            self.layers.append(Linear(sizes[i], sizes[i + 1], rng,
                                      scale=out_scale if last else None))

    def __call__(self, x):
        for layer in self.layers[:-1]:
            x = layer(x).elu()
        return self.layers[-1](x)

    def forward_np(self, x):
        for layer in self.layers[:-1]:
            x = layer.forward_np(x)
            x = np.where(x > 0.0, x, np.expm1(x))
        return self.layers[-1].forward_np(x)

    def named(self, prefix):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend(layer.named(f"{prefix}.{i}"))
        return out


class Conv1d:
    """Valid (no padding) convolution over the time axis, kernel taps
    stored as separate (c_in, c_out) matrices so the forward pass is a
    sum of slice-matmuls."""

    def __init__(self, c_in, c_out, kernel, rng):
        scale = np.sqrt(2.0 / (c_in * kernel))
        self.taps = [ad.parameter(rng.normal(0.0, scale, (c_in, c_out)))
                     for _ in range(kernel)]
        self.bias = ad.parameter(np.zeros(c_out))
        self.kernel = kernel

    def __call__(self, x):
        # x: (batch, time, c_in) -> (batch, time - kernel + 1, c_out)
        batch, time, c_in = x.shape
        t_out = time - self.kernel + 1
        out = None
        for k, tap in enumerate(self.taps):
            piece = x[:, k:k + t_out, :].reshape(batch * t_out, c_in) @ tap
            out = piece if out is None else out + piece
        c_out = self.taps[0].shape[1]
        return (out + self.bias).reshape(batch, t_out, c_out)

    def forward_np(self, x):
        batch, time, c_in = x.shape
        t_out = time - self.kernel + 1
        out = np.zeros((batch, t_out, self.taps[0].data.shape[1]))
        for k, tap in enumerate(self.taps):
            out += x[:, k:k + t_out, :] @ tap.data
        return out + self.bias.data

    def named(self, prefix):
        out = [(f"{prefix}.tap{k}", tap) for k, tap in enumerate(self.taps)]
        out.append((prefix + ".bias", self.bias))
        return out


class GRUCell:
    def __init__(self, c_in, hidden, rng):
        scale = np.sqrt(1.0 / c_in)
        hscale = np.sqrt(1.0 / hidden)

        def mk(fan_in, s):
            return ad.parameter(rng.normal(0.0, s, (fan_in, hidden)))

        self.wz, self.uz = mk(c_in, scale), mk(hidden, hscale)
        self.wr, self.ur = mk(c_in, scale), mk(hidden, hscale)
        self.wh, self.uh = mk(c_in, scale), mk(hidden, hscale)
        self.bz = ad.parameter(np.zeros(hidden))
        self.br = ad.parameter(np.zeros(hidden))
        self.bh = ad.parameter(np.zeros(hidden))
        self.hidden = hidden

    def step(self, x, h):
        z = (x @ self.wz + h @ self.uz + self.bz).sigmoid()
        r = (x @ self.wr + h @ self.ur + self.br).sigmoid()
        cand = (x @ self.wh + (r * h) @ self.uh + self.bh).tanh()
        return (1.0 - z) * h + z * cand

    def step_np(self, x, h):
        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))
        z = sig(x @ self.wz.data + h @ self.uz.data + self.bz.data)
        r = sig(x @ self.wr.data + h @ self.ur.data + self.br.data)
        cand = np.tanh(x @ self.wh.data + (r * h) @ self.uh.data + self.bh.data)
        return (1.0 - z) * h + z * cand

    def named(self, prefix):
        return [(f"{prefix}.{n}", getattr(self, n))
                for n in ("wz", "uz", "wr", "ur", "wh", "uh", "bz", "br", "bh")]


class TemporalEstimator:
    """History (batch, H, 46) -> 16 outputs.

    variant "conv_gru": conv(k3) -> ELU -> conv(k3) -> ELU -> GRU ->
    dense head; variant "dense": flatten -> dense head.  When
    squash_count > 0 the first that many outputs pass through a sigmoid.
    """

    def __init__(self, rng, profile="paper", variant="conv_gru",
                 out_dim=LATENT_DIM, squash_count=0):
        widths = PROFILES[profile]
        self.variant = variant
        self.squash_count = squash_count
        if variant == "conv_gru":
            c1, c2 = widths["conv"]
            self.conv1 = Conv1d(OBS_DIM, c1, 3, rng)
            self.conv2 = Conv1d(c1, c2, 3, rng)
            self.gru = GRUCell(c2, widths["gru"], rng)
            self.head = MLP((widths["gru"], widths["head"], out_dim), rng)
        elif variant == "dense":
            self.head = MLP((HISTORY_LENGTH * OBS_DIM, widths["head"],
                             widths["head"], out_dim), rng)
        else:
            raise ValueError(f"unknown estimator variant {variant!r}")

    def __call__(self, history):
        batch = history.shape[0]
        if self.variant == "dense":
            out = self.head(history.reshape(batch, HISTORY_LENGTH * OBS_DIM))
        else:
            x = self.conv1(history).elu()
            x = self.conv2(x).elu()
            h = Tensor(np.zeros((batch, self.gru.hidden)))
            for t in range(x.shape[1]):
                h = self.gru.step(x[:, t, :], h)
            out = self.head(h)
        if self.squash_count:
            n = self.squash_count
            out = concat([out[:, :n].sigmoid(), out[:, n:]], axis=1)
        return out

    def forward_np(self, history):
        batch = history.shape[0]
        if self.variant == "dense":
            out = self.head.forward_np(history.reshape(batch, -1))
        else:
            x = self.conv1.forward_np(history)
            x = np.where(x > 0.0, x, np.expm1(x))
            x = self.conv2.forward_np(x)
            x = np.where(x > 0.0, x, np.expm1(x))
            h = np.zeros((batch, self.gru.hidden))
            for t in range(x.shape[1]):
                h = self.gru.step_np(x[:, t], h)
            out = self.head.forward_np(h)
        if self.squash_count:
            n = self.squash_count
            out = np.concatenate(
                [1.0 / (1.0 + np.exp(-out[:, :n])), out[:, n:]], axis=1)
        return out

    def named(self, prefix):
        out = []
        if self.variant == "conv_gru":
            out.extend(self.conv1.named(prefix + ".conv1"))
            out.extend(self.conv2.named(prefix + ".conv2"))
            out.extend(self.gru.named(prefix + ".gru"))
        out.extend(self.head.named(prefix + ".head"))
        return out


class PolicyBundle:
    """Actor, encoder, critic, and both estimators as one named family."""

    def __init__(self, seed=0, profile="paper", estimator_variant="conv_gru"):
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r}")
        rng = np.random.default_rng(seed)
        widths = PROFILES[profile]
        self.profile = profile
        self.actor = MLP((ACTOR_INPUT,) + widths["actor"] + (ACTION_DIM,), rng)
        self.log_std = ad.parameter(np.full(ACTION_DIM, np.log(INITIAL_ACTION_STD)))
        self.encoder = MLP((INTRINSIC_DIM,) + widths["encoder"] + (LATENT_DIM,), rng)
        self.critic = MLP((ACTOR_INPUT,) + widths["actor"] + (1,), rng)
        self.estimator_int = TemporalEstimator(rng, profile, estimator_variant)
        self.estimator_ext = TemporalEstimator(rng, profile, estimator_variant,
                                               out_dim=EXTRINSIC_DIM,
                                               squash_count=N_CONTACT_OUTPUTS)

    # -- input normalization (fixed affine maps) ------------------------

    @staticmethod
    def normalize_obs(obs):
        return (obs - OBS_CENTER) / OBS_SCALE

    @staticmethod
    def normalize_intrinsic(x):
        return (x - INTRINSIC_CENTER) / INTRINSIC_SCALE

    @staticmethod
    def policy_input(obs, latent, extrinsic):
        """numpy assembly of the normalized 78-wide actor/critic input."""
        return np.concatenate([PolicyBundle.normalize_obs(obs),
                               latent, extrinsic], axis=-1)

    # -- rollout-time forwards (numpy) ----------------------------------

    def latent_np(self, intrinsic):
        return self.encoder.forward_np(self.normalize_intrinsic(intrinsic))

    def action_mean_np(self, obs, latent, extrinsic):
        return self.actor.forward_np(self.policy_input(obs, latent, extrinsic))

    def value_np(self, obs, latent, extrinsic):
        return self.critic.forward_np(
            self.policy_input(obs, latent, extrinsic))[..., 0]

    def estimate_np(self, history):
        """(latent estimate, extrinsic estimate) from normalized history."""
        norm = self.normalize_obs(history)
        return (self.estimator_int.forward_np(norm),
                self.estimator_ext.forward_np(norm))

    @property
    def action_std(self):
        return np.exp(self.log_std.data)

    # -- parameter plumbing ----------------------------------------------

    def named_parameters(self):
        out = [("log_std", self.log_std)]
        out.extend(self.actor.named("actor"))
        out.extend(self.encoder.named("encoder"))
        out.extend(self.critic.named("critic"))
        out.extend(self.estimator_int.named("estimator_int"))
        out.extend(self.estimator_ext.named("estimator_ext"))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def parameter_count(self):
        return sum(p.size for p in self.parameters())
