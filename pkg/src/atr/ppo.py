"""Clipped-surrogate policy optimization with concurrent estimators.

One update consumes a rollout batch: the policy/value nets train on the
clipped surrogate, a value regression, and an entropy bonus; the
intrinsic estimator regresses the encoder latent through a stop
gradient while the encoder is weakly pulled toward the estimate (the
regularized-online-adaptation coupling), and the extrinsic estimator
regresses the ground-truth platform/robot states.  Advantages arrive
raw from gae() and are normalized per batch here.  A non-finite total
loss aborts the whole update and restores the previous parameters.
"""

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, minimum


@dataclass
class TrainConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    epochs: int = 5
    minibatches: int = 4
    learning_rate: float = 3e-4
    entropy_coef: float = 0.005
    value_coef: float = 0.5
    grad_clip: float = 1.0
    roa_weight: float = 0.2
    history_length: int = 10

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.clip_ratio <= 0.0:
            raise ValueError("clip_ratio must be positive")


def gae(rewards, values, dones, last_values, gamma, lam):
    """Generalized advantage estimates, raw (no normalization).

    rewards/values/dones: (T, B); last_values: (B,) value of the state
    after the final step.  dones cut the recursion (no bootstrap across
    episode ends); timeout bootstrapping is the caller's business and is
    folded into `rewards` beforehand.  Returns (advantages, returns).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    horizon = rewards.shape[0]
    advantages = np.zeros_like(rewards)
    carry = np.zeros_like(last_values, dtype=np.float64)
    next_values = np.asarray(last_values, dtype=np.float64)
    for t in range(horizon - 1, -1, -1):
        alive = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_values * alive - values[t]
        carry = delta + gamma * lam * alive * carry
        advantages[t] = carry
        next_values = values[t]
    return advantages, advantages + values


def gaussian_log_prob(mean, log_std, actions):
    """Diagonal-Gaussian log density; Tensor in, (batch,) Tensor out."""
    actions = Tensor(actions) if not isinstance(actions, Tensor) else actions
    inv_std = (-log_std).exp()
    z = (actions - mean) * inv_std
    dim = mean.shape[-1]
    return (-0.5 * z.square().sum(axis=-1) - log_std.sum()
            - 0.5 * dim * np.log(2.0 * np.pi))


def gaussian_entropy(log_std):
    dim = log_std.shape[-1]
    return log_std.sum() + 0.5 * dim * (1.0 + np.log(2.0 * np.pi))


class Adam:
    """Adaptive-moment gradient descent over named parameters."""

    def __init__(self, named_params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.named_params = list(named_params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.steps = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.named_params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.named_params}

    def zero_grad(self):
        for _, p in self.named_params:
            p.grad = None

    def step(self):
        self.steps += 1
        correct1 = 1.0 - self.beta1 ** self.steps
        correct2 = 1.0 - self.beta2 ** self.steps
        for name, p in self.named_params:
            if p.grad is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad * p.grad
            p.data -= (self.lr * (m / correct1)
                       / (np.sqrt(v / correct2) + self.eps))

    def state_arrays(self):
        """Named float64 arrays for checkpointing."""
        out = {"adam.steps": np.array([float(self.steps)])}
        for name, _ in self.named_params:
            out[f"adam.m.{name}"] = self.m[name]
            out[f"adam.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays):
        self.steps = int(arrays["adam.steps"][0])
        for name, p in self.named_params:
            self.m[name] = arrays[f"adam.m.{name}"].reshape(p.data.shape).copy()
            self.v[name] = arrays[f"adam.v.{name}"].reshape(p.data.shape).copy()


def clip_gradients(params, max_norm):
    """Global-norm gradient clip; returns the pre-clip norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


def estimator_losses(bundle, history_norm, latent, extrinsic_true, roa_weight):
    """(intrinsic loss, extrinsic loss) Tensors for one minibatch.

    history_norm: Tensor (batch, H, 46) of normalized observations;
    latent: Tensor (batch, 16) from the encoder, still on the graph;
    the first loss trains the estimator against the detached latent and
    weakly couples the encoder to the detached estimate.
    """
    z_hat = bundle.estimator_int(history_norm)
    loss_int = ((z_hat - latent.detach()).square().sum(axis=-1).mean()
                + roa_weight * (z_hat.detach() - latent).square().sum(axis=-1).mean())
    x_hat = bundle.estimator_ext(history_norm)
    target = Tensor(extrinsic_true) if not isinstance(extrinsic_true, Tensor) else extrinsic_true
    loss_ext = (x_hat - target).square().sum(axis=-1).mean()
    return loss_int, loss_ext


def ppo_update(bundle, batch, cfg, optimizer, rng):
    """One optimization phase over a rollout batch.

    batch: dict of numpy arrays, flattened to (N, ...): observations,
    intrinsics, extrinsics, histories, actions, log_probs, advantages
    (raw), returns.  Returns a metrics dict; on a non-finite loss the
    parameters and optimizer are restored and metrics carry aborted=1.
    """
    n = batch["observations"].shape[0]
    advantages = batch["advantages"]
    std = advantages.std()
    advantages = (advantages - advantages.mean()) / (std + 1e-8)

    obs_norm = bundle.normalize_obs(batch["observations"])
    int_norm = bundle.normalize_intrinsic(batch["intrinsics"])
    hist_norm = bundle.normalize_obs(batch["histories"])

    named = bundle.named_parameters()
    snapshot = [(p, p.data.copy()) for _, p in named]
    moments = {k: v.copy() for k, v in optimizer.state_arrays().items()}

    metrics = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
               "loss_int": 0.0, "loss_ext": 0.0, "approx_kl": 0.0,
               "clip_fraction": 0.0, "grad_norm": 0.0, "aborted": 0.0}
    passes = 0

    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for chunk in np.array_split(order, cfg.minibatches):
            idx = np.sort(chunk)
            latent = bundle.encoder(Tensor(int_norm[idx]))
            actor_in = concat([Tensor(obs_norm[idx]), latent,
                               Tensor(batch["extrinsics"][idx])], axis=1)
            mean = bundle.actor(actor_in)
            log_prob = gaussian_log_prob(mean, bundle.log_std, batch["actions"][idx])
            ratio = (log_prob - Tensor(batch["log_probs"][idx])).exp()
            adv = Tensor(advantages[idx])
            surrogate = minimum(ratio * adv,
                                ratio.clip(1.0 - cfg.clip_ratio,
                                           1.0 + cfg.clip_ratio) * adv)
            policy_loss = -surrogate.mean()
            value = bundle.critic(actor_in)
            value_loss = (value.reshape(len(idx)) - Tensor(batch["returns"][idx])).square().mean()
            entropy = gaussian_entropy(bundle.log_std)
            loss_int, loss_ext = estimator_losses(
                bundle, Tensor(hist_norm[idx]), latent,
                batch["extrinsics"][idx], cfg.roa_weight)
            total = (policy_loss + cfg.value_coef * value_loss
                     - cfg.entropy_coef * entropy + loss_int + loss_ext)

            if not np.isfinite(total.data):
                for p, data in snapshot:
                    p.data = data
                optimizer.load_state_arrays(moments)
                metrics["aborted"] = 1.0
                return metrics

            optimizer.zero_grad()
            total.backward()
            norm = clip_gradients(bundle.parameters(), cfg.grad_clip)
            optimizer.step()

            metrics["policy_loss"] += float(policy_loss.data)
            metrics["value_loss"] += float(value_loss.data)
            metrics["entropy"] += float(entropy.data)
            metrics["loss_int"] += float(loss_int.data)
            metrics["loss_ext"] += float(loss_ext.data)
            metrics["approx_kl"] += float(np.mean(batch["log_probs"][idx] - log_prob.data))
            metrics["clip_fraction"] += float(np.mean(
                np.abs(ratio.data - 1.0) > cfg.clip_ratio))
            metrics["grad_norm"] += float(norm)
            passes += 1

    for key in metrics:
        if key != "aborted":
            metrics[key] /= max(passes, 1)
    return metrics
