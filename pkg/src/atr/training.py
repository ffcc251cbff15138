"""Training loop: rollouts, optimization, curriculum, persistence.

Each iteration collects `horizon` control steps from every environment
in the batch (commands drawn from the curriculum grid, the policy
consuming the encoder latent and ground-truth extrinsic state), folds
timeout bootstraps into the rewards, runs one optimization phase, and
feeds completed command segments back into the grid.

The training log is CSV with one row per iteration; columns:
iteration, env_steps, episodes, episode_reward_mean,
episode_length_mean, r0..r17 (per-term batch means), policy_loss,
value_loss, entropy, loss_int, loss_ext, approx_kl, clip_fraction,
grad_norm, aborted, curriculum_support, command_area, action_std_mean,
seconds.

Checkpoints capture parameters, optimizer moments, the curriculum grid,
every environment's simulator state and RNG, the trainer RNG streams,
and episode statistics, so a resumed single-threaded run continues the
uninterrupted one bit-exactly.
"""

import csv
import os
import time
from dataclasses import asdict, dataclass

import numpy as np
import yaml

from .checkpoint import load_arrays, save_arrays
from .curriculum import CommandGrid
from .env import ACTION_DIM, BatchEnv, EnvConfig, HISTORY_LENGTH, OBS_DIM
from .mathutils import make_stream, pack_rng_state, unpack_rng_state
from .networks import PolicyBundle
from .ppo import Adam, TrainConfig, gae, ppo_update
from .rewards import N_TERMS

ACTION_STREAM = 1_000_000
SHUFFLE_STREAM = 1_000_001

LOG_COLUMNS = (
    ["iteration", "env_steps", "episodes", "episode_reward_mean",
     "episode_length_mean"]
    + [f"r{i}" for i in range(N_TERMS)]
    + ["policy_loss", "value_loss", "entropy", "loss_int", "loss_ext",
       "approx_kl", "clip_fraction", "grad_norm", "aborted",
       "curriculum_support", "command_area", "action_std_mean", "seconds"]
)


@dataclass
class TrainSettings:
    iterations: int = 150
    horizon: int = 100
    batch: int = 64
    profile: str = "small"
    estimator_variant: str = "conv_gru"
    seed: int = 0
    log_path: str = ""
    checkpoint_path: str = ""
    checkpoint_every: int = 0   # also saves at the end when a path is set


class Trainer:
    def __init__(self, settings=None, env_config=None, ppo_config=None,
                 reward_weights=None):
        self.settings = settings if settings is not None else TrainSettings()
        s = self.settings
        if env_config is None:
            env_config = EnvConfig(seed=s.seed)
        self.env_config = env_config
        self.ppo_config = ppo_config if ppo_config is not None else TrainConfig()
        self.grid = CommandGrid()
        self.envs = BatchEnv(env_config, s.batch,
                             command_source=self.grid.sample,
                             reward_weights=reward_weights)
        self.bundle = PolicyBundle(seed=s.seed, profile=s.profile,
                                   estimator_variant=s.estimator_variant)
        self.optimizer = Adam(self.bundle.named_parameters(),
                              self.ppo_config.learning_rate)
        self.action_rng = make_stream(s.seed, ACTION_STREAM)
        self.shuffle_rng = make_stream(s.seed, SHUFFLE_STREAM)
        self.iteration = 0
        self.env_steps = 0
        self.episode_rewards = []
        self.episode_lengths = []
        self._running_return = np.zeros(s.batch)
        self._running_length = np.zeros(s.batch, dtype=np.int64)

    # -- rollout collection ---------------------------------------------

    def sample_actions(self, obs, intrinsics, extrinsics):
        """Gaussian actions plus their exact log densities (numpy)."""
        latent = self.bundle.latent_np(intrinsics)
        mean = self.bundle.action_mean_np(obs, latent, extrinsics)
        std = self.bundle.action_std
        noise = self.action_rng.normal(size=mean.shape)
        actions = mean + std * noise
        log_probs = (-0.5 * np.sum(noise * noise, axis=-1)
                     - np.sum(np.log(std))
                     - 0.5 * ACTION_DIM * np.log(2.0 * np.pi))
        return actions, log_probs, latent

    def collect(self):
        s = self.settings
        cfg = self.ppo_config
        T, B = s.horizon, s.batch
        buf = {
            "observations": np.zeros((T, B, OBS_DIM)),
            "intrinsics": np.zeros((T, B, 34)),
            "extrinsics": np.zeros((T, B, 16)),
            "histories": np.zeros((T, B, HISTORY_LENGTH, OBS_DIM)),
            "actions": np.zeros((T, B, ACTION_DIM)),
            "log_probs": np.zeros((T, B)),
        }
        values = np.zeros((T, B))
        rewards = np.zeros((T, B))
        dones = np.zeros((T, B))
        term_sums = np.zeros(N_TERMS)

        for t in range(T):
            obs = self.envs.observations()
            intr = self.envs.intrinsics()
            ext = self.envs.extrinsics()
            hist = self.envs.histories()
            actions, log_probs, latent = self.sample_actions(obs, intr, ext)
            values[t] = self.bundle.value_np(obs, latent, ext)

            buf["observations"][t] = obs
            buf["intrinsics"][t] = intr
            buf["extrinsics"][t] = ext
            buf["histories"][t] = hist
            buf["actions"][t] = actions
            buf["log_probs"][t] = log_probs

            step_rewards, terms, step_dones, timeouts, infos = self.envs.step(actions)
            term_sums += terms.sum(axis=0)
            rewards[t] = step_rewards
            dones[t] = step_dones

            for i, info in enumerate(infos):
                for command, mean_r0, mean_r1 in info["segments"]:
                    self.grid.update(command, mean_r0, mean_r1)
                if timeouts[i]:
                    t_latent = self.bundle.latent_np(info["terminal_intrinsic"][None])
                    t_value = self.bundle.value_np(
                        info["terminal_observation"][None], t_latent,
                        info["terminal_extrinsic"][None])
                    rewards[t, i] += cfg.gamma * float(t_value[0])

            self._running_return += step_rewards
            self._running_length += 1
            for i in np.nonzero(step_dones)[0]:
                self.episode_rewards.append(float(self._running_return[i]))
                self.episode_lengths.append(int(self._running_length[i]))
                self._running_return[i] = 0.0
                self._running_length[i] = 0

        self.env_steps += T * B
        last_latent = self.bundle.latent_np(self.envs.intrinsics())
        last_values = self.bundle.value_np(self.envs.observations(), last_latent,
                                           self.envs.extrinsics())
        advantages, returns = gae(rewards, values, dones, last_values,
                                  cfg.gamma, cfg.gae_lambda)
        batch = {key: arr.reshape((T * B,) + arr.shape[2:])
                 for key, arr in buf.items()}
        batch["advantages"] = advantages.reshape(T * B)
        batch["returns"] = returns.reshape(T * B)
        return batch, term_sums / (T * B)

    # -- main loop --------------------------------------------------------

    def train(self, iterations=None, progress=None):
        s = self.settings
        total = s.iterations if iterations is None else iterations
        log_file = None
        writer = None
        if s.log_path:
            new_file = not os.path.exists(s.log_path) or self.iteration == 0
            log_file = open(s.log_path, "w" if new_file else "a", newline="")
            writer = csv.writer(log_file)
            if new_file:
                writer.writerow(LOG_COLUMNS)
        try:
            for _ in range(total):
                start = time.time()
                episodes_before = len(self.episode_rewards)
                batch, term_means = self.collect()
                metrics = ppo_update(self.bundle, batch, self.ppo_config,
                                     self.optimizer, self.shuffle_rng)
                self.iteration += 1
                recent = self.episode_rewards[episodes_before:]
                recent_len = self.episode_lengths[episodes_before:]
                row = ([self.iteration, self.env_steps, len(self.episode_rewards),
                        float(np.mean(recent)) if recent else float("nan"),
                        float(np.mean(recent_len)) if recent_len else float("nan")]
                       + [float(v) for v in term_means]
                       + [metrics["policy_loss"], metrics["value_loss"],
                          metrics["entropy"], metrics["loss_int"],
                          metrics["loss_ext"], metrics["approx_kl"],
                          metrics["clip_fraction"], metrics["grad_norm"],
                          metrics["aborted"], self.grid.support_fraction(),
                          self.grid.covered_area(),
                          float(np.mean(self.bundle.action_std)),
                          time.time() - start])
                if writer is not None:
                    writer.writerow(row)
                    log_file.flush()
                if progress is not None:
                    progress(self.iteration, row)
                if (s.checkpoint_path and s.checkpoint_every
                        and self.iteration % s.checkpoint_every == 0):
                    self.save(s.checkpoint_path)
        finally:
            if log_file is not None:
                log_file.close()
        if s.checkpoint_path:
            self.save(s.checkpoint_path)

    # -- persistence ------------------------------------------------------

    def save(self, path):
        arrays = {}
        meta = {
            "profile": self.settings.profile,
            "estimator_variant": self.settings.estimator_variant,
            "env": asdict(self.env_config),
        }
        arrays["meta"] = yaml.safe_dump(meta).encode("utf-8")
        for name, p in self.bundle.named_parameters():
            arrays[f"param.{name}"] = p.data
        arrays.update(self.optimizer.state_arrays())
        arrays["curriculum"] = self.grid.pack()
        for i, state in enumerate(self.envs.get_state()):
            for key, value in state.items():
                arrays[f"env.{i}.{key}"] = value
        arrays["trainer.action_rng"] = pack_rng_state(self.action_rng)
        arrays["trainer.shuffle_rng"] = pack_rng_state(self.shuffle_rng)
        arrays["trainer.counters"] = np.array([self.iteration, self.env_steps],
                                              dtype=np.int64)
        arrays["trainer.episode_rewards"] = np.asarray(self.episode_rewards)
        arrays["trainer.episode_lengths"] = np.asarray(self.episode_lengths,
                                                       dtype=np.int64)
        arrays["trainer.running_return"] = self._running_return
        arrays["trainer.running_length"] = self._running_length
        save_arrays(path, arrays)

    def restore(self, path):
        arrays = load_arrays(path)
        for name, p in self.bundle.named_parameters():
            p.data = arrays[f"param.{name}"].reshape(p.data.shape).copy()
        self.optimizer.load_state_arrays(arrays)
        self.grid = CommandGrid.unpack(arrays["curriculum"])
        # re-point command sampling at the restored grid
        for env in self.envs.envs:
            env.command_source = self.grid.sample
        states = []
        for i in range(self.settings.batch):
            prefix = f"env.{i}."
            states.append({key[len(prefix):]: value
                           for key, value in arrays.items()
                           if key.startswith(prefix)})
        self.envs.set_state(states)
        self.action_rng = unpack_rng_state(arrays["trainer.action_rng"])
        self.shuffle_rng = unpack_rng_state(arrays["trainer.shuffle_rng"])
        self.iteration = int(arrays["trainer.counters"][0])
        self.env_steps = int(arrays["trainer.counters"][1])
        self.episode_rewards = list(arrays["trainer.episode_rewards"])
        self.episode_lengths = [int(v) for v in arrays["trainer.episode_lengths"]]
        self._running_return = arrays["trainer.running_return"].copy()
        self._running_length = arrays["trainer.running_length"].astype(np.int64)
