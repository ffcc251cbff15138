"""Training loop: logging, timeout bootstrap, resume fidelity."""

import csv

import numpy as np

from atr import training
from atr.env import EnvConfig
from atr.ppo import TrainConfig
from atr.rewards import N_TERMS
from atr.training import LOG_COLUMNS, Trainer, TrainSettings


def tiny_trainer(tmp_path, tag, iterations=2, seed=0, **env_overrides):
    env_kwargs = dict(dr_mode="off", obs_noise=False, seed=seed,
                      episode_seconds=0.2, command_seconds=0.2,
                      perturb_body_max=0.0, perturb_deck_max=0.0)
    env_kwargs.update(env_overrides)
    settings = TrainSettings(
        iterations=iterations, horizon=6, batch=2, profile="small",
        seed=seed, log_path=str(tmp_path / f"{tag}.csv"),
        checkpoint_path=str(tmp_path / f"{tag}.bin"))
    return Trainer(settings, EnvConfig(**env_kwargs),
                   TrainConfig(epochs=2, minibatches=2))


def test_log_columns_contract():
    assert LOG_COLUMNS[:5] == ["iteration", "env_steps", "episodes",
                               "episode_reward_mean", "episode_length_mean"]
    assert LOG_COLUMNS[5:5 + N_TERMS] == [f"r{i}" for i in range(N_TERMS)]
    assert LOG_COLUMNS[5 + N_TERMS:] == [
        "policy_loss", "value_loss", "entropy", "loss_int", "loss_ext",
        "approx_kl", "clip_fraction", "grad_norm", "aborted",
        "curriculum_support", "command_area", "action_std_mean", "seconds"]
    assert len(LOG_COLUMNS) == 36


def test_train_writes_one_log_row_per_iteration(tmp_path):
    trainer = tiny_trainer(tmp_path, "run", iterations=2)
    trainer.train()
    with open(trainer.settings.log_path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == LOG_COLUMNS
    assert len(rows) == 3
    for n, row in enumerate(rows[1:], start=1):
        values = [float(v) for v in row]
        assert values[0] == n
        assert values[1] == n * 6 * 2          # env_steps = iter * horizon * batch
    assert trainer.iteration == 2
    assert trainer.env_steps == 24


def test_progress_callback_and_periodic_checkpoints(tmp_path):
    trainer = tiny_trainer(tmp_path, "run", iterations=3)
    trainer.settings.checkpoint_every = 2
    seen = []
    sizes = []

    def progress(iteration, row):
        seen.append(iteration)
        assert len(row) == len(LOG_COLUMNS)
        path = trainer.settings.checkpoint_path
        import os
        sizes.append(os.path.getsize(path) if os.path.exists(path) else 0)

    trainer.train(progress=progress)
    assert seen == [1, 2, 3]
    # nothing on iteration 1, a checkpoint from iteration 2 onward, and a
    # final save after the loop
    assert sizes[0] == 0 and sizes[1] == 0 and sizes[2] > 0
    restored = tiny_trainer(tmp_path, "other")
    restored.restore(trainer.settings.checkpoint_path)
    assert restored.iteration == 3


def _stub_policy(trainer, value):
    """Zero-mean policy with a constant value head, latent passthrough."""
    bundle = trainer.bundle
    latent_dim = bundle.latent_np(np.zeros((1, 34))).shape[1]
    bundle.latent_np = lambda intr: np.zeros((np.atleast_2d(intr).shape[0],
                                              latent_dim))
    bundle.action_mean_np = lambda obs, z, x: np.zeros((np.atleast_2d(obs).shape[0], 12))
    bundle.value_np = lambda obs, z, x: np.full(np.atleast_2d(obs).shape[0], value)


def test_timeout_bootstrap_adds_discounted_terminal_value(tmp_path, monkeypatch):
    captured = {}
    original = training.gae

    def spy(rewards, values, dones, last_values, gamma, lam):
        captured["rewards"] = rewards.copy()
        captured["dones"] = dones.copy()
        return original(rewards, values, dones, last_values, gamma, lam)

    monkeypatch.setattr(training, "gae", spy)
    grabbed = []
    for value in (0.0, 5.0):
        trainer = tiny_trainer(tmp_path, f"v{value}",
                               episode_seconds=0.1, command_seconds=0.1)
        _stub_policy(trainer, value)
        trainer.collect()
        grabbed.append((captured["rewards"].copy(), captured["dones"].copy()))
    (base_rewards, base_dones), (boosted_rewards, boosted_dones) = grabbed

    # identical action streams, identical environments: same trajectories
    assert np.array_equal(base_dones, boosted_dones)
    # episodes time out every 5 control steps (0.1 s); horizon 6 sees one
    assert base_dones.any()
    gamma = TrainConfig().gamma
    diff = boosted_rewards - base_rewards
    assert np.allclose(diff[base_dones > 0.5], gamma * 5.0)
    assert np.all(diff[base_dones < 0.5] == 0.0)


def test_episode_bookkeeping_accumulates_across_collects(tmp_path):
    trainer = tiny_trainer(tmp_path, "run")
    _stub_policy(trainer, 0.0)
    trainer.collect()
    trainer.collect()
    # horizon 6, episode length 10: each env finishes exactly one episode
    assert len(trainer.episode_rewards) == 2
    assert trainer.episode_lengths == [10, 10]
    assert trainer.env_steps == 24


def test_resumed_run_matches_uninterrupted_run_byte_for_byte(tmp_path):
    straight = tiny_trainer(tmp_path, "straight", iterations=4)
    straight.train()
    straight.save(tmp_path / "straight_final.bin")

    first = tiny_trainer(tmp_path, "split", iterations=2)
    first.train()

    second = tiny_trainer(tmp_path, "split2", iterations=2)
    second.settings.log_path = first.settings.log_path
    second.restore(first.settings.checkpoint_path)
    assert second.iteration == 2
    second.train()
    second.save(tmp_path / "split_final.bin")

    straight_bytes = (tmp_path / "straight_final.bin").read_bytes()
    split_bytes = (tmp_path / "split_final.bin").read_bytes()
    # meta/env config strings differ only if configs differ; they don't
    assert straight_bytes == split_bytes

    # the shared log was appended, not rewritten: one header, four rows,
    # matching the uninterrupted log everywhere but the timing column
    with open(first.settings.log_path) as fh:
        resumed = list(csv.reader(fh))
    with open(straight.settings.log_path) as fh:
        reference = list(csv.reader(fh))
    assert resumed[0] == LOG_COLUMNS
    assert len(resumed) == len(reference) == 5
    for got, want in zip(resumed[1:], reference[1:]):
        assert got[:-1] == want[:-1]


def test_restore_points_commands_at_the_restored_grid(tmp_path):
    trainer = tiny_trainer(tmp_path, "run")
    trainer.train()
    other = tiny_trainer(tmp_path, "fresh")
    other.restore(trainer.settings.checkpoint_path)
    assert other.grid is not trainer.grid
    for env in other.envs.envs:
        assert env.command_source == other.grid.sample
