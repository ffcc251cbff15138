"""YAML run configuration.

Schema (all keys optional; omitted keys take the defaults shown by
`default_config()`):

    train:
      iterations: 150        # optimization iterations
      horizon: 100           # control steps per env per iteration
      batch: 64              # parallel environments
      profile: small         # network widths: "paper" or "small"
      estimator_variant: conv_gru   # or "dense" (ablation)
      seed: 0
      checkpoint_every: 0    # iterations between mid-run checkpoints
    env:
      transporter: single    # "single" or "split"
      deck: small            # "small" or "large"
      robot: a1              # "a1", "go1", "anymalc", "spot"
      dt: 0.002
      decimation: 10
      episode_seconds: 10.0
      command_seconds: 5.0
      perturb_seconds: 3.0
      perturb_duration: 0.2
      perturb_body_max: 30.0
      perturb_deck_max: 20.0
      dr_mode: train         # "train", "test", "off"
      obs_noise: false
      seed: 0                # defaults to train.seed when absent
    ppo:
      gamma: 0.99
      gae_lambda: 0.95
      clip_ratio: 0.2
      epochs: 5
      minibatches: 4
      learning_rate: 3.0e-4
      entropy_coef: 0.005
      value_coef: 0.5
      grad_clip: 1.0
      roa_weight: 0.2
      history_length: 10
    reward_weights: [8.0, 8.0, ...]   # 20 entries, optional

Unknown keys are rejected with the offending path in the message.
"""

from dataclasses import asdict

import yaml

from .env import EnvConfig
from .ppo import TrainConfig
from .rewards import DEFAULT_WEIGHTS
from .training import TrainSettings


def default_config():
    train = asdict(TrainSettings())
    for key in ("log_path", "checkpoint_path"):
        train.pop(key)
    return {
        "train": train,
        "env": asdict(EnvConfig()),
        "ppo": asdict(TrainConfig()),
        "reward_weights": [float(w) for w in DEFAULT_WEIGHTS],
    }


def _merge_section(defaults, overrides, path):
    merged = dict(defaults)
    for key, value in overrides.items():
        if key not in defaults:
            known = ", ".join(sorted(defaults))
            raise KeyError(f"unknown config key {path}.{key}; known: {known}")
        merged[key] = value
    return merged


def load_config(path):
    """Parse and validate a YAML file into a full config dict."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    defaults = default_config()
    unknown = set(raw) - set(defaults)
    if unknown:
        raise KeyError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    out = {}
    for section in ("train", "env", "ppo"):
        out[section] = _merge_section(defaults[section], raw.get(section, {}),
                                      section)
    weights = raw.get("reward_weights", defaults["reward_weights"])
    if len(weights) != len(DEFAULT_WEIGHTS):
        raise ValueError(f"reward_weights needs {len(DEFAULT_WEIGHTS)} entries, "
                         f"got {len(weights)}")
    out["reward_weights"] = [float(w) for w in weights]
    return out


def build(config, seed=None, log_path="", checkpoint_path=""):
    """(TrainSettings, EnvConfig, TrainConfig, weights) from a config dict."""
    train = dict(config["train"])
    env = dict(config["env"])
    if seed is not None:
        train["seed"] = seed
        env["seed"] = seed
    elif "seed" not in env or env["seed"] == 0:
        env["seed"] = train["seed"]
    settings = TrainSettings(log_path=log_path, checkpoint_path=checkpoint_path,
                             **train)
    return (settings, EnvConfig(**env), TrainConfig(**config["ppo"]),
            config["reward_weights"])
