"""
Trainer Configuration
Reads trainer YAML files in the behavior-keyed trainer schema
(behaviors.<name>.hyperparameters, network_settings, reward_signals, ...)
into one flat Hyperparams record.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import yaml

from config import Config
from trafficlab.errors import ConfigError, InvalidParameter

LOG = logging.getLogger(__name__)

DEFAULT_BEHAVIOR = "TrafficSignal"

_HYPERPARAMETER_KEYS = {
    "batch_size": "batch_size",
    "buffer_size": "buffer_size",
    "learning_rate": "learning_rate",
    "beta": "beta",
    "epsilon": "epsilon",
    "lambd": "lambd",
    "num_epoch": "num_epoch",
    "learning_rate_schedule": "learning_rate_schedule",
    "beta_schedule": "beta_schedule",
    "epsilon_schedule": "epsilon_schedule",
}
_NETWORK_KEYS = {"normalize", "hidden_units", "num_layers", "vis_encode_type"}
_BEHAVIOR_KEYS = {
    "trainer_type", "hyperparameters", "network_settings", "reward_signals",
    "keep_checkpoints", "checkpoint_interval", "max_steps", "time_horizon",
    "summary_freq", "init_path", "threaded",
}


@dataclass(frozen=True)
class Hyperparams:
    behavior_name: str = DEFAULT_BEHAVIOR
    scenario: str = "desk"
    # hyperparameters
    batch_size: int = 2560
    buffer_size: int = 102400
    learning_rate: float = 3e-4
    beta: float = 0.05
    epsilon: float = 0.2
    lambd: float = 0.95
    num_epoch: int = 3
    learning_rate_schedule: str = "linear"
    beta_schedule: str = "linear"
    epsilon_schedule: str = "linear"
    # network_settings
    normalize: bool = True
    hidden_units: int = 512
    num_layers: int = 2
    vis_encode_type: str = "simple"
    shared_critic: bool = False
    # reward_signals
    gamma: float = 0.99
    extrinsic_strength: float = 1.0
    # read for ML-Agents YAML compatibility only; intrinsic reward is discounted with `gamma`
    curiosity_gamma: float = 0.99
    curiosity_strength: float = 0.02
    curiosity_hidden_units: int = 256
    curiosity_num_layers: int = 2
    curiosity_learning_rate: float = 3e-4
    # run control
    max_steps: int = 10_000_000
    time_horizon: int = 512
    summary_freq: int = 30000
    checkpoint_interval: int = 500000
    keep_checkpoints: int = 5
    init_path: str | None = None
    run_id: str = "ppo"
    resume: bool = False
    seed: int = 0
    time_scale: float = 20.0

    def __post_init__(self):
        if self.batch_size <= 0 or self.buffer_size % self.batch_size:
            raise InvalidParameter(
                f"buffer_size {self.buffer_size} is not a multiple of batch_size {self.batch_size}")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidParameter(f"epsilon {self.epsilon} outside (0, 1)")
        if not 0.0 <= self.lambd <= 1.0:
            raise InvalidParameter(f"lambd {self.lambd} outside [0, 1]")
        if self.num_epoch < 1 or self.hidden_units < 1 or self.num_layers < 1:
            raise InvalidParameter("num_epoch, hidden_units and num_layers must be positive")
        if self.time_horizon < 1 or self.max_steps < 1:
            raise InvalidParameter("time_horizon and max_steps must be positive")
        for key in ("learning_rate_schedule", "beta_schedule", "epsilon_schedule"):
            if getattr(self, key) not in ("linear", "constant"):
                raise InvalidParameter(f"{key} must be 'linear' or 'constant'")
        if self.shared_critic:
            raise InvalidParameter("shared_critic is not supported")

    def to_dict(self):
        return asdict(self)

    def replace(self, **changes):
        data = self.to_dict()
        data.update(changes)
        return Hyperparams(**data)


def trainer_dir():
    return Path(Config.DATA_DIR) / "train"


def _pick(section, allowed, where):
    section = section or {}
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return section


def hyperparams_from_dict(data, behavior=None):
    """
    Flatten a trainer document
    Exactly one behavior is read: `behavior` when given, else the only one
    present. Unknown keys raise ConfigError.
    """
    data = data or {}
    behaviors = data.get("behaviors") or {}
    if behavior is None:
        if len(behaviors) != 1:
            raise ConfigError(f"expected one behavior, found {sorted(behaviors)}")
        behavior = next(iter(behaviors))
    if behavior not in behaviors:
        raise ConfigError(f"behavior {behavior!r} not in trainer config")
    b = _pick(behaviors[behavior], _BEHAVIOR_KEYS, f"behaviors.{behavior}")
    if b.get("trainer_type", "ppo") != "ppo":
        raise ConfigError(f"trainer_type {b['trainer_type']!r} is not supported, only ppo")

    flat = {"behavior_name": behavior}
    hyper = _pick(b.get("hyperparameters"), _HYPERPARAMETER_KEYS, "hyperparameters")
    flat.update({_HYPERPARAMETER_KEYS[k]: v for k, v in hyper.items()})
    flat.update(_pick(b.get("network_settings"), _NETWORK_KEYS | {"shared_critic"}, "network_settings"))

    signals = _pick(b.get("reward_signals"), {"extrinsic", "curiosity"}, "reward_signals")
    extrinsic = _pick(signals.get("extrinsic"), {"gamma", "strength"}, "reward_signals.extrinsic")
    flat["gamma"] = extrinsic.get("gamma", Hyperparams.gamma)
    flat["extrinsic_strength"] = extrinsic.get("strength", Hyperparams.extrinsic_strength)
    if "curiosity" in signals:
        cur = _pick(signals["curiosity"], {"gamma", "strength", "network_settings", "learning_rate"},
                    "reward_signals.curiosity")
        net = _pick(cur.get("network_settings"), {"hidden_units", "num_layers"},
                    "reward_signals.curiosity.network_settings")
        flat["curiosity_gamma"] = cur.get("gamma", Hyperparams.curiosity_gamma)
        flat["curiosity_strength"] = cur.get("strength", Hyperparams.curiosity_strength)
        flat["curiosity_learning_rate"] = cur.get("learning_rate", Hyperparams.curiosity_learning_rate)
        flat["curiosity_hidden_units"] = net.get("hidden_units", Hyperparams.curiosity_hidden_units)
        flat["curiosity_num_layers"] = net.get("num_layers", Hyperparams.curiosity_num_layers)
    else:
        flat["curiosity_strength"] = 0.0

    for key in ("keep_checkpoints", "checkpoint_interval", "max_steps", "time_horizon",
                "summary_freq", "init_path"):
        if key in b:
            flat[key] = b[key]

    ckpt = _pick(data.get("checkpoint_settings"), {"run_id", "resume"}, "checkpoint_settings")
    flat.update(ckpt)
    env = _pick(data.get("env_settings"), {"seed"}, "env_settings")
    if "seed" in env:
        flat["seed"] = env["seed"]
    engine = _pick(data.get("engine_settings"), {"time_scale"}, "engine_settings")
    if "time_scale" in engine:
        flat["time_scale"] = engine["time_scale"]
    if "scenario" in data:
        flat["scenario"] = data["scenario"]

    unknown = set(data) - {"behaviors", "checkpoint_settings", "env_settings",
                           "engine_settings", "scenario"}
    if unknown:
        raise ConfigError(f"unknown trainer config keys: {sorted(unknown)}")

    for key in ("max_steps", "buffer_size", "batch_size", "summary_freq", "checkpoint_interval"):
        if key in flat:
            flat[key] = int(float(flat[key]))
    try:
        return Hyperparams(**flat)
    except TypeError as e:
        raise ConfigError(f"malformed trainer config: {e}") from e


def load_hyperparams(name_or_path, behavior=None, **overrides):
    """Hyperparams from a file under data/train/ or a YAML path."""
    path = Path(name_or_path)
    if not path.exists():
        path = trainer_dir() / f"{name_or_path}.yaml"
    if not path.exists():
        raise ConfigError(f"trainer config {name_or_path!r} not found")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    hp = hyperparams_from_dict(data, behavior)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        LOG.info("trainer overrides: %s", overrides)
        hp = hp.replace(**overrides)
    return hp
