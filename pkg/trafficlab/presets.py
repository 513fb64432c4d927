"""
Scenario Presets
Reads the scenario YAML files under <DATA_DIR>/presets. A scenario names the
city, spawning, episode, reward, ray and fuel settings one run needs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from config import Config
from trafficlab.errors import ConfigError, TrafficLabError
from trafficlab.metrics import FuelModel
from trafficlab.network import CityGenConfig
from trafficlab.rl_env import EpisodeConfig, RewardCoefficients
from trafficlab.sensing import RayConfig
from trafficlab.spawning import SpawnConfig

TOP_LEVEL_KEYS = {
    "name", "description", "seed", "city", "spawn", "episode", "rewards", "rays", "fuel",
    "capture_interval", "expected_lights", "fixed_green", "fixed_speed_limit",
}


@dataclass(frozen=True)
class Scenario:
    name: str
    city: CityGenConfig = field(default_factory=CityGenConfig)
    spawn: SpawnConfig = field(default_factory=SpawnConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    rewards: RewardCoefficients = field(default_factory=RewardCoefficients)
    rays: RayConfig = field(default_factory=RayConfig)
    fuel: FuelModel = field(default_factory=FuelModel)
    seed: int = 0
    capture_interval: float | None = None
    expected_lights: int | None = None
    fixed_green: float | None = None
    fixed_speed_limit: float | None = None
    description: str = ""

    def to_dict(self):
        d = asdict(self)
        d["city"] = self.city.to_dict()
        return d


def presets_dir():
    return Path(Config.DATA_DIR) / "presets"


def list_presets():
    """Names of the preset files shipped in the data directory."""
    return sorted(p.stem for p in presets_dir().glob("*.yaml"))


def _resolve(name_or_path):
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") and path.exists():
        return path
    candidate = presets_dir() / f"{name_or_path}.yaml"
    if candidate.exists():
        return candidate
    raise ConfigError(f"unknown scenario {name_or_path!r}; available: {', '.join(list_presets())}")


def scenario_from_dict(data, default_name="scenario"):
    unknown = set(data) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        return Scenario(
            name=data.get("name", default_name),
            description=data.get("description", ""),
            seed=int(data.get("seed", 0)),
            city=CityGenConfig(**(data.get("city") or {})),
            spawn=SpawnConfig.from_dict(data.get("spawn")),
            episode=EpisodeConfig.from_dict(data.get("episode")),
            rewards=RewardCoefficients.from_dict(data.get("rewards")),
            rays=RayConfig(**(data.get("rays") or {})),
            fuel=FuelModel.from_dict(data.get("fuel")),
            capture_interval=data.get("capture_interval"),
            expected_lights=data.get("expected_lights"),
            fixed_green=data.get("fixed_green"),
            fixed_speed_limit=data.get("fixed_speed_limit"),
        )
    except TypeError as e:
        raise ConfigError(f"malformed scenario {default_name!r}: {e}") from e
    except TrafficLabError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"invalid scenario {default_name!r}: {e}") from e


def load_scenario(name_or_path, seed=None):
    """Scenario by preset name or YAML path; `seed` overrides the file's seed."""
    path = _resolve(name_or_path)
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if seed is not None:
        data["seed"] = int(seed)
    return scenario_from_dict(data, default_name=path.stem)
