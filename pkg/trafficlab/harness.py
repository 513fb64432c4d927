"""
Experiment Harness
Runs a scenario over several seeds in baseline, trained-policy or
fixed-action mode, writes the per-seed CSV logs and summaries, and compares
two run directories metric by metric with Welch's t-test.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from scipy import stats

from config import Config
from trafficlab.errors import CheckpointError, ConfigError, SchemaMismatch
from trafficlab.metrics import (BIN_LABELS, VEHICLE_COLUMNS, capture_schedule, write_collision_log,
                                write_metrics_csv, write_signal_log, write_timeline)
from trafficlab.ppo_networks import policy_inference
from trafficlab.ppo_trainer import load_policy
from trafficlab.presets import load_scenario
from trafficlab.rl_env import EpisodeConfig, TrafficSignalEnv

LOG = logging.getLogger(__name__)

MODES = ("baseline", "policy", "fixed_action")
RESOLUTION_EDGES = (0.0, 5.0, 10.0, 15.0, 30.0, 60.0, math.inf)
RESOLUTION_LABELS = ("0_5", "5_10", "10_15", "15_30", "30_60", "60_plus")

# (column, aggregate, better) - "total" metrics are per-seed sums averaged over
# seeds, "mean" metrics are per-vehicle means over the pooled fleet.
METRICS = (
    ("serious_collisions", "total", "lower"),
    ("vv_collisions", "total", "lower"),
    ("vnv_collisions", "total", "lower"),
    ("distance_total", "mean", "higher"),
    ("stopped_total", "mean", "lower"),
    *((label, "mean", "higher" if label == "bin_25_30" else "neutral") for label in BIN_LABELS),
    ("fuel_gal_per_mile", "mean", "lower"),
    ("co2_g_per_mile", "mean", "lower"),
)
HEADLINE_METRICS = ("serious_collisions", "vv_collisions", "vnv_collisions", "distance_total",
                    "stopped_total", "bin_25_30", "fuel_gal_per_mile", "co2_g_per_mile")
REPORT_COLUMNS = ["metric", "aggregate", "better", "baseline_mean", "model_mean",
                  "percent_change", "improvement", "p_value", "baseline_n", "model_n"]


# ------------------------------------------------------------------ #
#  Experiment config
# ------------------------------------------------------------------ #

@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    mode: str = "baseline"
    seeds: tuple = (0, 1, 2)
    checkpoint: str | None = None
    fixed_action: tuple | None = None
    output_dir: str | None = None
    episode: dict = field(default_factory=dict)
    capture_interval: float | None = None
    hash_every: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode {self.mode!r} not one of {MODES}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"duplicate seeds in {self.seeds}")
        if self.mode == "policy":
            if not self.checkpoint:
                raise ConfigError("policy mode needs a checkpoint")
            if not Path(self.checkpoint).is_file():
                raise CheckpointError(f"checkpoint {self.checkpoint} does not exist")
        if self.mode == "fixed_action" and not self.fixed_action:
            raise ConfigError("fixed_action mode needs an action vector")

    @property
    def out(self):
        return Path(self.output_dir or Path(Config.OUTPUT_DIR) / "experiments" / f"{self.scenario}_{self.mode}")

    def to_dict(self):
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["fixed_action"] = list(self.fixed_action) if self.fixed_action else None
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        if "seeds" in data:
            data["seeds"] = tuple(int(s) for s in data["seeds"])
        if data.get("fixed_action") is not None:
            data["fixed_action"] = tuple(float(a) for a in data["fixed_action"])
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"malformed experiment config: {e}") from e


def load_experiment(path, **overrides):
    path = Path(path)
    if not path.exists():
        candidate = Path(Config.DATA_DIR) / "experiments" / f"{path}.yaml"
        if not candidate.exists():
            raise ConfigError(f"experiment config {path} not found")
        path = candidate
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


# ------------------------------------------------------------------ #
#  Running
# ------------------------------------------------------------------ #

def resolution_histogram(rows):
    """Episode counts per duration bin, plus the share of minor episodes resolved in 10-15 s."""
    durations = np.array([r["episode_duration"] for r in rows], dtype=float)
    serious = np.array([bool(r["serious"]) for r in rows], dtype=bool)
    counts, _ = np.histogram(durations, bins=RESOLUTION_EDGES)
    minor = durations[~serious]
    in_band = np.count_nonzero((minor >= 10.0) & (minor < 15.0))
    return {
        "counts": dict(zip(RESOLUTION_LABELS, (int(c) for c in counts))),
        "minor_episodes": int(len(minor)),
        "minor_resolved_10_15_share": float(in_band / len(minor)) if len(minor) else 0.0,
    }


def _scenario_for(config, seed):
    scenario = load_scenario(config.scenario, seed=seed)
    if config.episode:
        merged = {**asdict(scenario.episode), **config.episode}
        scenario = replace(scenario, episode=EpisodeConfig.from_dict(merged))
    if config.capture_interval is not None:
        scenario = replace(scenario, capture_interval=config.capture_interval)
    return scenario


def _policy_for(config):
    if config.mode == "policy":
        net = load_policy(config.checkpoint)
        return lambda obs: policy_inference(net, obs, deterministic=True)
    if config.mode == "fixed_action":
        action = np.asarray(config.fixed_action, dtype=np.float32)
        return lambda obs: action
    return lambda obs: None


def run_seed(config, seed):
    """One episode for one seed; writes its files and returns the summary dict."""
    scenario = _scenario_for(config, seed)
    episode = scenario.episode
    captures_at = capture_schedule(episode.duration, scenario.capture_interval)
    for t in captures_at:
        k = t / episode.decision_interval
        if abs(k - round(k)) > 1e-9:
            raise ConfigError(f"capture time {t} is not on a {episode.decision_interval} s decision boundary")

    env = TrafficSignalEnv(scenario, hash_every=config.hash_every)
    act = _policy_for(config)
    obs, _ = env.reset(seed=seed)

    started = time.perf_counter()
    captures, episode_reward = [], 0.0
    terms = {}
    pending = list(captures_at)
    terminated = False
    while not terminated:
        obs, reward, terminated, _, info = env.step(act(obs))
        episode_reward += reward
        for key, value in info["reward"].to_dict().items():
            terms[key] = terms.get(key, 0.0) + value
        while pending and pending[0] <= env.world.sim_time + 1e-9:
            captures.append(env.world.metrics.capture(pending.pop(0)))
    wall = time.perf_counter() - started

    world = env.world
    out = config.out
    rows = world.collision_rows()
    write_metrics_csv(captures, out / f"vehicles_seed{seed}.csv")
    write_collision_log(rows, out / f"collisions_seed{seed}.csv")
    write_signal_log(world.signals, out / f"signals_seed{seed}.csv")
    write_timeline(world.metrics.timeline, out / f"timeline_seed{seed}.csv")

    summary = {
        "seed": seed,
        "scenario": scenario.name,
        "mode": config.mode,
        "sim_time": world.sim_time,
        "episode_reward": episode_reward,
        "reward_terms": terms,
        "global": asdict(world.metrics.global_metrics()),
        "resolution": resolution_histogram(rows),
    }
    (out / f"summary_seed{seed}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    throughput = world.sim_time / wall if wall > 0 else math.inf
    if throughput < Config.THROUGHPUT_TARGET:
        LOG.warning("seed %d ran at %.1fx real time, below the %.1fx target",
                    seed, throughput, Config.THROUGHPUT_TARGET)
    LOG.info("seed %d done: reward=%.4f serious=%d vv=%d vnv=%d (%.1fx real time)",
             seed, episode_reward, summary["global"]["serious_collisions"],
             summary["global"]["vv_collisions"], summary["global"]["vnv_collisions"], throughput)
    return summary


def run_experiment(config):
    """Run every seed of `config`; one worker process per seed when workers > 1."""
    out = config.out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {out}: {e}") from e
    (out / "experiment.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    LOG.info("experiment %s/%s: seeds %s -> %s", config.scenario, config.mode, list(config.seeds), out)

    if config.workers > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, len(config.seeds))) as pool:
            summaries = list(pool.map(run_seed, [config] * len(config.seeds), config.seeds))
    else:
        summaries = [run_seed(config, seed) for seed in config.seeds]
    return {"ok": True, "output_dir": str(out), "seeds": summaries}


# ================================================================== #
#  Comparison
# ================================================================== #

def load_vehicle_frames(directory):
    """Final capture of every vehicles_seed<N>.csv in `directory`, keyed by seed."""
    directory = Path(directory)
    frames = {}
    for path in sorted(directory.glob("vehicles_seed*.csv")):
        seed = int(path.stem.removeprefix("vehicles_seed"))
        frame = pd.read_csv(path)
        if len(frame):
            frame = frame[frame["capture_time"] == frame["capture_time"].max()]
        frames[seed] = frame
    if len(frames) < 2:
        raise ConfigError(f"{directory} holds {len(frames)} seed(s); comparison needs at least 2")
    columns = {tuple(f.columns) for f in frames.values()}
    if len(columns) != 1:
        raise SchemaMismatch(f"{directory}: seeds disagree on columns")
    return frames


def percent_change(baseline, model):
    return (model - baseline) / baseline * 100.0 if baseline else 0.0


def welch_p_value(a, b):
    """Two-sided Welch t-test p-value; degenerate samples compare as p = 1."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = a[~np.isnan(a)], b[~np.isnan(b)]
    if len(a) < 2 or len(b) < 2:
        return 1.0
    _, p = stats.ttest_ind(a, b, equal_var=False)
    return 1.0 if np.isnan(p) else float(p)


def _aggregate(frames, column, how):
    pooled = pd.concat([f[column] for f in frames.values()], ignore_index=True).to_numpy(dtype=float)
    if how == "total":
        value = float(np.mean([f[column].sum() for f in frames.values()]))
    else:
        value = float(np.nanmean(pooled)) if np.any(~np.isnan(pooled)) else 0.0
    return value, pooled


@dataclass
class ComparisonReport:
    rows: list
    baseline_dir: str
    model_dir: str
    resolution: dict = field(default_factory=dict)

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=REPORT_COLUMNS)

    def row(self, metric):
        for r in self.rows:
            if r["metric"] == metric:
                return r
        raise KeyError(metric)

    def summary_text(self):
        lines = [f"baseline: {self.baseline_dir}", f"model:    {self.model_dir}", ""]
        for r in self.rows:
            lines.append(f"{r['metric']:<22} {r['baseline_mean']:>14.4f} {r['model_mean']:>14.4f} "
                         f"{r['percent_change']:>+9.2f}%  p={r['p_value']:.3g}")
        for side, hist in self.resolution.items():
            counts = ", ".join(f"{k}:{v}" for k, v in hist["counts"].items())
            lines.append(f"{side} resolution {counts}; minor 10-15 s share "
                         f"{hist['minor_resolved_10_15_share']:.3f}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(out / "comparison.csv", index=False, float_format="%.6g",
                               lineterminator="\n")
        (out / "comparison.txt").write_text(self.summary_text())
        return out


def _pooled_resolution(directory):
    rows = []
    for path in sorted(Path(directory).glob("collisions_seed*.csv")):
        frame = pd.read_csv(path)
        rows += frame.to_dict("records")
    return resolution_histogram(rows)


def compare(baseline_dir, model_dir, out_dir=None):
    """
    Compare two experiment directories
    Vehicles are pooled across seeds. Percent change is (model - baseline) /
    baseline * 100; `improvement` flips the sign for lower-is-better metrics
    so reductions in collisions, stopped time and fuel read as positive.
    """
    base = load_vehicle_frames(baseline_dir)
    model = load_vehicle_frames(model_dir)
    base_cols = set(next(iter(base.values())).columns)
    model_cols = set(next(iter(model.values())).columns)
    if base_cols != model_cols:
        raise SchemaMismatch(f"column sets differ: {sorted(base_cols ^ model_cols)}")
    missing = set(VEHICLE_COLUMNS) - base_cols
    if missing:
        raise SchemaMismatch(f"missing vehicle columns: {sorted(missing)}")

    rows = []
    for column, how, better in METRICS:
        b_value, b_pooled = _aggregate(base, column, how)
        m_value, m_pooled = _aggregate(model, column, how)
        change = percent_change(b_value, m_value)
        improvement = -change if better == "lower" else change
        rows.append({
            "metric": column, "aggregate": how, "better": better,
            "baseline_mean": b_value, "model_mean": m_value,
            "percent_change": change, "improvement": improvement,
            "p_value": welch_p_value(b_pooled, m_pooled),
            "baseline_n": int(len(b_pooled)), "model_n": int(len(m_pooled)),
        })

    report = ComparisonReport(rows, str(baseline_dir), str(model_dir), {
        "baseline": _pooled_resolution(baseline_dir),
        "model": _pooled_resolution(model_dir),
    })
    if out_dir is not None:
        report.write(out_dir)
        LOG.info("comparison written to %s", out_dir)
    return report


def load_report(out_dir):
    """ComparisonReport read back from a directory written by compare()."""
    path = Path(out_dir) / "comparison.csv"
    if not path.exists():
        raise ConfigError(f"no comparison.csv in {out_dir}")
    frame = pd.read_csv(path)
    if list(frame.columns) != REPORT_COLUMNS:
        raise SchemaMismatch(f"{path}: unexpected columns {list(frame.columns)}")
    return ComparisonReport(frame.to_dict("records"), "", "")
