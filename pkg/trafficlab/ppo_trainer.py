"""
PPO Trainer
Clipped-surrogate PPO with GAE, entropy bonus, linear schedules, curiosity
reward and rotating checkpoints. Rollouts come from one TrafficSignalEnv;
intrinsic and extrinsic rewards are summed per step before a single GAE pass.
"""

from __future__ import annotations

import logging
import math
import re
from pathlib import Path

import numpy as np
import pandas as pd
import torch
import torch.optim as optim

from config import Config
from trafficlab.curiosity import CuriosityModule
from trafficlab.errors import CheckpointError, NonFiniteLoss
from trafficlab.ppo_buffer import RolloutBuffer, normalize_advantages
from trafficlab.ppo_config import Hyperparams
from trafficlab.ppo_networks import PolicyValueNet
from trafficlab.rng import POLICY, RngStreams

LOG = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
VALUE_LOSS_WEIGHT = 0.5
FINAL_LEARNING_RATE = 1e-10
FINAL_BETA = 1e-5
FINAL_EPSILON = 0.1
SCALAR_COLUMNS = ["step", "cumulative_reward", "policy_loss", "value_loss", "value_estimate",
                  "curiosity_reward", "entropy", "learning_rate", "beta", "epsilon"]
_CHECKPOINT_RE = re.compile(r"step_(\d+)\.pt$")


def linear_decay(initial, final, step, max_steps):
    frac = min(max(step / max_steps, 0.0), 1.0)
    return initial + (final - initial) * frac


def schedules(hp, step):
    """Learning rate, entropy coefficient and clip range at `step`."""
    def pick(kind, initial, final):
        return initial if kind == "constant" else linear_decay(initial, final, step, hp.max_steps)
    return {
        "learning_rate": pick(hp.learning_rate_schedule, hp.learning_rate, FINAL_LEARNING_RATE),
        "beta": pick(hp.beta_schedule, hp.beta, FINAL_BETA),
        "epsilon": pick(hp.epsilon_schedule, hp.epsilon, FINAL_EPSILON),
    }


# ------------------------------------------------------------------ #
#  Update
# ------------------------------------------------------------------ #

def ppo_losses(net, obs, raw_actions, old_log_probs, advantages, returns, epsilon, beta):
    log_prob, entropy, values = net.evaluate(obs, raw_actions)
    ratio = torch.exp(log_prob - old_log_probs)
    surr1 = ratio * advantages
    surr2 = torch.clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantages
    policy_loss = -torch.min(surr1, surr2).mean()
    value_loss = (values - returns).pow(2).mean()
    entropy = entropy.mean()
    total = policy_loss + VALUE_LOSS_WEIGHT * value_loss - beta * entropy
    return {"policy_loss": policy_loss, "value_loss": value_loss, "entropy": entropy,
            "total": total, "ratio": ratio}


def ppo_update(buffer, net, optimizer, hp, step=0, generator=None):
    """
    Run num_epoch epochs of minibatch updates over a full buffer
    Advantages are normalized over the whole buffer first. The observation
    normalizer absorbs the buffer's observations after the update, so the
    ratios inside one update all see the same statistics.
    """
    sched = schedules(hp, step)
    for group in optimizer.param_groups:
        group["lr"] = sched["learning_rate"]

    param = next(net.parameters())
    n = buffer.size

    def tensor(a):
        return torch.as_tensor(a[:n], dtype=param.dtype, device=param.device)

    obs, raw = tensor(buffer.obs), tensor(buffer.raw_actions)
    old_lp = tensor(buffer.log_probs)
    adv = tensor(normalize_advantages(buffer.advantages[:n]))
    ret = tensor(buffer.returns)

    totals = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0}
    batches = 0
    for _ in range(hp.num_epoch):
        perm = torch.randperm(n, generator=generator)
        for idx in buffer.minibatches(hp.batch_size, perm):
            out = ppo_losses(net, obs[idx], raw[idx], old_lp[idx], adv[idx], ret[idx],
                             sched["epsilon"], sched["beta"])
            if not torch.isfinite(out["total"]):
                raise NonFiniteLoss({
                    "step": step,
                    "policy_loss": out["policy_loss"].item(),
                    "value_loss": out["value_loss"].item(),
                    "entropy": out["entropy"].item(),
                    "max_ratio": out["ratio"].max().item(),
                    "log_std": net.log_std.detach().cpu().tolist(),
                })
            optimizer.zero_grad()
            out["total"].backward()
            optimizer.step()
            for key in totals:
                totals[key] += out[key].item()
            batches += 1

    if net.normalize:
        net.normalizer.update(buffer.obs[:n])
    report = {k: v / max(batches, 1) for k, v in totals.items()}
    report.update(sched)
    return report


# ------------------------------------------------------------------ #
#  Checkpoints
# ------------------------------------------------------------------ #

def checkpoint_paths(directory):
    """Checkpoint files in `directory`, oldest step first."""
    directory = Path(directory)
    if not directory.exists():
        return []
    found = []
    for p in directory.glob("step_*.pt"):
        m = _CHECKPOINT_RE.search(p.name)
        if m:
            found.append((int(m.group(1)), p))
    return [p for _, p in sorted(found)]


def save_checkpoint(path, trainer):
    state = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "step": trainer.step,
        "episodes": trainer.episodes,
        "architecture": trainer.net.architecture(),
        "hyperparams": trainer.hp.to_dict(),
        "net": trainer.net.state_dict(),
        "optimizer": trainer.optimizer.state_dict(),
        "curiosity": trainer.curiosity.state_dict(),
        "curiosity_optimizer": trainer.curiosity.optimizer.state_dict(),
        "generator": trainer.generator.get_state(),
    }
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(state, path)
    except (OSError, RuntimeError) as e:
        raise CheckpointError(f"cannot write checkpoint {path}: {e}") from e
    LOG.info("checkpoint step=%d -> %s", trainer.step, path)
    return path


def read_checkpoint(path):
    path = Path(path)
    try:
        state = torch.load(path, map_location=Config.DEVICE, weights_only=False)
    except (OSError, RuntimeError, EOFError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    version = state.get("format_version") if isinstance(state, dict) else None
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format {version!r}")
    return state


def load_policy(path):
    """PolicyValueNet restored from a checkpoint, in eval mode."""
    state = read_checkpoint(path)
    net = PolicyValueNet(**state["architecture"])
    net.load_state_dict(state["net"])
    net.eval()
    return net


# ================================================================== #
#  Trainer
# ================================================================== #

class PPOTrainer:
    def __init__(self, env, hp: Hyperparams, run_dir=None):
        self.env = env
        self.hp = hp
        self.run_dir = Path(run_dir or Path(Config.OUTPUT_DIR) / "train" / hp.run_id)
        self.checkpoint_dir = self.run_dir / "checkpoints"
        self.streams = RngStreams(hp.seed)

        torch.manual_seed(self.streams.derive_int(POLICY))
        self.generator = torch.Generator().manual_seed(self.streams.derive_int(POLICY + "/sample"))

        obs_size = env.observation_space.shape[0]
        action_size = env.action_space.shape[0]
        self.net = PolicyValueNet(obs_size, action_size, hp.hidden_units, hp.num_layers,
                                  hp.normalize).to(Config.DEVICE)
        self.optimizer = optim.Adam(self.net.parameters(), lr=hp.learning_rate)
        self.curiosity = CuriosityModule(obs_size, action_size, hp.curiosity_hidden_units,
                                         hp.curiosity_num_layers, hp.curiosity_strength,
                                         hp.curiosity_learning_rate).to(Config.DEVICE)
        self.buffer = RolloutBuffer(hp.buffer_size, obs_size, action_size)

        self.step = 0
        self.episodes = 0
        self.scalars = []
        self.episode_returns = []
        self.last_update = {}

        if hp.resume:
            self._resume()
        elif hp.init_path:
            self._warm_start(hp.init_path)

    # -------------------------------------------------------------- #

    def _resume(self):
        paths = checkpoint_paths(self.checkpoint_dir)
        if not paths:
            LOG.warning("resume requested but no checkpoint in %s; starting fresh",
                        self.checkpoint_dir)
            return
        state = read_checkpoint(paths[-1])
        self.net.load_state_dict(state["net"])
        self.optimizer.load_state_dict(state["optimizer"])
        self.curiosity.load_state_dict(state["curiosity"])
        self.curiosity.optimizer.load_state_dict(state["curiosity_optimizer"])
        self.generator.set_state(state["generator"])
        self.step = int(state["step"])
        self.episodes = int(state["episodes"])
        scalars = self.run_dir / "scalars.csv"
        if scalars.exists():
            self.scalars = pd.read_csv(scalars).to_dict("records")
        LOG.info("resumed %s at step %d", self.hp.run_id, self.step)

    def _warm_start(self, path):
        state = read_checkpoint(path)
        self.net.load_state_dict(state["net"])
        LOG.info("initialized weights from %s", path)

    def _tensor(self, obs):
        param = next(self.net.parameters())
        return torch.as_tensor(obs, dtype=param.dtype, device=param.device).reshape(1, -1)

    @torch.no_grad()
    def _value(self, obs):
        return self.net.value(self._tensor(obs)).item()

    def _reset_env(self):
        obs, _ = self.env.reset(seed=self.hp.seed + self.episodes)
        return obs

    def _close_segment(self, bootstrap):
        b = self.buffer
        seg = b.open_segment
        b.int_rewards[seg] = self.curiosity.reward(b.obs[seg], b.actions[seg], b.next_obs[seg])
        b.finish_segment(bootstrap, self.hp.gamma, self.hp.lambd, self.hp.extrinsic_strength)

    def _update(self):
        b = self.buffer
        value_estimate = float(b.values[:b.size].mean())
        curiosity_reward = float(b.int_rewards[:b.size].mean())
        report = ppo_update(b, self.net, self.optimizer, self.hp, self.step, self.generator)
        perm = torch.randperm(b.size, generator=self.generator).numpy()
        report.update(self.curiosity.update(b.obs[:b.size], b.actions[:b.size],
                                            b.next_obs[:b.size], self.hp.batch_size, perm))
        report.update(value_estimate=value_estimate, curiosity_reward=curiosity_reward)
        b.clear()
        self.last_update = report
        LOG.info("update step=%d policy_loss=%.4f value_loss=%.4f entropy=%.3f lr=%.2e",
                 self.step, report["policy_loss"], report["value_loss"], report["entropy"],
                 report["learning_rate"])

    def _summarize(self):
        u = self.last_update
        sched = schedules(self.hp, self.step)
        row = {
            "step": self.step,
            "cumulative_reward": float(np.mean(self.episode_returns)) if self.episode_returns else math.nan,
            "policy_loss": u.get("policy_loss", math.nan),
            "value_loss": u.get("value_loss", math.nan),
            "value_estimate": u.get("value_estimate", math.nan),
            "curiosity_reward": u.get("curiosity_reward", math.nan),
            "entropy": u.get("entropy", math.nan),
            **sched,
        }
        self.scalars.append(row)
        self.episode_returns = []
        self.write_scalars()
        LOG.info("step=%d cumulative_reward=%s", self.step, row["cumulative_reward"])

    def write_scalars(self):
        path = self.run_dir / "scalars.csv"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            pd.DataFrame(self.scalars, columns=SCALAR_COLUMNS).to_csv(
                path, index=False, float_format="%.8g", lineterminator="\n")
        except OSError as e:
            raise CheckpointError(f"cannot write scalar log {path}: {e}") from e
        return path

    def save(self):
        path = save_checkpoint(self.checkpoint_dir / f"step_{self.step}.pt", self)
        for old in checkpoint_paths(self.checkpoint_dir)[:-self.hp.keep_checkpoints]:
            old.unlink()
            LOG.debug("rotated out %s", old)
        return path

    # -------------------------------------------------------------- #

    def run(self, max_steps=None):
        """Train until `max_steps` (default hp.max_steps) decisions; returns the last checkpoint."""
        hp = self.hp
        max_steps = max_steps or hp.max_steps
        LOG.info("training %s on %s: %d steps, buffer %d, time_scale %.1f",
                 hp.run_id, hp.scenario, max_steps, hp.buffer_size, hp.time_scale)
        obs = self._reset_env()
        episode_return, segment_len = 0.0, 0
        last = None

        while self.step < max_steps:
            action, raw, log_prob, value = self.net.act(self._tensor(obs), generator=self.generator)
            action_np = action[0].cpu().numpy()
            next_obs, reward, terminated, truncated, _ = self.env.step(action_np)
            done = terminated or truncated
            self.buffer.add(obs, action_np, raw[0].cpu().numpy(), log_prob.item(),
                            reward, value.item(), terminated, next_obs)
            self.step += 1
            segment_len += 1
            episode_return += reward

            if done or segment_len >= hp.time_horizon or self.buffer.full:
                bootstrap = 0.0 if terminated else self._value(next_obs)
                self._close_segment(bootstrap)
                segment_len = 0

            if done:
                self.episodes += 1
                self.episode_returns.append(episode_return)
                episode_return = 0.0
                obs = self._reset_env()
            else:
                obs = next_obs

            if self.buffer.full:
                self._update()
            if self.step % hp.summary_freq == 0:
                self._summarize()
            if self.step % hp.checkpoint_interval == 0:
                last = self.save()

        if last is None or self.step % hp.checkpoint_interval:
            last = self.save()
        self.write_scalars()
        return last


def train(env, hp, run_dir=None, max_steps=None):
    """Train a policy on `env`; returns the trainer after its final checkpoint."""
    trainer = PPOTrainer(env, hp, run_dir)
    trainer.run(max_steps)
    return trainer
