"""
Rollout Buffer
Fixed-capacity transition storage plus generalized advantage estimation
over closed segments (episode end or time-horizon truncation).
"""

from __future__ import annotations

import numpy as np

from trafficlab.errors import LengthMismatch


def compute_gae(rewards, values, dones, gamma, lam):
    """
    Generalized advantage estimation
    `values` carries one more entry than `rewards`: the bootstrap value of
    the observation after the last step (ignored where that step is done).
    Returns (advantages, returns), float64.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    n = len(rewards)
    if len(dones) != n or len(values) != n + 1:
        raise LengthMismatch(
            f"rewards {n}, dones {len(dones)}, values {len(values)} (expected {n + 1})")

    advantages = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * live - values[t]
        running = delta + gamma * lam * live * running
        advantages[t] = running
    return advantages, advantages + values[:-1]


def normalize_advantages(advantages, eps=1e-8):
    a = np.asarray(advantages, dtype=np.float64)
    if len(a) < 2:
        return a - a.mean() if len(a) else a
    return (a - a.mean()) / (a.std() + eps)


class RolloutBuffer:
    def __init__(self, capacity, obs_size, action_size):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_size), dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_size), dtype=np.float32)
        self.raw_actions = np.zeros((capacity, action_size), dtype=np.float32)
        self.actions = np.zeros((capacity, action_size), dtype=np.float32)
        self.log_probs = np.zeros(capacity, dtype=np.float32)
        self.ext_rewards = np.zeros(capacity)
        self.int_rewards = np.zeros(capacity)
        self.values = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.advantages = np.zeros(capacity)
        self.returns = np.zeros(capacity)
        self.size = 0
        self.segment_start = 0

    @property
    def full(self):
        return self.size >= self.capacity

    @property
    def open_segment(self):
        return slice(self.segment_start, self.size)

    def add(self, obs, action, raw_action, log_prob, reward, value, done, next_obs):
        if self.full:
            raise IndexError("rollout buffer is full")
        i = self.size
        self.obs[i] = obs
        self.actions[i] = action
        self.raw_actions[i] = raw_action
        self.log_probs[i] = log_prob
        self.ext_rewards[i] = reward
        self.values[i] = value
        self.dones[i] = float(done)
        self.next_obs[i] = next_obs
        self.size += 1

    def finish_segment(self, bootstrap_value, gamma, lam, extrinsic_strength=1.0):
        """Close the open segment; intrinsic rewards must already be set on it."""
        seg = self.open_segment
        if seg.start == seg.stop:
            return
        rewards = extrinsic_strength * self.ext_rewards[seg] + self.int_rewards[seg]
        values = np.append(self.values[seg], bootstrap_value)
        adv, ret = compute_gae(rewards, values, self.dones[seg], gamma, lam)
        self.advantages[seg] = adv
        self.returns[seg] = ret
        self.segment_start = self.size

    def minibatches(self, batch_size, permutation):
        """Index arrays of `batch_size` over a permutation of the stored steps."""
        for start in range(0, self.size, batch_size):
            yield permutation[start:start + batch_size]

    def clear(self):
        self.size = 0
        self.segment_start = 0
        self.int_rewards[:] = 0.0
