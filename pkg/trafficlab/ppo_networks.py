"""
Policy / Value Networks
Running observation normalizer, separate actor and critic MLP trunks, a
Gaussian policy head with state-independent log-std and a tanh squash.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.distributions import Normal

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
NORMALIZER_CLIP = 5.0
_LOG2 = math.log(2.0)


class RunningNormalizer(nn.Module):
    """Running mean / variance over observations.

    Statistics are float64 numpy arrays merged batch by batch (Chan et al.
    parallel update) and travel in the state dict as extra state, so casting
    the module to float32 or float64 never touches them.
    """

    def __init__(self, size, epsilon=1e-8):
        super().__init__()
        self.size = int(size)
        self.epsilon = epsilon
        self.count = 0.0
        self.mean = np.zeros(self.size)
        self.var = np.ones(self.size)

    def update(self, batch):
        x = np.asarray(batch, dtype=np.float64).reshape(-1, self.size)
        n = x.shape[0]
        if n == 0:
            return
        b_mean = x.mean(axis=0)
        b_var = x.var(axis=0)
        if self.count == 0:
            self.mean, self.var, self.count = b_mean, b_var, float(n)
            return
        total = self.count + n
        delta = b_mean - self.mean
        m2 = self.var * self.count + b_var * n + delta ** 2 * self.count * n / total
        self.mean = self.mean + delta * n / total
        self.var = m2 / total
        self.count = total

    def forward(self, x):
        mean = torch.as_tensor(self.mean, dtype=x.dtype, device=x.device)
        std = torch.as_tensor(np.sqrt(self.var + self.epsilon), dtype=x.dtype, device=x.device)
        return ((x - mean) / std).clamp(-NORMALIZER_CLIP, NORMALIZER_CLIP)

    def get_extra_state(self):
        return {"count": self.count, "mean": self.mean.tolist(), "var": self.var.tolist()}

    def set_extra_state(self, state):
        self.count = float(state["count"])
        self.mean = np.asarray(state["mean"], dtype=np.float64)
        self.var = np.asarray(state["var"], dtype=np.float64)


def mlp(in_size, hidden_units, num_layers):
    layers, size = [], in_size
    for _ in range(num_layers):
        layers += [nn.Linear(size, hidden_units), nn.SiLU()]
        size = hidden_units
    return nn.Sequential(*layers)


def squash_log_prob(dist, raw):
    """Log-prob of tanh(raw): the Gaussian term minus log|d tanh/d raw|."""
    correction = 2.0 * (_LOG2 - raw - F.softplus(-2.0 * raw))
    return (dist.log_prob(raw) - correction).sum(-1)


class PolicyValueNet(nn.Module):
    def __init__(self, obs_size, action_size, hidden_units=512, num_layers=2, normalize=True):
        super().__init__()
        self.obs_size = int(obs_size)
        self.action_size = int(action_size)
        self.hidden_units = hidden_units
        self.num_layers = num_layers
        self.normalize = normalize
        self.normalizer = RunningNormalizer(obs_size)
        self.actor = mlp(obs_size, hidden_units, num_layers)
        self.critic = mlp(obs_size, hidden_units, num_layers)
        self.mean_head = nn.Linear(hidden_units, action_size)
        self.value_head = nn.Linear(hidden_units, 1)
        self.log_std = nn.Parameter(torch.zeros(action_size))

    def architecture(self):
        return {"obs_size": self.obs_size, "action_size": self.action_size,
                "hidden_units": self.hidden_units, "num_layers": self.num_layers,
                "normalize": self.normalize}

    def _inputs(self, obs):
        return self.normalizer(obs) if self.normalize else obs

    def distribution(self, obs):
        x = self._inputs(obs)
        mean = self.mean_head(self.actor(x))
        std = self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX).exp().expand_as(mean)
        return Normal(mean, std)

    def value(self, obs):
        return self.value_head(self.critic(self._inputs(obs))).squeeze(-1)

    def evaluate(self, obs, raw_actions):
        """New log-probs of stored pre-squash actions, base entropy and values."""
        dist = self.distribution(obs)
        log_prob = squash_log_prob(dist, raw_actions)
        entropy = dist.entropy().sum(-1)
        return log_prob, entropy, self.value(obs)

    @torch.no_grad()
    def act(self, obs, deterministic=False, generator=None):
        """
        Sample one action batch
        Returns (squashed action, pre-squash action, log-prob, value).
        """
        dist = self.distribution(obs)
        if deterministic:
            raw = dist.mean
        else:
            noise = torch.randn(dist.mean.shape, generator=generator, dtype=dist.mean.dtype)
            raw = dist.mean + dist.stddev * noise.to(dist.mean.device)
        return torch.tanh(raw), raw, squash_log_prob(dist, raw), self.value(obs)


def policy_inference(net, obs, deterministic=True, generator=None):
    """Action in [-1, 1] for one observation vector."""
    param = next(net.parameters())
    x = torch.as_tensor(np.asarray(obs), dtype=param.dtype, device=param.device).reshape(1, -1)
    action, _, _, _ = net.act(x, deterministic=deterministic, generator=generator)
    return action[0].cpu().numpy()
