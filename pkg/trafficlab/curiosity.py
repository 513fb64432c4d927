"""
Curiosity Module
Intrinsic reward from the prediction error of a learned forward model in an
encoded observation space. An inverse model trained on the same encoding
keeps the encoder from collapsing to a constant.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
import torch.optim as optim

from trafficlab.ppo_networks import mlp

FORWARD_WEIGHT = 0.2
INVERSE_WEIGHT = 0.8


class CuriosityModule(nn.Module):
    def __init__(self, obs_size, action_size, hidden_units=256, num_layers=2,
                 strength=0.02, learning_rate=3e-4):
        super().__init__()
        self.strength = strength
        self.encoder = mlp(obs_size, hidden_units, num_layers)
        self.forward_model = nn.Sequential(
            nn.Linear(hidden_units + action_size, hidden_units), nn.SiLU(),
            nn.Linear(hidden_units, hidden_units),
        )
        self.inverse_model = nn.Sequential(
            nn.Linear(2 * hidden_units, hidden_units), nn.SiLU(),
            nn.Linear(hidden_units, action_size), nn.Tanh(),
        )
        self.optimizer = optim.Adam(self.parameters(), lr=learning_rate)

    def _tensor(self, x):
        param = next(self.parameters())
        return torch.as_tensor(np.asarray(x), dtype=param.dtype, device=param.device)

    def prediction_error(self, obs, action, next_obs):
        """Per-sample 0.5 * ||predicted - encoded next||^2, with the encodings."""
        phi = self.encoder(obs)
        phi_next = self.encoder(next_obs)
        predicted = self.forward_model(torch.cat([phi, action], dim=-1))
        return 0.5 * (predicted - phi_next).pow(2).sum(-1), phi, phi_next

    def losses(self, obs, action, next_obs):
        forward_err, phi, phi_next = self.prediction_error(obs, action, next_obs)
        predicted_action = self.inverse_model(torch.cat([phi, phi_next], dim=-1))
        forward_loss = forward_err.mean()
        inverse_loss = F.mse_loss(predicted_action, action)
        total = FORWARD_WEIGHT * forward_loss + INVERSE_WEIGHT * inverse_loss
        return {"forward_loss": forward_loss, "inverse_loss": inverse_loss, "total": total}

    @torch.no_grad()
    def reward(self, obs, action, next_obs):
        """Intrinsic reward per transition, always >= 0."""
        if self.strength == 0.0:
            return np.zeros(len(obs))
        err, _, _ = self.prediction_error(self._tensor(obs), self._tensor(action),
                                          self._tensor(next_obs))
        return self.strength * err.double().cpu().numpy()

    def update(self, obs, action, next_obs, batch_size, permutation):
        """One pass over the buffer in minibatches; returns mean losses."""
        obs, action, next_obs = self._tensor(obs), self._tensor(action), self._tensor(next_obs)
        fwd, inv, n = 0.0, 0.0, 0
        for start in range(0, len(permutation), batch_size):
            idx = torch.as_tensor(permutation[start:start + batch_size])
            out = self.losses(obs[idx], action[idx], next_obs[idx])
            self.optimizer.zero_grad()
            out["total"].backward()
            self.optimizer.step()
            fwd += out["forward_loss"].item()
            inv += out["inverse_loss"].item()
            n += 1
        return {"forward_loss": fwd / max(n, 1), "inverse_loss": inv / max(n, 1)}
