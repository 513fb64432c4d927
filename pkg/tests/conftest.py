import shutil
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
import torch

from config import BASE_DIR, Config
from trafficlab.geometry import RectSet
from trafficlab.metrics import VEHICLE_COLUMNS
from trafficlab.network import PathContainer, RoadNetwork, Waypoint, generate_city, infer_next_ways, orient_waypoints
from trafficlab.presets import load_scenario
from trafficlab.rl_env import EpisodeConfig


@pytest.fixture
def make_container():
    """Build an oriented container from (x, z) points."""
    def build(cid, points):
        wps = [Waypoint((float(x), 0.0, float(z))) for x, z in points]
        return orient_waypoints(PathContainer(cid, wps))
    return build


@pytest.fixture
def straight_network(make_container):
    """Two straight containers along +z; 0 links into 1, 1 is a dead end."""
    containers = infer_next_ways([
        make_container(0, [(0, 0), (0, 40)]),
        make_container(1, [(0, 60), (0, 100)]),
    ])
    return RoadNetwork(containers, [], [], (0.0, 50.0), 70.0)


@pytest.fixture
def make_rects():
    def build(centers, yaws=None, half_extents=(2.25, 0.95), ids=None):
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        n = len(centers)
        return RectSet(
            ids=np.arange(n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64),
            centers=centers,
            half_extents=np.tile(np.asarray(half_extents, dtype=float), (n, 1)),
            yaws=np.zeros(n) if yaws is None else np.asarray(yaws, dtype=float),
        )
    return build


@pytest.fixture(scope="session")
def desk_scenario():
    return load_scenario("desk")


@pytest.fixture(scope="session")
def desk_network(desk_scenario):
    return generate_city(desk_scenario.city)


@pytest.fixture
def short_desk(desk_scenario):
    """Desk scenario cut down to ten 2-second decisions."""
    return replace(desk_scenario, episode=EpisodeConfig(duration=20.0, decision_interval=2.0))


@pytest.fixture
def data_dir(tmp_path, monkeypatch):
    """Private copy of the shipped data directory, plus a private output directory."""
    data = tmp_path / "data"
    for sub in ("presets", "train", "experiments"):
        shutil.copytree(BASE_DIR / "data" / sub, data / sub)
    (data / "runs.json").write_text('{"runs": []}')
    monkeypatch.setattr(Config, "DATA_DIR", data)
    monkeypatch.setattr(Config, "OUTPUT_DIR", tmp_path / "runs")
    return data


@pytest.fixture
def vehicle_runs(tmp_path):
    """
    Write synthetic experiment directories
    `values` maps a column to one array per seed; unnamed columns are zero.
    """
    def build(name, values, seeds=2, vehicles=4, extra_columns=()):
        out = tmp_path / name
        out.mkdir()
        for seed in range(seeds):
            frame = pd.DataFrame(0.0, index=range(vehicles), columns=VEHICLE_COLUMNS + list(extra_columns))
            frame["capture_time"] = 600.0
            frame["vehicle_id"] = range(vehicles)
            for column, per_seed in values.items():
                frame[column] = per_seed[seed]
            frame.to_csv(out / f"vehicles_seed{seed}.csv", index=False)
            pd.DataFrame({"time": [0.0, 60.0], "mean_stopped_total": [0.0, 10.0 + seed]}).to_csv(
                out / f"timeline_seed{seed}.csv", index=False)
        return out
    return build


@pytest.fixture
def check_gradients():
    """Compare autograd with central differences on a few entries of each named parameter."""
    def check(loss_fn, module, names, rng, picks=3, h=1e-6):
        params = dict(module.named_parameters())
        chosen = [params[n] for n in names]
        grads = torch.autograd.grad(loss_fn(), chosen, allow_unused=True)
        for name, p, g in zip(names, chosen, grads):
            flat = p.data.view(-1)
            for i in rng.choice(flat.numel(), size=min(picks, flat.numel()), replace=False):
                i = int(i)
                with torch.no_grad():
                    flat[i] += h
                    up = loss_fn().item()
                    flat[i] -= 2 * h
                    down = loss_fn().item()
                    flat[i] += h
                analytic = 0.0 if g is None else g.view(-1)[i].item()
                assert analytic == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-8), f"{name}[{i}]"
    return check
