"""
Run Registry
Keeps track of generated networks, experiments, training runs and
comparisons. Persists entries in a local JSON file under the data directory.
"""

import json
import uuid
from datetime import datetime, timezone
from pathlib import Path

from config import Config

KINDS = ("gen", "run", "train", "compare")
STATUSES = ("running", "completed", "failed")


def _runs_file():
    return Path(Config.DATA_DIR) / "runs.json"


def _now():
    return datetime.now(timezone.utc).isoformat()


def _ensure_data_dir():
    path = _runs_file()
    path.parent.mkdir(parents=True, exist_ok=True)
    if not path.exists():
        path.write_text(json.dumps({"runs": []}, indent=2))


def _load_runs():
    _ensure_data_dir()
    return json.loads(_runs_file().read_text())


def _save_runs(data):
    _ensure_data_dir()
    _runs_file().write_text(json.dumps(data, indent=2, default=str))


# ------------------------------------------------------------------ #
#  Run CRUD
# ------------------------------------------------------------------ #

def list_runs(kind=None):
    """Return all registered runs, optionally of one kind."""
    runs = _load_runs().get("runs", [])
    return [r for r in runs if kind is None or r["kind"] == kind]


def get_run(run_id):
    """Get a single run by its id."""
    for run in list_runs():
        if run["id"] == run_id:
            return run
    return None


def add_run(kind, name, config_path=None, output_dir=None):
    """
    Register a new run in the `running` state.
    kind: 'gen' | 'run' | 'train' | 'compare'
    """
    if kind not in KINDS:
        raise ValueError(f"unknown run kind {kind!r}")
    data = _load_runs()
    run = {
        "id": str(uuid.uuid4())[:8],
        "kind": kind,
        "name": name,
        "config_path": str(config_path or ""),
        "output_dir": str(output_dir or ""),
        "status": "running",
        "status_message": "",
        "created_at": _now(),
        "updated_at": _now(),
    }
    data["runs"].append(run)
    _save_runs(data)
    return run


def update_run(run_id, status, message=""):
    """Set the status of a run."""
    if status not in STATUSES:
        raise ValueError(f"unknown run status {status!r}")
    data = _load_runs()
    for run in data["runs"]:
        if run["id"] == run_id:
            run["status"] = status
            run["status_message"] = message
            run["updated_at"] = _now()
            _save_runs(data)
            return run
    return None


def delete_run(run_id):
    """Remove a run entry; output files are left alone."""
    data = _load_runs()
    before = len(data["runs"])
    data["runs"] = [r for r in data["runs"] if r["id"] != run_id]
    if len(data["runs"]) < before:
        _save_runs(data)
        return True
    return False
