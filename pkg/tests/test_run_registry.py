import pytest

from trafficlab import run_registry


def test_add_and_complete(data_dir):
    run = run_registry.add_run("run", "desk/baseline", "desk_baseline", "/tmp/out")
    assert run["status"] == "running"
    updated = run_registry.update_run(run["id"], "completed", "2 seeds")
    assert updated["status_message"] == "2 seeds"
    assert run_registry.get_run(run["id"])["status"] == "completed"


def test_filter_by_kind(data_dir):
    run_registry.add_run("gen", "a")
    run_registry.add_run("train", "b")
    assert [r["name"] for r in run_registry.list_runs("train")] == ["b"]
    assert len(run_registry.list_runs()) == 2


def test_delete(data_dir):
    run = run_registry.add_run("compare", "x vs y")
    assert run_registry.delete_run(run["id"])
    assert not run_registry.delete_run(run["id"])
    assert run_registry.get_run(run["id"]) is None


def test_bad_kind_and_status(data_dir):
    with pytest.raises(ValueError):
        run_registry.add_run("deploy", "x")
    run = run_registry.add_run("gen", "x")
    with pytest.raises(ValueError):
        run_registry.update_run(run["id"], "paused")
    assert run_registry.update_run("missing", "failed") is None


def test_registry_file_is_created(data_dir):
    (data_dir / "runs.json").unlink()
    assert run_registry.list_runs() == []
    assert (data_dir / "runs.json").exists()
