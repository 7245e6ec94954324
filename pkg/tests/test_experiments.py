import dataclasses

import pytest

from qewo import report
from qewo.experiments import (
    ExperimentSpec,
    apply_overrides,
    best_run,
    default_spec,
    load_overrides,
    parse_resolution_range,
    plan,
    run_experiment,
)
from qewo.metrics import EpochMetrics


def test_default_plans():
    cells = plan(default_spec("exp1"))
    assert [(c.group, c.runs) for c in cells] == [("qewo", 10), ("adam", 10)]
    assert cells[0].resolution == 32 and cells[1].resolution is None
    exp2 = plan(default_spec("exp2"))
    assert [c.resolution for c in exp2[:16]] == list(range(17, 33))
    assert [c.group for c in exp2[16:]] == ["qewo", "adam", "ga"]
    assert {c.init for c in plan(default_spec("exp3"))} == {"uniform", "xavier", "kaiming"}
    assert [c.activation for c in plan(default_spec("exp4"))] == ["tanh", "gelu", "swish"]
    exp5 = plan(default_spec("exp5"))
    assert [(c.group, c.noise, c.runs) for c in exp5] == [("noisy", True, 15), ("ideal", False, 15)]


def test_spec_validation():
    with pytest.raises(ValueError):
        default_spec("exp9")
    with pytest.raises(ValueError):
        ExperimentSpec("exp1", "wine", (13, 32, 3), runs=0)
    with pytest.raises(ValueError):
        ExperimentSpec("exp1", "iris", (4, 3))


def test_trainer_configs_per_dataset():
    wine = default_spec("exp1")
    assert wine.qewo_config(32).batch_size is None
    assert wine.adam_config().batch_size == 16
    assert (wine.qewo_config(32).alpha_min, wine.qewo_config(32).alpha_max) == (0.01, 1.0)
    digits = default_spec("exp2")
    q = digits.qewo_config(19)
    assert q.batch_size == 128 and q.n_candidates_hidden == 19 and q.n_candidates_output == 64
    assert (q.alpha_min, q.alpha_max, q.dropout_p) == (0.05, 0.1, 0.0)
    assert digits.adam_config().dropout_p == 0.2
    assert digits.ga_config().generations == 10


def test_best_run_selection():
    def result(run, acc, loss):
        m = EpochMetrics(10, 0.1, loss, 100.0, acc)
        return type("R", (), {"history": [m], "run": run})()

    rs = [result(0, 97.0, 0.1), result(1, 100.0, 0.3), result(2, 100.0, 0.2), result(3, 100.0, 0.2)]
    assert best_run(rs).run == 2


def test_resolution_range():
    assert parse_resolution_range("17..20") == (17, 18, 19, 20)
    assert parse_resolution_range("19") == (19,)
    for bad in ("20..17", "a..b", "1..3"):
        with pytest.raises(ValueError):
            parse_resolution_range(bad)


def test_overrides_from_key_value_file(tmp_path):
    p = tmp_path / "cfg.txt"
    p.write_text("# tuning\nruns = 3\nqewo.alpha_min = 0.02\nqewo.batch_size = none\n"
                 "adam.batch_size=32\nresolutions=[17, 19]\n")
    spec = apply_overrides(default_spec("exp2"), load_overrides(p))
    assert spec.runs == 3 and spec.resolutions == (17, 19)
    assert spec.qewo_config(19).alpha_min == 0.02
    assert spec.qewo_config(19).batch_size is None
    assert spec.adam_config().batch_size == 32


def test_overrides_from_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text('{"seed": 7, "qewo": {"alpha_update": "epoch"}}')
    spec = apply_overrides(default_spec("exp1"), load_overrides(p))
    assert spec.seed == 7 and spec.qewo_config(32).alpha_update == "epoch"


def test_bad_overrides(tmp_path):
    p = tmp_path / "cfg.txt"
    p.write_text("bogus=1\n")
    with pytest.raises(ValueError):
        apply_overrides(default_spec("exp1"), load_overrides(p))
    p.write_text("qewo.not_a_field=1\n")
    with pytest.raises(TypeError):
        apply_overrides(default_spec("exp1"), load_overrides(p))
    p.write_text("lr: 3\n")
    with pytest.raises(ValueError):
        load_overrides(p)


def test_exp1_writes_all_tables(tmp_path):
    spec = default_spec("exp1", runs=2, epochs=3)
    files = run_experiment(spec, tmp_path)
    names = sorted(f.name for f in files)
    assert names == ["best.csv", "curves.csv", "runs.csv", "summary.csv", "tables.csv"]
    runs = report.read_csv(tmp_path / "runs.csv")
    assert len(runs.rows) == 2 * 2 * 3
    assert runs.meta["seed"] == "42" and runs.meta["qewo.alpha0"] == "0.1"
    assert "wall_time_ms" in runs.meta
    tables = report.read_csv(tmp_path / "tables.csv")
    assert tables.floats("epoch").tolist() == [1, 2, 3]
    best = report.read_csv(tmp_path / "best.csv")
    assert set(best.column("group")) == {"qewo", "adam"}


def test_identical_seed_reruns_are_byte_identical(tmp_path):
    spec = default_spec("exp1", runs=1, epochs=2)
    a = run_experiment(spec, tmp_path / "a")
    b = run_experiment(spec, tmp_path / "b")
    for fa, fb in zip(a, b):
        assert report.body(fa) == report.body(fb)
    other = run_experiment(dataclasses.replace(spec, seed=43), tmp_path / "c")
    assert report.body(other[0]) != report.body(a[0])


def test_missing_dataset_is_fatal_with_hint(tmp_path, monkeypatch):
    monkeypatch.setenv("QEWO_DATA_DIR", str(tmp_path / "nowhere"))
    with pytest.raises(FileNotFoundError, match="QEWO_DATA_DIR"):
        run_experiment(default_spec("exp1", runs=1, epochs=1), tmp_path / "out")
