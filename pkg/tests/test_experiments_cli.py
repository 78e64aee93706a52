import csv
import hashlib
import json

import numpy as np
import pytest

from hyposde import density
from hyposde.cli import main
from hyposde.errors import ConfigurationError
from hyposde.experiments import (
    TABLES, ExperimentConfig, kernel_relative_error, replicate, run_checks, summarize, worker_count,
)

SMALL = dict(model="toy3", n=2000, delta=0.01, stride=5, seed=4, replications=3)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ExperimentConfig(replications=0)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(model="lorenz")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(variants=("EM",))
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"modle": "toy3"})
    cfg = ExperimentConfig(delta=1e-3, stride=10)
    assert cfg.fine_delta * cfg.stride == pytest.approx(cfg.delta)


def test_table_registry():
    assert set(TABLES) == {"table1_set1", "table1_set2", "table1_set3", "table2_ho", "table2_dw", "prony"}
    s1 = TABLES["table1_set1"]
    assert (s1.n, s1.delta, s1.horizon) == (500_000, 1e-3, 500.0)
    assert s1.variants == ("LG2", "LG2_nocorr") and s1.mask == (0,)
    assert TABLES["table1_set2"].fine_delta == pytest.approx(1e-4)
    assert TABLES["prony"].theta_init == (0.1, 0.01, 1.0, 10.0)


def test_replicate_is_deterministic_and_order_free(monkeypatch):
    cfg = ExperimentConfig(**SMALL)
    monkeypatch.setenv("HYPOSDE_THREADS", "1")
    rows1, summary1 = replicate(cfg)
    rows2, _ = replicate(cfg, workers=3)
    assert rows1 == rows2
    # the first replication does not depend on how many run
    rows_one, _ = replicate(ExperimentConfig(**{**SMALL, "replications": 1}))
    assert rows_one == [r for r in rows1 if r["replication"] == 0]
    keys = {"param", "true", "mean_estimate", "se", "replications", "variant"}
    assert all(keys <= set(s) for s in summary1)


def test_summary_statistics():
    rows = [{"variant": "LG2", "param": "beta", "true": 1.0, "estimate": v} for v in (1.0, 2.0, 3.0)]
    (s,) = summarize(rows)
    assert s["mean_bias"] == pytest.approx(1.0)
    assert s["sd"] == pytest.approx(1.0)
    assert s["se"] == pytest.approx(1.0 / np.sqrt(3))


def test_worker_count_respects_env(monkeypatch):
    monkeypatch.setenv("HYPOSDE_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("HYPOSDE_THREADS", "many")
    with pytest.raises(ConfigurationError):
        worker_count()


def test_kernel_error_zero_at_truth():
    th = np.array([0.22, 0.007, 1.2, 4.6])
    assert kernel_relative_error(th, th) == 0.0
    assert kernel_relative_error(th * [1, 1, 1.1, 1], th) == pytest.approx(0.1, rel=0.2)


def test_verify_passes_and_sentinel_fails(monkeypatch, capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "determinant" in out
    monkeypatch.setattr(density, "C_S1S1", 1.0 / 19.0)
    failed = [c.name for c in run_checks() if not c.passed]
    assert any("lambda_s1s1" in name for name in failed)
    assert main(["verify"]) == 1


def test_simulate_set_one_rows_and_digest(tmp_path):
    args = ["simulate", "--model", "toy3", "--n", "500000", "--delta", "0.001", "--seed", "1"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    a, b = (tmp_path / "a.csv").read_bytes(), (tmp_path / "b.csv").read_bytes()
    assert hashlib.sha256(a).digest() == hashlib.sha256(b).digest()
    assert a.count(b"\n") == 500_002      # header plus n + 1 states
    side = json.loads((tmp_path / "a.csv.json").read_text())
    assert side["seed"] == 1 and side["config"]["n"] == 500_000


def test_config_file_and_zero_reps(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": "toy3", "n": 100, "replications": 0}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    assert "replications" in capsys.readouterr().err
    assert main(["replicate", "--table", "table1_set1", "--reps", "2"]) == 2


def test_fit_dispatches_on_mask(tmp_path):
    base = ["simulate", "--model", "toy3", "--n", "3000", "--delta", "0.01", "--seed", "2"]
    main(base + ["--out", str(tmp_path / "full.csv")])
    main(base + ["--mask", "0", "--out", str(tmp_path / "q.csv")])
    assert main(["fit", str(tmp_path / "full.csv"), "--model", "toy3", "--out", str(tmp_path / "f.json")]) == 0
    assert main(["fit", str(tmp_path / "q.csv"), "--model", "toy3", "--out", str(tmp_path / "g.json")]) == 0
    full = json.loads((tmp_path / "f.json").read_text())
    part = json.loads((tmp_path / "g.json").read_text())
    assert full["observation"] == "complete" and full["se"] is not None
    assert part["observation"] == "partial" and part["se"] is None


def test_fit_reports_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,x1\n0,1\n0.1,2\n")
    assert main(["fit", str(bad), "--model", "toy3"]) == 2
    assert "row 1" in capsys.readouterr().err


def test_replicate_cli_writes_summary(tmp_path):
    out = tmp_path / "s.csv"
    args = ["replicate", "--table", "table1_set1", "--reps", "2", "--n", "2000", "--delta", "0.01",
            "--stride", "5", "--seed", "3", "--out", str(out)]
    assert main(args) == 0
    with open(out) as fh:
        summary = list(csv.DictReader(fh))
    assert {r["variant"] for r in summary} == {"LG2", "LG2_nocorr"}
    assert (tmp_path / "s_rows.csv").exists()
