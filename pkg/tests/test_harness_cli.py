import json
import subprocess
import sys

import pytest

from martlab import harness


def test_spec_from_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nexperiment = constants\nseed = 9\np = 4/3,2\n")
    spec = harness.spec_from_config(str(cfg), {"paths": 123})
    assert spec.experiment == "constants"
    assert spec.seed == 9
    assert spec.paths == 123
    assert spec.p == (4.0 / 3.0, 2.0)


def test_spec_from_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("experiment = constants\nbogus = 1\n")
    with pytest.raises(ValueError):
        harness.spec_from_config(str(cfg), {})
    with pytest.raises(ValueError):
        harness.spec_from_config(None, {})  # experiment required
    cfg.write_text("experiment=constants\nbroken line\n")
    with pytest.raises(ValueError):
        harness.spec_from_config(str(cfg), {})


def test_fingerprint_depends_on_spec():
    a = harness.ExperimentSpec(experiment="constants", seed=1)
    b = harness.ExperimentSpec(experiment="constants", seed=2)
    assert a.fingerprint() != b.fingerprint()
    assert a.fingerprint() == harness.ExperimentSpec(experiment="constants",
                                                     seed=1).fingerprint()


def test_record_verdicts():
    r = harness.record("x", "src", "PASS", estimate=1.0, bound=2.0, passed=True)
    assert r["verdict"] == "PASS" and r["margin"] == 1.0
    r = harness.record("x", "src", "PASS", estimate=3.0, bound=2.0, passed=False)
    assert r["verdict"] == "FAIL"
    r = harness.record("x", "src", "REPORT-ONLY", estimate=3.0)
    assert r["verdict"] == "REPORT-ONLY"


def test_run_writes_report_and_is_deterministic(tmp_path):
    spec = harness.ExperimentSpec(experiment="constants", seed=3,
                                  out=str(tmp_path / "a"))
    rep1 = harness.run(spec)
    rep2 = harness.run(harness.ExperimentSpec(experiment="constants", seed=3,
                                              out=str(tmp_path / "b")))
    strip = lambda r: {k: v for k, v in r.items() if k != "walltime_s"}
    assert strip(rep1) != strip(rep2)  # out dir differs in the spec
    rep2b = dict(rep2)
    rep2b["spec"] = dict(rep2["spec"], out=rep1["spec"]["out"])
    # identical content modulo the timestamped wall time and the out path
    assert strip(rep1)["records"] == strip(rep2b)["records"]
    data = json.loads((tmp_path / "a" / "report.json").read_text())
    assert data["records"] and data["n_fail"] == 0
    summary = (tmp_path / "a" / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("experiment,")
    assert len(summary) == 1 + len(data["records"])


def test_unknown_experiment_rejected():
    with pytest.raises(ValueError):
        harness.run(harness.ExperimentSpec(experiment="nope"))


def test_sweep_requires_specs_and_combines(tmp_path):
    with pytest.raises(ValueError):
        harness.sweep([])
    specs = [harness.ExperimentSpec(experiment="constants", seed=s,
                                    out=str(tmp_path / f"s{s}"), p=(2.0,))
             for s in (1, 2)]
    reports = harness.sweep(specs)
    assert len(reports) == 2
    combined = (tmp_path / "s1" / "summary.csv").read_text().splitlines()
    assert len(combined) == 1 + sum(len(r["records"]) for r in reports)


def test_builtin_spec_guards():
    with pytest.raises(ValueError):
        harness.builtin_field("nope", 2)
    with pytest.raises(ValueError):
        harness.builtin_field("crit2", 3)
    with pytest.raises(ValueError):
        harness.builtin_matrix("nope", 2)
    with pytest.raises(ValueError):
        harness.builtin_potential("const:0.5")
    assert harness.builtin_potential("const:-2") == -2.0
    with pytest.raises(ValueError):
        harness.builtin_profile("nope")


def test_project_compare_artifacts(tmp_path):
    # the pinned step count keeps the time-discretization bias well under the
    # Monte Carlo resolution; only the path count is reduced here
    spec = harness.ExperimentSpec(experiment="project-compare", seed=4,
                                  paths=15_000, steps=200, bins=8,
                                  out=str(tmp_path))
    rep = harness.run(spec)
    assert rep["n_fail"] == 0
    assert (tmp_path / "pairing-V0.json").exists()
    assert (tmp_path / "pairing-V-1.json").exists()
    pairing = json.loads((tmp_path / "pairing-V0.json").read_text())
    assert {"value", "se", "oracle", "verdict"} <= set(pairing)
    est_csv = (tmp_path / "projection-estimate.csv").read_text().splitlines()
    assert est_csv[0] == "center1,center2,estimate,count,se"
    assert len(est_csv) == 1 + 8 * 8
    assert (tmp_path / "driving-field.csv").exists()


def test_cli_list_and_constants(tmp_path):
    out = subprocess.run([sys.executable, "-m", "martlab.cli", "list"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "project-compare" in out.stdout
    run = subprocess.run([sys.executable, "-m", "martlab.cli", "constants",
                          "--p", "2", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert run.returncode == 0
    assert "PASS" in run.stdout
    assert (tmp_path / "report.json").exists()


def test_cli_exit_status_on_failure(tmp_path, monkeypatch):
    from martlab import cli

    def failing(spec):
        return [harness.record("forced", "synthetic", "PASS", estimate=1.0,
                               bound=0.5, passed=False)]

    monkeypatch.setitem(harness.EXPERIMENTS, "always-fail", failing)
    rc = cli.main(["always-fail", "--out", str(tmp_path)])
    assert rc == 1


def test_cli_sweep(tmp_path):
    run = subprocess.run([sys.executable, "-m", "martlab.cli", "sweep",
                          "--experiment", "constants", "--vary", "seed=1;2",
                          "--out", str(tmp_path), "--p", "2"],
                         capture_output=True, text=True)
    assert run.returncode == 0, run.stderr
    assert (tmp_path / "sweep-seed-0" / "report.json").exists()
    assert (tmp_path / "sweep-seed-1" / "report.json").exists()
