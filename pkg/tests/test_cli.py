"""End-to-end CLI checks: exit codes, artifacts, digests, determinism."""

import json

import numpy as np
import pytest

from exactrb import channels, cli, designs, rb


def run(*argv):
    return cli.main(list(argv))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_design_build_w1(tmp_path):
    out = tmp_path / "w1.json"
    assert run("design", "build", "--type", "w1", "--t", "4",
               "--out", str(out)) == cli.EXIT_PASS
    e = designs.load_design(str(out))
    assert e.size == 5
    doc = read_json(out)
    assert len(doc["manifest_digest"]) == 64


def test_design_build_unknown_type(tmp_path):
    assert run("design", "build", "--type", "bogus",
               "--out", str(tmp_path / "x.json")) == cli.EXIT_USAGE


def test_design_build_missing_tables(tmp_path):
    # The two-qubit circuit construction needs external angle tables.
    assert run("design", "build", "--type", "qubit-circuit", "--q", "2",
               "--t", "2", "--out", str(tmp_path / "x.json")) \
        == cli.EXIT_CONSTRUCTION


def test_design_verify_pass_and_fail(tmp_path):
    ico = tmp_path / "ico.json"
    assert run("design", "build", "--type", "icosahedral",
               "--out", str(ico)) == cli.EXIT_PASS
    report = tmp_path / "report.json"
    assert run("design", "verify", "--design", str(ico), "--t", "4",
               "--out", str(report)) == cli.EXIT_PASS
    doc = read_json(report)
    assert doc["passed"] is True
    assert abs(doc["frame_potential"] - 14.0) < 1e-9

    cl = tmp_path / "c1.json"
    assert run("design", "build", "--type", "clifford", "--q", "1",
               "--out", str(cl)) == cli.EXIT_PASS
    assert run("design", "verify", "--design", str(cl), "--t", "4",
               "--out", str(tmp_path / "r2.json")) == cli.EXIT_FAIL
    assert run("design", "verify", "--design", str(cl), "--t", "3",
               "--out", str(tmp_path / "r3.json")) == cli.EXIT_PASS


def test_design_verify_missing_file(tmp_path):
    assert run("design", "verify", "--design", str(tmp_path / "nope.json"),
               "--t", "2") == cli.EXIT_USAGE


def test_design_sample(tmp_path):
    ico = tmp_path / "ico.json"
    run("design", "build", "--type", "icosahedral", "--out", str(ico))
    out = tmp_path / "samples.json"
    assert run("design", "sample", "--design", str(ico), "--n", "7",
               "--seed", "3", "--out", str(out)) == cli.EXIT_PASS
    doc = read_json(out)
    assert len(doc["unitaries"]) == 7


def write_rb_config(path, **kw):
    cfg = {
        "pipeline": "1q",
        "noise": {"model": "noise1", "p": 0.02, "q": 0.98},
        "design": {"type": "icosahedral"},
        "sequence_lengths": [1, 2, 3, 5, 8, 12, 20, 35, 60, 100],
        "n_sequences": 20,
        "n_shots": 100,
        "seed": 5,
    }
    cfg.update(kw)
    with open(path, "w") as fh:
        json.dump(cfg, fh)
    return cfg


def test_rb_exact_reproduces_closed_form(tmp_path):
    cfg = tmp_path / "rb.json"
    write_rb_config(str(cfg), sequence_lengths=[1, 2, 3, 5, 8, 12, 17, 25,
                                                35, 50, 70, 100, 140, 200])
    out = tmp_path / "out"
    assert run("rb", "--config", str(cfg), "--mode", "exact",
               "--out-dir", str(out)) == cli.EXIT_PASS
    met = read_json(out / "metrics.json")
    want = channels.noise1_closed_form(0.02, 0.98)
    assert abs(met["F"] - want.F) < 1e-6
    assert abs(met["u"] - want.u) < 1e-6
    assert abs(met["H"] - want.H) < 1e-5
    manifest = read_json(out / "manifest.json")
    assert met["manifest_digest"] == manifest["digest"]
    first = (out / "v1.csv").read_text().splitlines()[0]
    assert first == "# manifest: " + manifest["digest"]
    curve = rb.DecayCurve.from_csv(str(out / "v2.csv"))
    assert len(curve.points) == 14


def test_rb_mc_deterministic_rerun(tmp_path):
    cfg = tmp_path / "rb.json"
    write_rb_config(str(cfg), sequence_lengths=[1, 2, 4, 7, 12, 20],
                    n_sequences=12, n_shots=50)
    out = tmp_path / "out"
    assert run("rb", "--config", str(cfg), "--mode", "mc",
               "--out-dir", str(out)) == cli.EXIT_PASS
    snapshot = {p.name: p.read_bytes() for p in out.iterdir()
                if p.name != "manifest.json"}
    manifest_a = read_json(out / "manifest.json")
    assert run("rb", "--config", str(cfg), "--mode", "mc",
               "--out-dir", str(out)) == cli.EXIT_PASS
    for name, blob in snapshot.items():
        assert (out / name).read_bytes() == blob, name
    manifest_b = read_json(out / "manifest.json")
    assert manifest_a["digest"] == manifest_b["digest"]
    only = {k for k in manifest_a if manifest_a[k] != manifest_b[k]}
    assert only <= {"wall_clock"}


def test_rb_short_m_list_is_usage_error(tmp_path):
    cfg = tmp_path / "rb.json"
    write_rb_config(str(cfg), sequence_lengths=[1, 3, 8, 20])
    assert run("rb", "--config", str(cfg), "--mode", "mc",
               "--out-dir", str(tmp_path / "out")) == cli.EXIT_USAGE


def test_rb_bad_noise_model(tmp_path):
    cfg = tmp_path / "rb.json"
    write_rb_config(str(cfg), noise={"model": "nope"})
    assert run("rb", "--config", str(cfg), "--mode", "exact",
               "--out-dir", str(tmp_path / "out")) == cli.EXIT_USAGE


def test_metrics_command(tmp_path):
    noise = tmp_path / "noise.json"
    noise.write_text(json.dumps({"model": "noise1", "p": 0.02, "q": 0.98}))
    out = tmp_path / "met.json"
    assert run("metrics", "--noise", str(noise), "--out", str(out)) \
        == cli.EXIT_PASS
    met = read_json(out)
    want = channels.noise1_closed_form(0.02, 0.98)
    assert abs(met["F"] - want.F) < 1e-12
    assert abs(met["H"] - want.H) < 1e-12
    assert len(met["manifest_digest"]) == 64


def test_fit_command(tmp_path):
    ms = np.array([1, 2, 3, 5, 8, 12, 20, 35, 60, 100], dtype=float)
    y = 0.25 + 0.75 * 0.96 ** ms
    curve = rb.DecayCurve(points=tuple(
        (int(m), float(v), 0.0, 0, 0) for m, v in zip(ms, y)))
    path = tmp_path / "curve.csv"
    curve.to_csv(str(path))
    out = tmp_path / "fit.json"
    assert run("fit", "--curve", str(path), "--terms", "2",
               "--known", "1.0", "--out", str(out)) == cli.EXIT_PASS
    doc = read_json(out)
    assert abs(doc["rates"][1] - 0.96) < 1e-8
    assert abs(doc["amplitudes"][0] - 0.25) < 1e-8


def test_fit_strict_flags(tmp_path):
    ms = np.array([1, 2, 3, 5, 8, 12, 20, 35, 60, 100], dtype=float)
    y = 0.5 * 0.95 ** ms + 0.5 * (0.95 - 1e-6) ** ms
    curve = rb.DecayCurve(points=tuple(
        (int(m), float(v), 0.0, 0, 0) for m, v in zip(ms, y)))
    path = tmp_path / "curve.csv"
    curve.to_csv(str(path))
    assert run("fit", "--curve", str(path), "--terms", "2", "--strict",
               "--out", str(tmp_path / "f.json")) == cli.EXIT_STRICT_FIT


def test_threads_flag_sets_env(tmp_path, monkeypatch):
    for var in cli._THREAD_ENV:
        monkeypatch.delenv(var, raising=False)
    out = tmp_path / "w1.json"
    assert run("--threads", "1", "design", "build", "--type", "w1",
               "--t", "2", "--out", str(out)) == cli.EXIT_PASS
    import os
    assert os.environ["OMP_NUM_THREADS"] == "1"
