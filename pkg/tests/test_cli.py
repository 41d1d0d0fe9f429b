import csv
import hashlib
import json

import numpy as np
import pytest

from twolayer.cli import main
from twolayer.data import load_csv, write_csv
from twolayer.layer import FirstLayer, principal_angles, spectral_report


def run(*argv):
    return main([str(a) for a in argv])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def f5_csv(tmp_path):
    path = tmp_path / "f5.csv"
    assert run("synth", "--func", "f5", "--n", 300, "--seed", 3, "--out", path, "--no-timings") == 0
    return path


def test_synth_format_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("synth", "--func", "f5", "--n", 100, "--seed", 9, "--out", a) == 0
    assert run("synth", "--func", "f5", "--n", "1e2", "--seed", 9, "--out", b) == 0
    rows = read_rows(a)
    assert rows[0] == ["x1", "x2", "x3", "x4", "x5", "y"]
    assert len(rows) == 101 and all(len(r) == 6 for r in rows)
    assert a.read_bytes() == b.read_bytes()


def test_manifest_links_artifacts(f5_csv):
    manifest = json.loads((f5_csv.parent / "f5.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "synth" and manifest["seed"] == 3
    assert manifest["config"]["n"] == 300 and manifest["config"]["func"] == "f5"
    assert manifest["outputs"][str(f5_csv)] == hashlib.sha256(f5_csv.read_bytes()).hexdigest()
    assert "timings_seconds" not in manifest and "version" in manifest


def test_optimize_zero_epochs_emits_identity(tmp_path, f5_csv):
    out = tmp_path / "L.json"
    assert run("optimize", "--data", f5_csv, "--max-epochs", 0, "--out", out) == 0
    layer = FirstLayer.load(out)
    np.testing.assert_array_equal(layer.matrix, np.eye(5))
    assert json.loads(out.read_text())["manifest"] == "L.json.manifest.json"
    assert read_rows(tmp_path / "L.trace.csv") == [["epoch", "loss", "seconds"]]


def test_optimize_round_trip_and_trace(tmp_path, f5_csv):
    out = tmp_path / "L.json"
    assert run("optimize", "--data", f5_csv, "--max-epochs", 4, "--batch-size", 32, "--rows", 2,
               "--length-scale", 0.5, "--out", out) == 0
    payload = json.loads(out.read_text())
    layer = FirstLayer.load(out)
    assert layer.matrix.shape == (2, 5) and payload["provenance"] == "optimized"
    assert FirstLayer.from_dict(payload).to_dict()["data"] == payload["data"]
    trace = read_rows(tmp_path / "L.trace.csv")
    assert 1 <= len(trace) - 1 <= 4
    assert all(float(r[2]) >= 0 for r in trace[1:])


def test_greedy_identity_layer_equals_plain(tmp_path, f5_csv):
    ident = tmp_path / "I.json"
    FirstLayer.identity(5).save(ident)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("greedy", "--data", f5_csv, "--max-centers", 30, "--out", a) == 0
    assert run("greedy", "--data", f5_csv, "--max-centers", 30, "--layer", ident, "--out", b) == 0
    ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
    assert ja["center_indices"] == jb["center_indices"] and len(ja["center_indices"]) == 30
    decay = read_rows(tmp_path / "a.decay.csv")
    assert decay[0] == ["n_centers", "train_max_residual", "test_mse", "test_max_error"]
    assert len(decay) == 31 and [int(r[0]) for r in decay[1:]] == list(range(1, 31))
    trace = read_rows(tmp_path / "a.trace.csv")
    assert trace[0] == ["iteration", "selected_index", "indicator", "max_residual", "max_power"]


def test_greedy_eps_grid(tmp_path, f5_csv):
    out = tmp_path / "grid.json"
    assert run("greedy", "--data", f5_csv, "--eps-grid", "0.05,10,10", "--sqrt-d-scaling",
               "--max-centers", 5, "--out", out) == 0
    summary = json.loads(out.read_text())["grid"]
    eps = [s["eps"] for s in summary]
    assert len(eps) == 10 and eps[0] == pytest.approx(0.05) and eps[-1] == pytest.approx(10.0)
    np.testing.assert_allclose(np.diff(np.log(eps)), np.log(200) / 9, rtol=1e-12)
    rows = read_rows(tmp_path / "grid.decay.csv")
    assert rows[0][0] == "eps" and len(rows) == 1 + 10 * 5
    model = json.loads((tmp_path / summary[3]["file"]).read_text())
    assert model["kernel"]["length_scale"] == pytest.approx(eps[3] / np.sqrt(5), rel=1e-14)


def test_analyze(tmp_path):
    ident = tmp_path / "I.json"
    FirstLayer.identity(4).save(ident)
    out = tmp_path / "rep.json"
    assert run("analyze", "--layer", ident, "--out", out) == 0
    rows = read_rows(tmp_path / "rep.spectral.csv")
    assert rows[0] == ["index", "singular_value", "cumulative_power"]
    np.testing.assert_allclose([float(r[2]) for r in rows[1:]], np.arange(1, 5) / 4)

    rng = np.random.default_rng(0)
    a, b = FirstLayer(rng.standard_normal((4, 4))), FirstLayer(rng.standard_normal((4, 4)))
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    a.save(pa)
    b.save(pb)
    assert run("analyze", "--layer", pa, "--layer", pa, "--layer", pb, "--out", out) == 0
    rows = read_rows(tmp_path / "rep.angles.csv")[1:]
    same = [float(r[2]) for r in rows if r[0] == str(pa)]
    np.testing.assert_allclose(same, 0.0, atol=1e-5)
    other = {int(r[1]): float(r[2]) for r in rows if r[0] == str(pb)}
    for n in range(1, 5):
        assert other[n] == pytest.approx(principal_angles(a, b, n).max(), abs=1e-9)
    rep = json.loads(out.read_text())
    np.testing.assert_allclose(rep["singular_values"], spectral_report(a).singular_values)


def test_eval_matches_model(tmp_path, f5_csv):
    model = tmp_path / "m.json"
    assert run("greedy", "--data", f5_csv, "--max-centers", 20, "--out", model) == 0
    out = tmp_path / "metrics.json"
    assert run("eval", "--model", model, "--data", f5_csv, "--split", "test", "--out", out,
               "--predictions", tmp_path / "p.csv") == 0
    metrics = json.loads(out.read_text())
    decay = read_rows(tmp_path / "m.decay.csv")
    assert metrics["n_points"] == 60
    assert metrics["mse"] == pytest.approx(float(decay[-1][2]), rel=1e-9)
    assert metrics["max_abs_error"] == pytest.approx(float(decay[-1][3]), rel=1e-9)


def test_standardized_eval_round_trip(tmp_path, f5_csv):
    model = tmp_path / "m.json"
    assert run("greedy", "--data", f5_csv, "--standardize", "--max-centers", 10, "--out", model) == 0
    assert "standardization" in json.loads(model.read_text())
    out = tmp_path / "metrics.json"
    assert run("eval", "--model", model, "--data", f5_csv, "--split", "test", "--out", out) == 0
    decay = read_rows(tmp_path / "m.decay.csv")
    assert json.loads(out.read_text())["mse"] == pytest.approx(float(decay[-1][2]), rel=1e-9)


def test_config_file_overridden_by_flags(tmp_path, f5_csv):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# optimizer\nmax_epochs = 2\nbatch-size = 16\nlearning_rate = 1e-2\nno_timings = true\n")
    out = tmp_path / "L.json"
    assert run("optimize", "--data", f5_csv, "--config", cfg, "--batch-size", 32, "--out", out) == 0
    manifest = json.loads((tmp_path / "L.json.manifest.json").read_text())
    assert manifest["config"]["max_epochs"] == 2
    assert manifest["config"]["batch_size"] == 32
    assert manifest["config"]["learning_rate"] == 1e-2
    assert "timings_seconds" not in manifest
    cfg.write_text("bogus = 1\n")
    assert run("optimize", "--data", f5_csv, "--config", cfg, "--out", out) == 2


def test_exit_codes(tmp_path, f5_csv, capsys):
    assert run("greedy", "--data", tmp_path / "missing.csv", "--out", tmp_path / "m.json") == 3
    assert run("optimize", "--data", f5_csv, "--lam", -1, "--out", tmp_path / "x.json") == 2
    assert run("greedy", "--data", f5_csv, "--eps-grid", "1,2", "--out", tmp_path / "x.json") == 2
    assert run("frobnicate") == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\n1,x\n")
    assert run("greedy", "--data", bad, "--out", tmp_path / "x.json") == 2
    dup = tmp_path / "dup.csv"
    write_csv(dup, np.zeros((64, 2)), np.arange(64.0))
    assert run("optimize", "--data", dup, "--train-fraction", 1, "--lam", 0, "--out", tmp_path / "x.json") == 4
    assert "numerical" in capsys.readouterr().err


def test_help_lists_defaults(capsys):
    assert run("optimize", "--help") == 0
    text = capsys.readouterr().out
    assert "default: 0.005" in text and "default: 64" in text


def test_end_to_end_reproducible(tmp_path):
    def pipeline(root):
        root.mkdir()
        data, layer, model = root / "d.csv", root / "L.json", root / "m.json"
        assert run("synth", "--n", 400, "--seed", 5, "--out", data, "--no-timings") == 0
        assert run("optimize", "--data", data, "--max-epochs", 3, "--batch-size", 32, "--seed", 5,
                   "--sqrt-d-scaling", "--out", layer, "--no-timings") == 0
        assert run("greedy", "--data", data, "--layer", layer, "--sqrt-d-scaling", "--max-centers", 25,
                   "--out", model, "--no-timings") == 0
        return {p.name: p.read_bytes() for p in sorted(root.iterdir())}

    a = pipeline(tmp_path / "a")
    b = pipeline(tmp_path / "b")
    assert a.keys() == b.keys()
    for name in a:
        if name.endswith(".manifest.json"):
            continue  # paths differ between the two run directories
        assert a[name] == b[name], name
