"""End-to-end command behavior: ingestion, artifacts, overrides, errors."""

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from kplanenet import cli, load_model
from kplanenet.cli import CliError, build_config, derive_seed, ingest_csv

METRIC_KEYS = {"objective", "reg_cost", "nnz", "sparsity_bound", "kkt_residual"}


# -- ingestion -----------------------------------------------------------------


def test_ingest_with_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x1,x2,y\n0,0,1\n1,0,2\n")
    ds = ingest_csv(path)
    assert (ds.M, ds.d) == (2, 2)
    np.testing.assert_array_equal(ds.y, [1.0, 2.0])


def test_ingest_without_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0.5,1.5\n-0.25,0.75\n")
    ds = ingest_csv(path)
    assert (ds.M, ds.d) == (2, 1)


@pytest.mark.parametrize("body,fragment", [
    ("x,y\n1,2\nabc,3\n", "line 3"),
    ("x,y\n1,2\n4\n", "line 3"),
    ("1,2\n3,nan\n", "line 2"),
    ("1,2\n3,inf\n", "line 2"),
    ("", "empty"),
    ("x,y\n", "no data rows"),
    ("5\n6\n", "at least one feature"),
])
def test_ingest_rejects_bad_tables(tmp_path, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(CliError) as err:
        ingest_csv(path)
    assert err.value.code == "csv-parse"
    assert fragment in str(err.value)


def test_ingest_missing_file(tmp_path):
    with pytest.raises(CliError) as err:
        ingest_csv(tmp_path / "nope.csv")
    assert err.value.code == "missing-file"


# -- config --------------------------------------------------------------------


def test_config_merge_and_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 3, "solver": {"lambda": 0.25}}))
    cfg = build_config(path, ["--solver.width=8", "io.outdir=art",
                              "kplane.sweep_directions=[45]"])
    assert cfg["seed"] == 3
    assert cfg["solver"]["lambda"] == 0.25
    assert cfg["solver"]["width"] == 8
    assert cfg["io"]["outdir"] == "art"
    assert cfg["kplane"]["sweep_directions"] == [45]


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"sover": {}}))
    with pytest.raises(CliError) as err:
        build_config(path)
    assert err.value.code == "config-invalid"
    with pytest.raises(CliError):
        build_config(None, ["solver.lamda=0.1"])
    with pytest.raises(CliError):
        build_config(None, ["solver.width"])


def test_env_var_supplies_config(tmp_path, monkeypatch):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 99}))
    monkeypatch.setenv("KPLANENET_CONFIG", str(path))
    assert build_config(None)["seed"] == 99


def test_seed_derivation_is_stable_per_label():
    assert derive_seed(0, "trainer") == derive_seed(0, "trainer")
    assert derive_seed(0, "trainer") != derive_seed(0, "dictionary")
    assert derive_seed(0, "trainer") != derive_seed(1, "trainer")


# -- commands ------------------------------------------------------------------


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rng = np.random.default_rng(21)
    X = rng.uniform(-2, 2, size=(16, 2))
    y = np.tanh(X[:, 0]) - 0.3 * X[:, 1]
    lines = ["a,b,target"]
    lines += [f"{x1!r},{x2!r},{t!r}" for (x1, x2), t in zip(X.tolist(), y.tolist())]
    (tmp_path / "train.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "inputs.csv").write_text(
        "\n".join(f"{x1!r},{x2!r}" for x1, x2 in X[:6].tolist()) + "\n")
    (tmp_path / "cfg.json").write_text(json.dumps({
        "seed": 5,
        "solver": {"lambda": 0.05, "width": 10, "max_iter": 50},
        "io": {"data": "train.csv", "outdir": "art"},
    }))
    return tmp_path


def _invoke(*args):
    return CliRunner().invoke(cli.main, args)


def test_fit_writes_all_artifacts(workspace):
    result = _invoke("--config", "cfg.json", "fit")
    assert result.exit_code == 0, result.output
    metrics = json.loads((workspace / "art/metrics.json").read_text())
    assert set(metrics) == METRIC_KEYS
    assert metrics["sparsity_bound"] == 16 - 3
    assert metrics["kkt_residual"] <= 1e-8
    model = load_model(workspace / "art/model.json")   # re-validates on load
    assert model.spec.d == 2
    trace = (workspace / "art/trace.csv").read_text().splitlines()
    assert trace[0].startswith("iteration,objective")
    assert len(trace) > 2


def test_fit_is_deterministic(workspace):
    assert _invoke("--config", "cfg.json", "fit").exit_code == 0
    first = (workspace / "art/metrics.json").read_bytes()
    assert _invoke("--config", "cfg.json", "fit").exit_code == 0
    assert (workspace / "art/metrics.json").read_bytes() == first


def test_override_changes_the_run(workspace):
    assert _invoke("--config", "cfg.json", "fit").exit_code == 0
    base = json.loads((workspace / "art/metrics.json").read_text())
    assert _invoke("--config", "cfg.json", "fit",
                   "--solver.lambda=0.2").exit_code == 0
    bumped = json.loads((workspace / "art/metrics.json").read_text())
    assert bumped["objective"] != base["objective"]


def test_lasso_then_predict_row_alignment(workspace):
    result = _invoke("--config", "cfg.json", "lasso",
                     "--dictionary.atoms=120", "--dictionary.lambda_scale=0.2")
    assert result.exit_code == 0, result.output
    result = _invoke("--config", "cfg.json", "predict", "io.inputs=inputs.csv")
    assert result.exit_code == 0, result.output
    lines = (workspace / "art/predictions.csv").read_text().splitlines()
    assert lines[0] == "prediction" and len(lines) == 7
    model = load_model(workspace / "art/model.json")
    X = np.array([r.split(",") for r in
                  (workspace / "inputs.csv").read_text().splitlines()],
                 dtype=float)
    from kplanenet import forward
    np.testing.assert_allclose([float(v) for v in lines[1:]],
                               forward(model, X), rtol=0, atol=0)


def test_prune_emits_certificate(workspace):
    assert _invoke("--config", "cfg.json", "fit").exit_code == 0
    result = _invoke("--config", "cfg.json", "prune")
    assert result.exit_code == 0, result.output
    metrics = json.loads((workspace / "art/metrics.json").read_text())
    cert = metrics["certificate"]
    assert cert["ok"] and cert["nnz"] <= cert["bound"] == 13
    load_model(workspace / "art/pruned.json")


def test_transform_round_trip(workspace):
    from kplanenet import GridFunction, load_plane, save_grid
    save_grid(workspace / "g.kgr",
              GridFunction.gaussian(2, 4.0, 64, sigma=0.6))
    result = _invoke("--config", "cfg.json", "transform", "io.grid=g.kgr",
                     "--kplane.directions=12", "--kplane.t_points=65")
    assert result.exit_code == 0, result.output
    plane = load_plane(workspace / "art/plane.kpl")
    assert plane.values.shape == (12, 65)


def test_greens_reports_profile(workspace):
    result = _invoke("--config", "cfg.json", "greens", "--operator.alpha=4",
                     "--operator.d=3", "--operator.k=1")
    assert result.exit_code == 0, result.output
    doc = json.loads((workspace / "art/metrics.json").read_text())
    assert doc["case"] == "power_log"
    assert doc["weak_identity_residual"] <= 1e-3


def test_verify_subset_writes_report_and_sweep(workspace):
    result = _invoke("--config", "cfg.json", "verify", "--only", "constants",
                     "kplane.sweep_directions=[45]")
    assert result.exit_code == 0, result.output
    report = json.loads((workspace / "art/report.json").read_text())
    assert report["passed"] and report["checks"][0]["name"] == "constants"
    sweep = (workspace / "art/fbp_directions.csv").read_text().splitlines()
    assert sweep[0] == "directions,residual" and sweep[1].startswith("45,")
    assert "PASS constants" in result.output


def test_verify_rejects_unknown_check_names(workspace):
    # A typo must not yield a vacuous all-pass with exit 0.
    result = _invoke("--config", "cfg.json", "verify", "--only", "constnts")
    assert result.exit_code == 2
    err = json.loads(result.stderr)["error"]
    assert err["code"] == "config-invalid" and "constnts" in err["message"]


def test_errors_are_machine_readable(workspace):
    result = _invoke("--config", "cfg.json", "fit", "io.data=ghost.csv")
    assert result.exit_code == 2
    err = json.loads(result.stderr)["error"]
    assert err["code"] == "missing-file" and "ghost.csv" in err["message"]

    result = _invoke("--config", "cfg.json", "fit", "--solver.lamda=1")
    assert result.exit_code == 2
    assert json.loads(result.stderr)["error"]["code"] == "bad-override"

    result = _invoke("--config", "cfg.json", "fit", "--operator.alpha=-1")
    assert result.exit_code == 2
    assert json.loads(result.stderr)["error"]["code"] == "domain-error"


def test_run_requires_a_known_mode(workspace):
    cfg = build_config(workspace / "cfg.json")
    with pytest.raises(CliError):
        cli.run(cfg)          # mode still unset
    cfg["mode"] = "fit"
    assert cli.run(cfg) == 0
    assert os.path.exists(workspace / "art/model.json")
