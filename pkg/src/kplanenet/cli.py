"""Batch front end: dataset ingestion, JSON config, subcommands, artifacts.

One JSON document configures a run; command-line tokens of the form
``section.key=value`` (a leading ``--`` is accepted) override individual
dot-paths, and the config path itself may come from the ``KPLANENET_CONFIG``
environment variable.  All randomness flows from the single top-level
``seed``, split per consumer by the fixed labels in ``SEED_LABELS`` --
``solver.seed`` in the config is therefore ignored and overwritten.

Exit codes: 0 on success (and on ``verify`` only when every check passes),
1 when ``verify`` ran but some check failed, 2 on any error.  Errors are
emitted to stderr as one JSON object ``{"error": {"code", "message"}}``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys

import click
import numpy as np

from . import acceptance, greens, network, solver
from .kplane import (GridFunction, direction_design, kplane_transform,
                     load_grid, save_plane)
from .network import Atom, Dataset, Model, dictionary_matrix, forward
from .operators import OperatorSpec, null_space_dim
from .polyspace import PolyCoeffs, enumerate_multi_indices
from .solver import FitConfig, Trace, lambda_max, lasso, prune_support, train

MODES = ("fit", "lasso", "predict", "prune", "transform", "greens", "verify")

# fixed split of the top-level seed, one label per random consumer
SEED_LABELS = {"trainer": 0, "dictionary": 1}

DEFAULTS = {
    "mode": None,
    "seed": 0,
    "threads": 1,
    "operator": {"family": "fractional_laplacian", "alpha": 2.0, "d": 2, "k": 1},
    "solver": FitConfig().to_dict(),
    "dictionary": {"atoms": 500, "lambda_scale": None},
    "polyspace": {"extent": None, "points": None},
    "kplane": {"directions": None, "t_extent": None, "t_points": None,
               "order": 3, "sweep_directions": [45, 90, 180, 360]},
    "io": {
        "outdir": ".",
        "data": None,
        "inputs": None,
        "grid": None,
        "model": "model.json",
        "pruned": "pruned.json",
        "trace": "trace.csv",
        "metrics": "metrics.json",
        "predictions": "predictions.csv",
        "plane": "plane.kpl",
        "report": "report.json",
        "sweep": "fbp_directions.csv",
    },
}


class CliError(Exception):
    """Error with a machine-readable code and a human message."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


def _deep_merge(base: dict, patch: dict, prefix: str = "") -> dict:
    out = dict(base)
    for key, val in patch.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise CliError("config-invalid", f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise CliError("config-invalid",
                               f"{path!r} must be an object, got {val!r}")
            out[key] = _deep_merge(base[key], val, prefix=path + ".")
        else:
            out[key] = val
    return out


def _apply_override(cfg: dict, token: str) -> None:
    raw = token[2:] if token.startswith("--") else token
    if "=" not in raw:
        raise CliError("bad-override",
                       f"override {token!r} must look like section.key=value")
    path, text = raw.split("=", 1)
    keys = path.split(".")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    node = cfg
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise CliError("bad-override", f"no config section {path!r}")
        node = node[key]
    if keys[-1] not in node:
        raise CliError("bad-override", f"unknown config key {path!r}")
    if isinstance(node[keys[-1]], dict):
        raise CliError("bad-override", f"{path!r} names a section, not a value")
    node[keys[-1]] = value


def build_config(config_path, overrides=(), threads=None) -> dict:
    """defaults <- config file (path or KPLANENET_CONFIG) <- dot-path overrides."""
    cfg = json.loads(json.dumps(DEFAULTS))  # deep copy
    path = config_path or os.environ.get("KPLANENET_CONFIG")
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise CliError("missing-file", f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise CliError("bad-json", f"config {path}: {exc}")
        if not isinstance(doc, dict):
            raise CliError("config-invalid", "config document must be an object")
        cfg = _deep_merge(cfg, doc)
    for token in overrides:
        _apply_override(cfg, token)
    if threads is not None:
        cfg["threads"] = int(threads)
    return cfg


def derive_seed(seed: int, label: str) -> int:
    """Named 32-bit stream seed split off the one top-level seed."""
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=(SEED_LABELS[label],))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (1 << 32))


def _fit_config(cfg: dict) -> FitConfig:
    doc = dict(cfg["solver"])
    doc["seed"] = derive_seed(cfg["seed"], "trainer")
    try:
        return FitConfig.from_dict(doc)
    except TypeError as exc:
        raise CliError("config-invalid", f"solver block: {exc}")


def _operator(cfg: dict) -> OperatorSpec:
    return OperatorSpec.from_dict(cfg["operator"])


def _outpath(cfg: dict, key: str) -> str:
    value = cfg["io"][key]
    if value is None:
        raise CliError("config-invalid", f"io.{key} must be set for this command")
    outdir = cfg["io"]["outdir"]
    os.makedirs(outdir, exist_ok=True)
    return value if os.path.isabs(value) else os.path.join(outdir, value)


def _inpath(cfg: dict, key: str) -> str:
    """Input path: as given, else relative to io.outdir (pipeline artifacts)."""
    value = cfg["io"][key]
    if value is None:
        raise CliError("config-invalid", f"io.{key} must be set for this command")
    if os.path.exists(value):
        return value
    fallback = os.path.join(cfg["io"]["outdir"], value)
    if not os.path.isabs(value) and os.path.exists(fallback):
        return fallback
    raise CliError("missing-file", f"io.{key}: no such file: {value}")


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _read_rows(path: str) -> list:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except FileNotFoundError:
        raise CliError("missing-file", f"no such file: {path}")
    except UnicodeDecodeError as exc:
        raise CliError("csv-parse", f"{path}: not valid UTF-8 ({exc})")


def _parse_table(path: str, rows: list) -> np.ndarray:
    """Numeric table with optional header; errors carry 1-based line numbers."""
    if not rows:
        raise CliError("csv-parse", f"{path}: empty file")

    def numeric(row):
        if not row:
            return False
        try:
            [float(cell) for cell in row]
        except ValueError:
            return False
        return True

    start = 1 if not numeric(rows[0]) else 0
    data = rows[start:]
    if not data:
        raise CliError("csv-parse", f"{path}: no data rows after the header")
    width = len(data[0])
    table = np.empty((len(data), width))
    for i, row in enumerate(data):
        lineno = start + i + 1
        if len(row) != width:
            raise CliError("csv-parse", f"{path}, line {lineno}: expected "
                           f"{width} cells, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise CliError("csv-parse", f"{path}, line {lineno}: "
                               f"non-numeric cell {cell!r}")
            if not math.isfinite(value):
                raise CliError("csv-parse", f"{path}, line {lineno}: "
                               f"non-finite value {cell!r}")
            table[i, j] = value
    return table


def ingest_csv(path: str) -> Dataset:
    """UTF-8 CSV with d feature columns then one target column."""
    table = _parse_table(path, _read_rows(path))
    if table.shape[1] < 2:
        raise CliError("csv-parse", f"{path}: need at least one feature column "
                       "and one target column")
    return Dataset(X=table[:, :-1], y=table[:, -1])


def _read_feature_csv(path: str, d: int) -> np.ndarray:
    table = _parse_table(path, _read_rows(path))
    if table.shape[1] != d:
        raise CliError("csv-parse", f"{path}: expected {d} feature columns, "
                       f"got {table.shape[1]}")
    return table


# ---------------------------------------------------------------------------
# shared emission helpers
# ---------------------------------------------------------------------------


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _poly_vector(model: Model) -> np.ndarray:
    if model.spec.n_L < 0:
        return np.zeros(0)
    return model.poly.vector(enumerate_multi_indices(model.spec.d,
                                                     model.spec.n_L))


def _metrics(model: Model, ds: Dataset, lam: float) -> dict:
    """The five reported numbers, recomputed from the saved model."""
    G, P = dictionary_matrix(model.spec, [(a.A, a.t) for a in model.atoms],
                             ds.X)
    v = np.array([a.v for a in model.atoms])
    c = _poly_vector(model)
    resid = ds.y - (G @ v + P @ c if v.size else P @ c)
    reg = network.reg_cost(model)
    return {
        "objective": float(resid @ resid + lam * reg),
        "reg_cost": reg,
        "nnz": int(np.count_nonzero(v)),
        "sparsity_bound": int(len(ds.y) - null_space_dim(model.spec.d,
                                                         model.spec.n_L)),
        "kkt_residual": float(solver._kkt_residual(G, P, ds.y, v, c, lam)),
    }


def _emit_model_artifacts(cfg, model, trace, ds, lam) -> dict:
    network.save_model(_outpath(cfg, "model"), model)
    trace.to_csv(_outpath(cfg, "trace"))
    metrics = _metrics(model, ds, lam)
    _write_json(_outpath(cfg, "metrics"), metrics)
    return metrics


def _poly_from_vector(spec: OperatorSpec, c: np.ndarray) -> PolyCoeffs:
    if spec.n_L < 0:
        return PolyCoeffs.zero(spec.d, 0)
    idx = enumerate_multi_indices(spec.d, spec.n_L)
    return PolyCoeffs(d=spec.d, degree=spec.n_L,
                      coeffs=dict(zip(idx, np.asarray(c, dtype=float).tolist())))


# ---------------------------------------------------------------------------
# mode handlers
# ---------------------------------------------------------------------------


def _run_fit(cfg: dict) -> int:
    ds = ingest_csv(_inpath(cfg, "data"))
    spec = _operator(cfg)
    if ds.X.shape[1] != spec.d:
        raise CliError("domain-error", f"dataset has {ds.X.shape[1]} features "
                       f"but operator.d = {spec.d}")
    model, trace = train(ds, spec, _fit_config(cfg))
    metrics = _emit_model_artifacts(cfg, model, trace, ds,
                                    cfg["solver"]["lambda"])
    click.echo(f"fit: objective={metrics['objective']:.6e} "
               f"nnz={metrics['nnz']} kkt={metrics['kkt_residual']:.3e}")
    return 0


def _run_lasso(cfg: dict) -> int:
    ds = ingest_csv(_inpath(cfg, "data"))
    spec = _operator(cfg)
    if ds.X.shape[1] != spec.d:
        raise CliError("domain-error", f"dataset has {ds.X.shape[1]} features "
                       f"but operator.d = {spec.d}")
    M, d = ds.X.shape
    r = spec.d - spec.k
    n_atoms = int(cfg["dictionary"]["atoms"])
    if n_atoms < 1:
        raise CliError("config-invalid", "dictionary.atoms must be >= 1")
    rng = np.random.default_rng(derive_seed(cfg["seed"], "dictionary"))
    params = []
    for i in range(n_atoms):
        A = solver.stiefel_project(rng.standard_normal((r, d)), rng=rng)
        t = A @ ds.X[int(rng.integers(M))]
        params.append((A, t))
    G, P = dictionary_matrix(spec, params, ds.X)

    lam = float(cfg["solver"]["lambda"])
    scale = cfg["dictionary"]["lambda_scale"]
    if scale is not None:
        lam = float(scale) * lambda_max(G, P, ds.y)
    v, c, kkt = lasso(G, P, ds.y, lam, tol_kkt=cfg["solver"]["tol_kkt"])

    atoms = [Atom(v=float(v[i]), A=params[i][0], t=params[i][1])
             for i in np.flatnonzero(v)]
    model = Model(spec=spec, atoms=atoms, poly=_poly_from_vector(spec, c))
    resid = ds.y - (G @ v + P @ c)
    fit_term = float(resid @ resid)
    l1 = float(np.sum(np.abs(v)))
    stiefel = max((float(np.linalg.norm(A @ A.T - np.eye(r)))
                   for A, _ in params), default=0.0)
    trace = Trace()
    trace.append(0, fit_term + lam * l1, fit_term, lam * l1, stiefel, 0.0)
    metrics = _emit_model_artifacts(cfg, model, trace, ds, lam)
    click.echo(f"lasso: lambda={lam:.6e} nnz={metrics['nnz']} "
               f"kkt={metrics['kkt_residual']:.3e}")
    return 0


def _run_predict(cfg: dict) -> int:
    model = network.load_model(_inpath(cfg, "model"))
    X = _read_feature_csv(_inpath(cfg, "inputs"), model.spec.d)
    yhat = forward(model, X)
    path = _outpath(cfg, "predictions")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("prediction\n")
        for value in np.atleast_1d(yhat):
            fh.write(repr(float(value)) + "\n")
    click.echo(f"predict: wrote {len(np.atleast_1d(yhat))} rows to {path}")
    return 0


def _run_prune(cfg: dict) -> int:
    model = network.load_model(_inpath(cfg, "model"))
    ds = ingest_csv(_inpath(cfg, "data"))
    if ds.X.shape[1] != model.spec.d:
        raise CliError("domain-error", f"dataset has {ds.X.shape[1]} features "
                       f"but the model expects {model.spec.d}")
    params = [(a.A, a.t) for a in model.atoms]
    G, P = dictionary_matrix(model.spec, params, ds.X)
    v = np.array([a.v for a in model.atoms])
    c = _poly_vector(model)
    v2, c2 = prune_support(G, P, v, c, ds.y)
    atoms = [Atom(v=float(v2[i]), A=params[i][0], t=params[i][1])
             for i in np.flatnonzero(v2)]
    pruned = Model(spec=model.spec, atoms=atoms,
                   poly=_poly_from_vector(model.spec, c2),
                   activation_alias=model.activation_alias)
    network.save_model(_outpath(cfg, "pruned"), pruned)
    from .oracles import sparsity_certificate
    cert = sparsity_certificate(pruned, len(ds.y))
    metrics = _metrics(pruned, ds, cfg["solver"]["lambda"])
    metrics["certificate"] = cert
    _write_json(_outpath(cfg, "metrics"), metrics)
    click.echo(f"prune: nnz {int(np.count_nonzero(v))} -> {cert['nnz']} "
               f"(bound {cert['bound']}, ok={cert['ok']})")
    return 0


def _run_transform(cfg: dict) -> int:
    phi = load_grid(_inpath(cfg, "grid"))
    spec = _operator(cfg)
    if phi.d != spec.d:
        raise CliError("domain-error", f"grid is {phi.d}-dimensional but "
                       f"operator.d = {spec.d}")
    design = direction_design(spec.d, spec.k, cfg["kplane"]["directions"])
    t_extent = cfg["kplane"]["t_extent"]
    if t_extent is None:
        t_extent = float(np.linalg.norm(phi.extents))
    t_points = cfg["kplane"]["t_points"]
    if t_points is None:
        t_points = max(phi.counts)
    g = kplane_transform(phi, design, t_extent, int(t_points),
                         threads=cfg["threads"],
                         order=cfg["kplane"]["order"])
    save_plane(_outpath(cfg, "plane"), g)
    _write_json(_outpath(cfg, "metrics"), {
        "directions": len(design),
        "t_extent": float(t_extent),
        "t_points": int(t_points),
        "max_abs": float(np.max(np.abs(g.values))),
        "warnings": list(g.warnings),
    })
    click.echo(f"transform: {len(design)} directions x {t_points} offsets"
               + (f" ({len(g.warnings)} boundary warnings)" if g.warnings else ""))
    return 0


def _run_greens(cfg: dict) -> int:
    spec = _operator(cfg)
    prof = greens.profile(spec.alpha, spec.m)
    extent = cfg["polyspace"]["extent"]
    points = cfg["polyspace"]["points"]
    if extent is None or points is None:
        extent, points = greens.oracle_default_grid(spec.alpha, spec.m)
    residual = greens.weak_identity_residual(prof, extent=extent,
                                             points=int(points))
    doc = {
        "alpha": spec.alpha,
        "m": spec.m,
        "case": prof.case,
        "constant": prof.constant,
        "weak_identity_residual": residual,
        "grid": {"extent": float(extent), "points": int(points)},
    }
    _write_json(_outpath(cfg, "metrics"), doc)
    click.echo(json.dumps(doc, indent=2))
    return 0


def _run_verify(cfg: dict, only=None) -> int:
    names = None
    if only:
        names = [n.strip() for n in only.split(",") if n.strip()]
        known = [fn.__name__.removeprefix("check_")
                 for fn in acceptance.ALL_CHECKS]
        bad = [n for n in names if n not in known]
        if bad:
            raise CliError(
                "config-invalid",
                f"unknown check name(s) {bad}; choose from {known}")
    results = acceptance.run_all(names)
    for res in results:
        click.echo(res.line())
    report = acceptance.report(results)
    _write_json(_outpath(cfg, "report"), report)
    rows = acceptance.fbp_direction_sweep(
        counts=tuple(cfg["kplane"]["sweep_directions"]),
        threads=cfg["threads"])
    with open(_outpath(cfg, "sweep"), "w", encoding="utf-8") as fh:
        fh.write("directions,residual\n")
        for row in rows:
            fh.write(f"{row['directions']},{row['residual']!r}\n")
    click.echo(f"ALL PASS: {report['passed']}")
    return 0 if report["passed"] else 1


_HANDLERS = {
    "fit": _run_fit,
    "lasso": _run_lasso,
    "predict": _run_predict,
    "prune": _run_prune,
    "transform": _run_transform,
    "greens": _run_greens,
    "verify": _run_verify,
}


def run(config: dict) -> int:
    """Dispatch a validated config on its mode; returns the exit code."""
    mode = config.get("mode")
    if mode not in MODES:
        raise CliError("config-invalid", f"mode must be one of {MODES}, "
                       f"got {mode!r}")
    _operator(config)   # validate the operator block before any work
    _fit_config(config)  # validate the solver block likewise
    return _HANDLERS[mode](config)


# ---------------------------------------------------------------------------
# click wiring
# ---------------------------------------------------------------------------


def _execute(ctx, mode: str, overrides, **extra) -> None:
    try:
        cfg = build_config(ctx.obj["config_path"], overrides,
                           threads=ctx.obj["threads"])
        cfg["mode"] = mode
        if mode == "verify":
            code = _run_verify(cfg, only=extra.get("only"))
        else:
            code = run(cfg)
    except CliError as exc:
        _fail(exc.code, str(exc))
    except (ValueError, np.linalg.LinAlgError) as exc:
        _fail("domain-error", str(exc))
    except OSError as exc:
        _fail("io-error", str(exc))
    else:
        if code:
            raise SystemExit(code)


def _fail(code: str, message: str) -> None:
    click.echo(json.dumps({"error": {"code": code, "message": message}}),
               err=True)
    raise SystemExit(2)


_SETTINGS = {"ignore_unknown_options": True}


@click.group()
@click.option("--config", "config_path", type=str, default=None,
              envvar="KPLANENET_CONFIG",
              help="JSON run config (also via KPLANENET_CONFIG).")
@click.option("--threads", type=int, default=None,
              help="Worker threads for grid evaluation (default 1; "
                   "results are identical across thread counts).")
@click.pass_context
def main(ctx, config_path, threads):
    """Plane-integral networks: fitting, transforms, and verification.

    Every subcommand accepts trailing SECTION.KEY=VALUE overrides, e.g.

        kplanenet fit --solver.lambda=0.1 io.data=train.csv
    """
    ctx.obj = {"config_path": config_path, "threads": threads}


def _command(name, help_text):
    def deco(fn):
        @main.command(name=name, context_settings=_SETTINGS, help=help_text)
        @click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
        @click.pass_context
        def _cmd(ctx, overrides):
            fn(ctx, overrides)
        _cmd.__name__ = name
        return _cmd
    return deco


@_command("fit", "Train on io.data; write model JSON, trace CSV, metrics JSON.")
def _fit_cmd(ctx, overrides):
    _execute(ctx, "fit", overrides)


@_command("lasso", "Convex fit over a seeded random dictionary of "
                   "dictionary.atoms ridge atoms with biases at projected "
                   "data sites; write model, trace, and metrics.")
def _lasso_cmd(ctx, overrides):
    _execute(ctx, "lasso", overrides)


@_command("predict", "Evaluate io.model on io.inputs (feature CSV); write a "
                     "row-aligned predictions CSV.")
def _predict_cmd(ctx, overrides):
    _execute(ctx, "predict", overrides)


@_command("prune", "Reduce io.model to at most M - dim(nullspace) atoms on "
                   "io.data without changing its predictions; write the "
                   "pruned model, metrics, and a sparsity certificate.")
def _prune_cmd(ctx, overrides):
    _execute(ctx, "prune", overrides)


@_command("transform", "Apply the plane-integral transform to the grid in "
                       "io.grid; write the plane binary and metrics.")
def _transform_cmd(ctx, overrides):
    _execute(ctx, "transform", overrides)


@_command("greens", "Report the activation profile for the operator block "
                    "(branch, constant, weak-identity residual).")
def _greens_cmd(ctx, overrides):
    _execute(ctx, "greens", overrides)


@main.command(name="verify", context_settings=_SETTINGS,
              help="Run the acceptance checks; write report.json and a "
                   "plot-ready direction-sweep CSV. Exit 0 iff all pass.")
@click.option("--only", default=None,
              help="Comma-separated subset of check names.")
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
@click.pass_context
def _verify_cmd(ctx, only, overrides):
    _execute(ctx, "verify", overrides, only=only)


if __name__ == "__main__":
    main()
