"""``hwfr`` command-line interface.

Every command writes into ``--out`` and records ``resolved_config.json``;
rerunning with ``--config <that file>`` reproduces the outputs byte for
byte.  Parameters are resolved as command-line flags, then the config file,
then built-in defaults.  ``--out`` and ``--threads`` are not part of the
resolved config: neither changes any result.

Exit codes: 0 success, 2 configuration error, 3 non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, funreg, haar, inference, io, lasso, plotting, simgen, study, tuning
from .errors import ConfigError, ConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class DataError(Exception):
    """A required input file is missing or malformed (exit code 4)."""


# -- option tables ------------------------------------------------------

@dataclass(frozen=True)
class Opt:
    name: str
    type: object
    default: object
    help: str
    choices: tuple | None = None
    flag: bool = False


def _int_list(s):
    if isinstance(s, (list, tuple)):
        return [int(v) for v in s]
    return [int(v) for v in str(s).split(",") if v.strip()]


def _str_list(s):
    if isinstance(s, (list, tuple)):
        return [str(v) for v in s]
    return [v.strip() for v in str(s).split(",") if v.strip()]


DESIGN_OPTS = [
    Opt("design", str, "1d", "simulation design", ("1d", "3d")),
    Opt("x_type", str, "bspline", "1D predictor family", ("bspline", "fourier")),
    Opt("beta_case", int, 2, "1D coefficient function", (1, 2)),
    Opt("n", int, 100, "sample size"),
    Opt("p", int, 128, "1D grid length (power of 2)"),
    Opt("dims", int, 32, "3D grid side (power of 2)"),
    Opt("snr", float, 9.0, "var(g) / noise variance"),
    Opt("seed", int, 0, "random seed"),
    Opt("noise_mode", str, "mean_curve", "predictor noise variance convention", simgen.NOISE_MODES),
    Opt("g_from", str, "noisy", "predictor used in the true linear predictor", simgen.G_SOURCES),
]

TUNE_OPTS = [
    Opt("tune", str, "cv", "tuning method", ("cv", "aic", "bic", "fixed")),
    Opt("k", int, 5, "folds for CV tuning and for the refitted-CV variance"),
    Opt("levels", _int_list, None, "comma-separated decomposition levels (default: all)"),
    Opt("level", int, None, "decomposition level for --tune fixed"),
    Opt("lambda_", float, None, "penalty for --tune fixed"),
    Opt("n_lambdas", int, lasso.DEFAULT_N_LAMBDAS, "lambda grid size per level"),
    Opt("lambda_min_ratio", float, None, "smallest lambda over lambda_max (default 1e-4 if n >= p else 1e-2)"),
]

DATA_OPT = Opt("data", str, None, "dataset directory")

COMMANDS = {
    "simulate": DESIGN_OPTS,
    "fit": [DATA_OPT] + TUNE_OPTS + [
        Opt("lambda_max", bool, False, "fit at lambda_max (all-zero coefficients)", flag=True),
        Opt("seed", int, 0, "tuning seed"),
    ],
    "permute": [DATA_OPT] + TUNE_OPTS + [
        Opt("n_perm", int, 200, "number of permutations"),
        Opt("alpha", float, 0.05, "test level"),
        Opt("fast", bool, False, "reuse the original (level, lambda) for every permutation", flag=True),
        Opt("seed", int, 0, "random seed"),
    ],
    "bootstrap": [DATA_OPT] + TUNE_OPTS + [
        Opt("b", int, 100, "number of bootstrap samples"),
        Opt("seed", int, 0, "random seed"),
    ],
    "predict": [
        Opt("fit", str, None, "output directory of a 'fit' run"),
        DATA_OPT,
    ],
    "r2": [DATA_OPT] + [o for o in TUNE_OPTS if o.name in ("levels", "n_lambdas", "lambda_min_ratio")] + [
        Opt("outer_k", int, 10, "outer folds"),
        Opt("inner_k", int, 5, "inner (tuning) folds"),
        Opt("seed", int, 0, "random seed"),
    ],
    "export": [
        Opt("input", str, None, "grid file (.csv or .hwv)"),
        Opt("format", str, "curve", "export kind", ("curve", "slice", "top")),
        Opt("axis", str, "w", "slice axis", ("u", "v", "w")),
        Opt("index", int, None, "slice index (default: middle)"),
        Opt("top_q", float, 0.1, "fraction of largest grid values to list"),
        Opt("name", str, "value", "value column name"),
    ],
    "study": [o for o in DESIGN_OPTS if o.name != "n"] + [
        Opt("n", int, None, "sample size (default 100 for 1d, 200 for 3d)"),
        Opt("reps", int, 30, "replications"),
        Opt("methods", _str_list, ["sv", "cv", "aic", "bic"], "comma-separated tuning methods"),
        Opt("n_test", int, 2000, "test sample size"),
        Opt("k", int, 5, "CV folds"),
        Opt("n_perm", int, 0, "permutations per replicate for rejection frequencies (0: skip)"),
        Opt("alpha", float, 0.05, "test level"),
    ],
    "convert": [
        Opt("input", str, None, "'.npy' array: a single 3D volume or a stack (n, u, v, w)"),
        Opt("pad", bool, False, "zero-pad to dyadic side lengths", flag=True),
    ],
}

REQUIRED = {"fit": ("data",), "permute": ("data",), "bootstrap": ("data",), "r2": ("data",),
            "predict": ("fit", "data"), "export": ("input",), "convert": ("input",)}


def _flag(name):
    return "--" + name.rstrip("_").replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hwfr", description=(
        "Haar-wavelet Lasso functional linear regression for 1D signals and 3D volumes."))
    parser.add_argument("--version", action="version", version=f"hwfr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in COMMANDS.items():
        sp = sub.add_parser(cmd, argument_default=argparse.SUPPRESS)
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--config", help="JSON config file (overridden by flags)")
        sp.add_argument("--threads", type=int, help="worker threads (default: $HWFR_THREADS or 1)")
        for o in opts:
            if o.flag:
                sp.add_argument(_flag(o.name), dest=o.name, action="store_true", help=o.help)
            else:
                sp.add_argument(_flag(o.name), dest=o.name, type=o.type, choices=o.choices,
                                help=f"{o.help} (default: {o.default})")
    return parser


def resolve_config(command: str, flags: dict, config_path=None) -> dict:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    opts = {o.name: o for o in COMMANDS[command]}
    cfg = {name: o.default for name, o in opts.items()}
    if config_path is not None:
        try:
            loaded = io.read_json(config_path)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        loaded = dict(loaded)
        file_cmd = loaded.pop("command", command)
        if file_cmd != command:
            raise ConfigError(f"config is for command {file_cmd!r}, not {command!r}")
        unknown = sorted(set(loaded) - set(opts))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for key, val in loaded.items():
            o = opts[key]
            if val is not None and not o.flag:
                try:
                    val = o.type(val)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad value for {key}: {val!r}") from exc
            if o.choices is not None and val not in o.choices:
                raise ConfigError(f"{key} must be one of {o.choices}, got {val!r}")
            cfg[key] = val
    cfg.update({k: v for k, v in flags.items() if k in opts})
    for key in REQUIRED.get(command, ()):
        if cfg.get(key) is None:
            raise ConfigError(f"--{key.replace('_', '-')} is required")
    return cfg


# -- helpers -----------------------------------------------------------------

def _load_dataset(path):
    try:
        return io.read_dataset(path)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load dataset {path}: {exc}") from exc


def _tuning_grid(cfg) -> tuning.TuningGrid:
    levels = cfg.get("levels")
    return tuning.TuningGrid(levels=tuple(levels) if levels else None,
                             n_lambdas=cfg.get("n_lambdas", lasso.DEFAULT_N_LAMBDAS),
                             lambda_min_ratio=cfg.get("lambda_min_ratio"))


def _selection(cfg, shape) -> tuning.SelectionSpec:
    grid = _tuning_grid(cfg)
    grid.resolve_levels(shape)
    if cfg["n_lambdas"] < 1:
        raise ConfigError("n_lambdas must be positive")
    if cfg["k"] < 2:
        raise ConfigError("k must be at least 2")
    if cfg["tune"] == "fixed":
        if cfg["level"] is None or cfg["lambda_"] is None:
            raise ConfigError("--tune fixed needs --level and --lambda")
        haar._check_grid(shape, cfg["level"])
        if cfg["lambda_"] < 0:
            raise ConfigError("lambda must be nonnegative")
    return tuning.SelectionSpec(cfg["tune"], k=cfg["k"], grid=grid, seed=cfg["seed"],
                                level=cfg["level"], lambda_=cfg["lambda_"])


def _design(cfg, n_default=None):
    n = cfg["n"] if cfg["n"] is not None else n_default
    if cfg["design"] == "1d":
        return simgen.SimDesign1D(cfg["x_type"], cfg["beta_case"], n, cfg["p"], cfg["snr"],
                                  cfg["seed"], cfg["noise_mode"], cfg["g_from"])
    return simgen.SimDesign3D(n, cfg["dims"], cfg["snr"], cfg["seed"], cfg["noise_mode"],
                              cfg["g_from"])


def _grid_figure(grids: dict, path, *, truth=None, title=None):
    first = next(iter(grids.values()))
    if first.ndim == 1:
        t = simgen.midpoints(first.size)
        return plotting.curve_figure(t, grids, path, truth=truth, title=title)
    vols = dict(grids)
    if truth is not None:
        vols["true"] = truth
    return plotting.slice_figure(vols, path, title=title)


def _mask_figure(masks: dict, path, *, truth=None, title=None):
    first = next(iter(masks.values()))
    if first.ndim == 1:
        t = simgen.midpoints(first.size)
        regions = plotting.true_regions(t, truth != 0) if truth is not None else None
        return plotting.curve_figure(t, {k: v.astype(float) for k, v in masks.items()}, path,
                                     regions=regions, ylabel="rejected", ylim=(-0.05, 1.05),
                                     title=title)
    return plotting.slice_figure({k: v.astype(float) for k, v in masks.items()}, path,
                                 cmap="Greys", title=title)


def _fit_json(fit: funreg.FunctionalFit, tr: tuning.TuningResult, dataset, extra=None) -> dict:
    problem = lasso.LassoProblem(fit.design.matrix, dataset.responses, fit.lambda_)
    meta = {
        "level": fit.level,
        "lambda": fit.lambda_,
        "intercept": fit.intercept,
        "df": fit.df,
        "grid_shape": list(fit.basis.shape),
        "grid_measure": fit.design.grid_measure,
        "n_iter": fit.lasso_fit.n_iter,
        "kkt_violation": lasso.kkt_violation(fit.lasso_fit, problem),
        "objective": fit.lasso_fit.objective_value,
        "converged": fit.lasso_fit.converged,
        "tuning": tr.criterion,
        "tuning_seed": tr.seed,
        "best_score": None if tr.criterion == "fixed" else tr.best_score,
    }
    if tr.sigma2:
        meta["sigma2_hat"] = {str(k): v for k, v in tr.sigma2.items()}
    if extra:
        meta.update(extra)
    return meta


def _finite(x):
    return float(x) if np.isfinite(x) else None


def _write_eta(path, fit: funreg.FunctionalFit):
    eta = fit.eta_full
    labels = np.empty(eta.size, dtype=object)
    for label, (a, b) in haar.subband_layout(fit.basis.shape, fit.level):
        labels[a:b] = label
    nz = np.flatnonzero(eta)
    io.write_csv(path, ["index", "subband", "eta"], ((int(j), labels[j], eta[j]) for j in nz))


def _write_table(path, tr: tuning.TuningResult):
    io.write_csv(path, ["level", "lambda", "score", "df"], tr.rows())


# -- commands ----------------------------------------------------------------

def cmd_simulate(cfg, out: Path, threads):
    design = _design(cfg)
    data, truth = study.generate(design)
    ids = [f"s{i:04d}" for i in range(data.n)]
    io.write_dataset(out / "data", data, ids, {"design": {"type": cfg["design"], **design.to_dict()}})
    io.write_grid(out / "beta_true", truth.beta, "beta")
    io.write_csv(out / "truth.csv", ["id", "g"], zip(ids, truth.g))
    io.write_json(out / "truth.json", {
        "sigma2": truth.sigma2,
        "sigma_e2": truth.sigma_e2 if np.ndim(truth.sigma_e2) == 0 else None,
        "support_size": int(truth.support.sum()),
    })
    _grid_figure({"beta": truth.beta}, out / "beta_true.png", title="true coefficient")


def cmd_fit(cfg, out: Path, threads):
    data, ids, _ = _load_dataset(cfg["data"])
    if cfg["lambda_max"]:
        level = cfg["level"] if cfg["level"] is not None else haar.max_level(data.grid_shape)
        haar._check_grid(data.grid_shape, level)
        design = funreg.build_design(data, level)
        lam = lasso.lambda_max(design.matrix, data.responses)
        spec = tuning.SelectionSpec("fixed", level=level, lambda_=lam, seed=cfg["seed"])
    else:
        spec = _selection(cfg, data.grid_shape)
    tr, fit = inference.fit_selected(data, spec, threads=threads)
    io.write_grid(out / "beta_hat", fit.beta_field.values, "beta_hat")
    _write_eta(out / "eta.csv", fit)
    _write_table(out / "score_table.csv", tr)
    io.write_json(out / "fit.json", _fit_json(fit, tr, data))
    io.write_csv(out / "fitted.csv", ["id", "y", "y_hat"],
                 zip(ids, data.responses, funreg.predict(fit, data.predictors)))
    _grid_figure({"estimate": fit.beta_field.values}, out / "beta_hat.png",
                 title=f"level {fit.level}, lambda {fit.lambda_:.3g}")


def cmd_permute(cfg, out: Path, threads):
    data, _, _ = _load_dataset(cfg["data"])
    spec = _selection(cfg, data.grid_shape)
    if not 0 < cfg["alpha"] < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    if cfg["n_perm"] < 2 / cfg["alpha"]:
        raise ConfigError(f"n_perm must be at least 2/alpha = {2 / cfg['alpha']:g}")
    res = inference.permutation_test(data, spec, cfg["n_perm"], cfg["alpha"], cfg["seed"],
                                     fast=cfg["fast"], threads=threads)
    for name in ("beta_hat", "lower_band", "upper_band"):
        io.write_grid(out / name, getattr(res, name), name)
    io.write_grid(out / "rejection_mask", res.rejection_mask, "rejected")
    io.write_grid(out / "global_rejection_mask", res.global_rejection_mask, "rejected")
    io.write_csv(out / "max_statistics.csv", ["permutation", "max_abs_beta"],
                 enumerate(res.max_statistics))
    io.write_json(out / "permute.json", {
        "n_perm": res.n_perm, "alpha": res.alpha, "fast": res.fast, "seed": res.seed,
        "level": res.selected_level, "lambda": res.selected_lambda,
        "global_max_quantile": res.global_max_quantile,
        "pointwise_rejections": int(res.rejection_mask.sum()),
        "global_rejections": int(res.global_rejection_mask.sum()),
    })
    if res.beta_hat.ndim == 1:
        t = simgen.midpoints(res.beta_hat.size)
        plotting.curve_figure(t, {"estimate": res.beta_hat, "lower": res.lower_band,
                                  "upper": res.upper_band}, out / "bands.png",
                              title="permutation bands")
    else:
        plotting.slice_figure({"estimate": res.beta_hat, "pointwise": res.rejection_mask * 1.0,
                               "global": res.global_rejection_mask * 1.0}, out / "bands.png")


def cmd_bootstrap(cfg, out: Path, threads):
    data, _, _ = _load_dataset(cfg["data"])
    spec = _selection(cfg, data.grid_shape)
    if cfg["b"] < 1:
        raise ConfigError("b must be at least 1")
    res = inference.bootstrap_inclusion(data, cfg["b"], spec, cfg["seed"], threads=threads)
    io.write_grid(out / "bif", res.inclusion_frequency, "bif")
    io.write_csv(out / "selections.csv", ["sample", "level", "lambda", "support_size"],
                 ((i, L, lam, s) for i, ((L, lam), s) in
                  enumerate(zip(res.selections, res.support_sizes))))
    io.write_json(out / "bootstrap.json", {"B": res.B, "seed": res.seed,
                                           "max_bif": int(res.inclusion_frequency.max())})
    _grid_figure({"BIF": res.inclusion_frequency.astype(float)}, out / "bif.png",
                 title=f"inclusion frequency out of {res.B}")


def cmd_predict(cfg, out: Path, threads):
    fit_dir = Path(cfg["fit"])
    try:
        meta = io.read_json(fit_dir / "fit.json")
        candidates = [fit_dir / "beta_hat.csv", fit_dir / "beta_hat.hwv"]
        beta = io.read_grid(next(p for p in candidates if p.exists()))
    except (OSError, StopIteration, KeyError, ValueError) as exc:
        raise DataError(f"cannot load fit from {fit_dir}: {exc}") from exc
    data, ids, _ = _load_dataset(cfg["data"])
    if tuple(meta["grid_shape"]) != data.grid_shape:
        raise ConfigError(f"fit grid {tuple(meta['grid_shape'])} does not match data {data.grid_shape}")
    flat = data.predictors.reshape(data.n, -1)
    y_hat = meta["intercept"] + meta["grid_measure"] * (flat @ beta.ravel())
    io.write_csv(out / "predictions.csv", ["id", "y_hat"], zip(ids, y_hat))
    io.write_json(out / "predict.json", {"n": data.n, "mse": float(np.mean((data.responses - y_hat) ** 2))})


def cmd_r2(cfg, out: Path, threads):
    data, ids, _ = _load_dataset(cfg["data"])
    grid = _tuning_grid(cfg)
    grid.resolve_levels(data.grid_shape)
    if cfg["outer_k"] < 2 or cfg["inner_k"] < 2:
        raise ConfigError("outer_k and inner_k must be at least 2")
    res = inference.predictive_r2(data, cfg["outer_k"], cfg["inner_k"], cfg["seed"], grid=grid,
                                  threads=threads)
    io.write_json(out / "r2.json", {"r2_predictive": res.r2_predictive,
                                    "r2_standard": res.r2_standard, "seed": res.seed,
                                    "outer_k": cfg["outer_k"], "inner_k": cfg["inner_k"]})
    fold_of = np.empty(data.n, dtype=np.int64)
    for f, idx in enumerate(res.folds):
        fold_of[idx] = f
    io.write_csv(out / "cv_predictions.csv", ["id", "fold", "y", "y_hat"],
                 zip(ids, fold_of, data.responses, res.predictions))
    io.write_csv(out / "fold_selections.csv", ["fold", "level", "lambda"],
                 ((f, L, lam) for f, (L, lam) in enumerate(res.selections)))
    plotting.bar_figure(["predictive", "standard"], [res.r2_predictive, res.r2_standard],
                        out / "r2.png", ylabel="R^2")


def cmd_export(cfg, out: Path, threads):
    src = Path(cfg["input"])
    try:
        grid = io.read_grid(src)
    except (OSError, ValueError, IndexError) as exc:
        raise DataError(f"cannot read grid {src}: {exc}") from exc
    name = cfg["name"]
    stem = out / src.stem
    kind = cfg["format"]
    if kind == "curve":
        if grid.ndim != 1:
            raise ConfigError("curve export needs a 1D grid")
        t = simgen.midpoints(grid.size)
        io.write_csv(stem.with_suffix(".csv"), ["t", name], zip(t, grid))
        plotting.curve_figure(t, {name: grid}, stem.with_suffix(".png"), ylabel=name)
    elif kind == "slice":
        if grid.ndim != 3:
            raise ConfigError("slice export needs a 3D grid")
        axis = "uvw".index(cfg["axis"])
        k = grid.shape[axis] // 2 if cfg["index"] is None else cfg["index"]
        if not 0 <= k < grid.shape[axis]:
            raise ConfigError(f"slice index {k} outside 0..{grid.shape[axis] - 1}")
        sl = np.take(grid, k, axis=axis)
        a, b = [c for i, c in enumerate("uvw") if i != axis]
        ii, jj = np.meshgrid(np.arange(sl.shape[0]), np.arange(sl.shape[1]), indexing="ij")
        path = out / f"{src.stem}_{cfg['axis']}{k}"
        io.write_csv(path.with_suffix(".csv"), [a, b, name],
                     zip(ii.ravel(), jj.ravel(), sl.ravel()))
        plotting.slice_figure({name: grid}, path.with_suffix(".png"), axis=axis, indices=[k])
    else:
        q = cfg["top_q"]
        if not 0 < q <= 1:
            raise ConfigError("top_q must lie in (0, 1]")
        flat = grid.ravel()
        m = max(int(np.ceil(q * flat.size)), 1)
        order = np.lexsort((np.arange(flat.size), -flat))[:m]
        coords = np.array(np.unravel_index(order, grid.shape)).T
        cols = ["j"] if grid.ndim == 1 else list("uvw")
        io.write_csv(out / f"{src.stem}_top.csv", ["rank"] + cols + [name],
                     ((r, *c, flat[j]) for r, (c, j) in enumerate(zip(coords, order))))


def cmd_study(cfg, out: Path, threads):
    design = _design(cfg, n_default=100 if cfg["design"] == "1d" else 200)
    methods = cfg["methods"]
    bad = sorted(set(methods) - set(study.METHODS))
    if bad or not methods:
        raise ConfigError(f"methods must be drawn from {study.METHODS}")
    if cfg["reps"] < 1 or cfg["n_test"] < 1:
        raise ConfigError("reps and n_test must be positive")
    res = study.run_study(design, cfg["reps"], methods, cfg["n_test"], cfg["k"], threads=threads)
    io.write_csv(out / "replicates.csv",
                 ["rep", "method", "mse", "nonzero_pct", "zero_pct", "level", "lambda", "df"],
                 ((r.rep, r.method, r.mse, r.nonzero_pct, r.zero_pct, r.level, r.lambda_, r.df)
                  for r in res.records))
    summary = res.summary()
    io.write_csv(out / "summary.csv",
                 ["method", "reps", "mse_mean", "mse_sd", "nonzero_pct", "zero_pct"],
                 ([s["method"], s["reps"], s["mse_mean"], s["mse_sd"], s["nonzero_pct"], s["zero_pct"]]
                  for s in summary))
    for m, b in res.mean_beta.items():
        io.write_grid(out / f"mean_beta_{m}", b, "mean_beta")
    _grid_figure({m.upper(): b for m, b in res.mean_beta.items()}, out / "mean_beta.png",
                 truth=res.true_beta, title=f"average estimate over {cfg['reps']} replicates")
    if cfg["n_perm"]:
        rej = study.run_rejection_study(design, cfg["reps"], cfg["n_perm"], cfg["alpha"], fast=True,
                                        selection=None, threads=threads)
        io.write_grid(out / "rejection_frequency", rej.pointwise_frequency, "pointwise")
        io.write_grid(out / "global_rejection_frequency", rej.global_frequency, "global")
        io.write_json(out / "rejection.json", {"reps": rej.reps, "support_ratio": _finite(rej.support_ratio()),
                                               "subset_violations": rej.subset_violations})
        if rej.true_beta.ndim == 1:
            t = simgen.midpoints(rej.true_beta.size)
            plotting.curve_figure(t, {"pointwise": rej.pointwise_frequency,
                                      "global": rej.global_frequency}, out / "rejection_frequency.png",
                                  regions=plotting.true_regions(t, rej.true_beta != 0),
                                  ylabel="rejection frequency", ylim=(-0.05, 1.05))


def cmd_convert(cfg, out: Path, threads):
    """Map an array exported from a scan reader into ``HWV1`` volumes.

    Real scans would be read with an imaging library, masked and exported
    as ``.npy``; this command only handles the numpy side.
    """
    src = Path(cfg["input"])
    try:
        arr = np.load(src, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {src}: {exc}") from exc
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4:
        raise ConfigError(f"expected a 3D volume or a 4D stack, got shape {arr.shape}")
    record = None
    if cfg["pad"]:
        record = funreg.padding_for(arr.shape[1:])
        arr = np.array([record.pad(v) for v in arr])
    (out / "volumes").mkdir(exist_ok=True)
    ids = [f"s{i:04d}" for i in range(arr.shape[0])]
    for i, v in zip(ids, arr):
        io.write_volume(out / "volumes" / f"{i}.hwv", v)
    io.write_json(out / "convert.json", {
        "n": len(ids), "shape": list(arr.shape[1:]),
        "padding": None if record is None else {
            "original_shape": list(record.original_shape),
            "padded_shape": list(record.padded_shape),
            "offsets": list(record.offsets)},
    })


HANDLERS = {name[4:]: fn for name, fn in globals().items() if name.startswith("cmd_")}


def run(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    out = Path(args.pop("out"))
    config_path = args.pop("config", None)
    threads = args.pop("threads", None)
    try:
        if threads is not None and threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = resolve_config(command, args, config_path)
        try:
            out.mkdir(parents=True, exist_ok=True)
            io.write_json(out / "resolved_config.json", {"command": command, **cfg})
        except OSError as exc:
            raise DataError(f"cannot write to {out}: {exc}") from exc
        HANDLERS[command](cfg, out, threads)
    except ConvergenceError as exc:
        print(f"hwfr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except inference.PipelineError as exc:
        code = EXIT_NUMERIC if isinstance(exc.__cause__, ConvergenceError) else EXIT_CONFIG
        print(f"hwfr: {exc}", file=sys.stderr)
        return code
    except DataError as exc:
        print(f"hwfr: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"hwfr: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"hwfr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
