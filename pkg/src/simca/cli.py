"""Command-line harness: generate, train, evaluate, sweep, plot.

Configs are flat JSON with one shared schema; unknown keys are rejected so a
typo in a hyperparameter never passes silently. Sweep runs derive their seeds
by hashing (master seed, grid point, repeat), which makes them reproducible
and safe to execute in parallel.

Exit codes: 0 success, 1 validation error, 2 runtime/IO error, 3 partial
sweep failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bundle import (
    SweepRow,
    load_dataset,
    load_history,
    load_sweep,
    save_dataset,
    save_eval_report,
    save_history,
    save_sweep,
    write_matrix_csv,
    read_matrix_csv,
)
from .datagen import GenConfig, apply_gaussian_noise, apply_swap_noise, generate_dataset
from .metrics import evaluate
from .model import AffinityParams, Dataset
from .plots import render_sweep_chart, render_training_chart
from .training import TrainConfig, train


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 1."""


_GEN_KEYS = {
    "n": int, "m": int, "d": int, "k": int, "alpha": float,
    "cluster_spread": float, "dirichlet_conc": float,
    "extra_spots_per_item": int, "seed": int,
}
_TRAIN_KEYS = {
    "epsilon": float, "alpha": float, "sinkhorn_iters": int, "learning_rate": float,
    "epochs": int, "adam_beta1": float, "adam_beta2": float, "adam_eps": float,
    "seed": int, "joint_users": bool, "init_scheme": str, "sinkhorn_warm_start": bool,
}
_NOISE_KEYS = {"swap_rho": float, "gauss_rho": float}
_SWEEP_KEYS = {
    "epsilon_values": list, "gauss_rho_values": list, "swap_rho_values": list,
    "repeats": int,
}
_SCHEMA: dict[str, type] = {**_GEN_KEYS, **_TRAIN_KEYS, **_NOISE_KEYS, **_SWEEP_KEYS}

_DEFAULTS = {
    "swap_rho": 0.0,
    "gauss_rho": 0.0,
    "epsilon_values": [],
    "gauss_rho_values": [],
    "swap_rho_values": [],
    "repeats": 1,
}


def _check_value(key: str, value, expected: type):
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number, got {value!r}")
        return float(value)
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {key!r} must be an integer, got {value!r}")
        return value
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"config key {key!r} must be a boolean, got {value!r}")
        return value
    if expected is str:
        if not isinstance(value, str):
            raise ConfigError(f"config key {key!r} must be a string, got {value!r}")
        return value
    if expected is list:
        if not isinstance(value, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
        ):
            raise ConfigError(f"config key {key!r} must be a list of numbers, got {value!r}")
        return [float(v) for v in value]
    raise AssertionError(key)


def validate_config(raw: dict) -> dict:
    """Check a raw config mapping against the flat schema."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = dict(_DEFAULTS)
    for key, value in raw.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = _check_value(key, value, _SCHEMA[key])
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return validate_config(raw)


def derive_seed(master: int, *parts) -> int:
    """Stable sub-seed from a master seed and arbitrary labels."""
    text = f"{master}|" + "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:4], "big")


def gen_config_from(cfg: dict) -> GenConfig:
    kwargs = {k: cfg[k] for k in _GEN_KEYS if k in cfg}
    try:
        return GenConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def train_config_from(cfg: dict, **overrides) -> TrainConfig:
    kwargs = {k: cfg[k] for k in _TRAIN_KEYS if k in cfg}
    kwargs.update(overrides)
    try:
        return TrainConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _info(quiet: bool, message: str):
    if not quiet:
        print(message)


def run_generate(cfg: dict, out_dir, quiet: bool = False) -> Path:
    gen_cfg = gen_config_from(cfg)
    dataset = generate_dataset(gen_cfg)
    bundle = save_dataset(dataset, out_dir, gen_config=gen_cfg)
    _info(quiet, f"wrote dataset bundle ({dataset.n_users} users, "
                 f"{dataset.n_items} items) to {bundle}")
    return bundle


def _noisy_dataset(dataset: Dataset, cfg: dict, master_seed: int) -> Dataset:
    """Apply configured swap/gaussian noise to the training inputs."""
    out = dataset
    if cfg.get("gauss_rho", 0.0) > 0:
        users = apply_gaussian_noise(out.users, cfg["gauss_rho"], derive_seed(master_seed, "gauss"))
        out = dataclasses.replace(out, users=users)
    if cfg.get("swap_rho", 0.0) > 0:
        matching = apply_swap_noise(out.matching, cfg["swap_rho"], derive_seed(master_seed, "swap"))
        out = dataclasses.replace(out, matching=matching)
    return out


def run_train(bundle_dir, cfg: dict, out_dir, quiet: bool = False) -> Path:
    dataset = load_dataset(bundle_dir)
    if "alpha" in cfg and abs(cfg["alpha"] - dataset.alpha) > 1e-12:
        _info(quiet, f"warning: config alpha {cfg['alpha']} differs from "
                     f"bundle alpha {dataset.alpha}; using config value")
    train_cfg = train_config_from(cfg)
    master_seed = cfg.get("seed", train_cfg.seed)
    training_data = _noisy_dataset(dataset, cfg, master_seed)
    result = train(training_data, train_cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_history(result.history, out / "history.csv")
    write_matrix_csv(out / "items_learned.csv", result.items)
    if result.users is not None:
        write_matrix_csv(out / "users_learned.csv", result.users)
    if result.history:
        last = result.history[-1]
        _info(quiet, f"trained {len(result.history)} epochs: "
                     f"loss {last.loss:.4f}, F1 {last.f1_micro:.4f}")
    else:
        _info(quiet, "trained 0 epochs: wrote initialization")
    return out


def run_evaluate(bundle_dir, learned_dir, cfg: dict, out_dir, quiet: bool = False) -> Path:
    dataset = load_dataset(bundle_dir)
    learned = Path(learned_dir)
    items_path = learned / "items_learned.csv"
    if not items_path.exists():
        raise FileNotFoundError(f"missing learned embeddings: {items_path}")
    items_hat = read_matrix_csv(items_path, expect_cols=dataset.dim)
    users_eval = None
    users_path = learned / "users_learned.csv"
    if users_path.exists():
        users_eval = read_matrix_csv(users_path, expect_cols=dataset.dim)
    params = AffinityParams(alpha=cfg.get("alpha", dataset.alpha),
                            epsilon=cfg.get("epsilon", 0.1))
    report = evaluate(dataset, items_hat, params, users_eval=users_eval)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_eval_report(report, out / "eval.json")
    _info(quiet, f"evaluation: F1 micro {report.f1_micro:.4f}, "
                 f"macro {report.f1_macro:.4f}")
    return out


def _sweep_points(cfg: dict) -> list[tuple[str, float]]:
    points = []
    for param, key in (
        ("epsilon", "epsilon_values"),
        ("gauss_rho", "gauss_rho_values"),
        ("swap_rho", "swap_rho_values"),
    ):
        points.extend((param, float(v)) for v in cfg.get(key, []))
    if not points:
        raise ConfigError(
            "sweep needs a non-empty grid: set epsilon_values, "
            "gauss_rho_values or swap_rho_values"
        )
    if cfg.get("repeats", 1) < 1:
        raise ConfigError("repeats must be at least 1")
    return points


def run_sweep_point(dataset: Dataset, cfg: dict, param: str, grid_index: int,
                    value: float, repeat: int, master_seed: int) -> SweepRow:
    """Train and evaluate one (grid point, repeat) cell; errors become a row."""
    run_seed = derive_seed(master_seed, param, grid_index, repeat)
    try:
        noise_seed = derive_seed(master_seed, param, grid_index, repeat, "noise")
        training_data = dataset
        users_eval = None
        epsilon = cfg.get("epsilon", 0.1)
        if param == "epsilon":
            epsilon = value
        elif param == "gauss_rho":
            if value > 0:
                users = apply_gaussian_noise(dataset.users, value, noise_seed)
                training_data = dataclasses.replace(dataset, users=users)
                users_eval = users
        elif param == "swap_rho":
            if value > 0:
                matching = apply_swap_noise(dataset.matching, value, noise_seed)
                training_data = dataclasses.replace(dataset, matching=matching)
        else:
            raise ValueError(f"unknown sweep parameter {param!r}")
        train_cfg = train_config_from(cfg, epsilon=epsilon, seed=run_seed)
        result = train(training_data, train_cfg)
        if result.users is not None:
            users_eval = result.users
        # score against the original (uncorrupted) matching
        report = evaluate(
            dataset,
            result.items,
            AffinityParams(alpha=train_cfg.alpha, epsilon=epsilon),
            users_eval=users_eval,
        )
        final_loss = result.history[-1].loss if result.history else math.nan
        dist = report.mean_embed_dist if report.mean_embed_dist is not None else math.nan
        return SweepRow(
            grid_param=param, grid_value=value, repeat=repeat, seed=run_seed,
            final_loss=final_loss, final_f1_micro=report.f1_micro,
            final_f1_macro=report.f1_macro, final_mean_embed_dist=dist,
        )
    except Exception as exc:
        return SweepRow(
            grid_param=param, grid_value=value, repeat=repeat, seed=run_seed,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_sweep(bundle_dir, cfg: dict, out_dir, jobs: int = 1,
              quiet: bool = False) -> tuple[list[SweepRow], int]:
    dataset = load_dataset(bundle_dir)
    points = _sweep_points(cfg)
    repeats = cfg.get("repeats", 1)
    master_seed = cfg.get("seed", 0)
    tasks = [
        (dataset, cfg, param, gi, value, rep, master_seed)
        for gi, (param, value) in enumerate(points)
        for rep in range(repeats)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_worker, tasks))
    else:
        rows = [run_sweep_point(*task) for task in tasks]
    rows.sort(key=lambda r: (r.grid_param, r.grid_value, r.repeat))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_sweep(rows, out / "sweep.csv")
    failures = sum(1 for r in rows if r.error)
    _info(quiet, f"sweep: {len(rows)} runs, {failures} failed; wrote {out / 'sweep.csv'}")
    return rows, failures


def _sweep_worker(task) -> SweepRow:
    return run_sweep_point(*task)


def run_plot(results_dir, out_dir, quiet: bool = False) -> list[Path]:
    results = Path(results_dir)
    out = Path(out_dir)
    written = []
    history_path = results / "history.csv"
    sweep_path = results / "sweep.csv"
    if not history_path.exists() and not sweep_path.exists():
        raise ConfigError(f"nothing to plot: no history.csv or sweep.csv in {results}")
    out.mkdir(parents=True, exist_ok=True)
    if history_path.exists():
        svg = render_training_chart(load_history(history_path))
        target = out / "training.svg"
        target.write_text(svg)
        written.append(target)
    if sweep_path.exists():
        svg = render_sweep_chart(load_sweep(sweep_path))
        target = out / "sweep.svg"
        target.write_text(svg)
        written.append(target)
    _info(quiet, "wrote " + ", ".join(str(p) for p in written))
    return written


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simca",
        description="capacity-constrained matrix factorization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="flat JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("generate", help="write a synthetic dataset bundle")
    add_common(p)

    p = sub.add_parser("train", help="learn item embeddings from a bundle")
    p.add_argument("--bundle", required=True, help="dataset bundle directory")
    add_common(p)

    p = sub.add_parser("evaluate", help="score learned embeddings against a bundle")
    p.add_argument("--bundle", required=True, help="dataset bundle directory")
    p.add_argument("--learned", required=True, help="directory with items_learned.csv")
    add_common(p, config_required=False)

    p = sub.add_parser("sweep", help="train across a parameter grid")
    p.add_argument("--bundle", required=True, help="dataset bundle directory")
    p.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    add_common(p)

    p = sub.add_parser("plot", help="render SVG charts from results CSVs")
    p.add_argument("--results", required=True, help="directory with history.csv or sweep.csv")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            run_plot(args.results, args.out, quiet=args.quiet)
            return 0
        cfg = dict(_DEFAULTS) if getattr(args, "config", None) is None else load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.command == "generate":
            run_generate(cfg, args.out, quiet=args.quiet)
        elif args.command == "train":
            run_train(args.bundle, cfg, args.out, quiet=args.quiet)
        elif args.command == "evaluate":
            run_evaluate(args.bundle, args.learned, cfg, args.out, quiet=args.quiet)
        elif args.command == "sweep":
            _, failures = run_sweep(args.bundle, cfg, args.out, jobs=args.jobs, quiet=args.quiet)
            if failures:
                print(f"error: {failures} sweep run(s) failed; see the error column",
                      file=sys.stderr)
                return 3
        return 0
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
