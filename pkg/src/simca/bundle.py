"""On-disk formats: dataset bundles, training history, sweep results.

A dataset bundle is a directory holding ``meta.json`` (sizes, alpha, seed,
capacities, generator settings), headerless CSV matrices (``users.csv``,
``distances.csv``, optional ``items_truth.csv``) and ``matching.csv`` with
one ``user,item`` row per user. Reals are written with 17 significant digits
so a reload reproduces the float64 values bit for bit.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datagen import GenConfig
from .metrics import EvalReport
from .model import Dataset
from .training import EpochRecord

HISTORY_HEADER = ["epoch", "loss", "f1_micro", "f1_macro", "mean_embed_dist", "grad_norm"]
SWEEP_HEADER = [
    "grid_param", "grid_value", "repeat", "seed",
    "final_loss", "final_f1_micro", "final_f1_macro", "final_mean_embed_dist", "error",
]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_matrix_csv(path: Path, values: np.ndarray) -> None:
    arr = np.atleast_2d(np.asarray(values, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        for row in arr:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_matrix_csv(path: Path, expect_cols: int | None = None) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if expect_cols is not None and len(parts) != expect_cols:
                raise ValueError(
                    f"{path}, line {lineno}: expected {expect_cols} columns, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ValueError(f"{path}, line {lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows with widths {sorted(widths)}")
    return np.asarray(rows, dtype=np.float64)


def save_dataset(dataset: Dataset, out_dir, gen_config: GenConfig | None = None) -> Path:
    """Write a dataset bundle; returns the bundle directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "n": dataset.n_users,
        "m": dataset.n_items,
        "d": dataset.dim,
        "alpha": dataset.alpha,
        "seed": dataset.seed,
        "capacities": [int(c) for c in dataset.capacities],
        "has_items_truth": dataset.items_truth is not None,
    }
    if gen_config is not None:
        meta["k"] = gen_config.k
        meta["cluster_spread"] = gen_config.cluster_spread
        meta["dirichlet_conc"] = gen_config.dirichlet_conc
        meta["extra_spots_per_item"] = gen_config.extra_spots_per_item
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_matrix_csv(out / "users.csv", dataset.users)
    write_matrix_csv(out / "distances.csv", dataset.distances)
    if dataset.items_truth is not None:
        write_matrix_csv(out / "items_truth.csv", dataset.items_truth)
    with open(out / "matching.csv", "w", newline="") as fh:
        for i, j in enumerate(dataset.matching):
            fh.write(f"{i},{int(j)}\n")
    return out


def load_dataset(bundle_dir) -> Dataset:
    """Read a dataset bundle back, validating the schema."""
    bundle = Path(bundle_dir)
    meta_path = bundle / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"not a dataset bundle: {meta_path} missing")
    with open(meta_path) as fh:
        meta = json.load(fh)
    for key in ("n", "m", "d", "alpha", "seed", "capacities"):
        if key not in meta:
            raise ValueError(f"{meta_path}: missing key {key!r}")
    n, m, d = int(meta["n"]), int(meta["m"]), int(meta["d"])
    users = read_matrix_csv(bundle / "users.csv", expect_cols=d)
    if users.shape[0] != n:
        raise ValueError(f"{bundle / 'users.csv'}: expected {n} rows, got {users.shape[0]}")
    distances = read_matrix_csv(bundle / "distances.csv", expect_cols=m)
    if distances.shape[0] != n:
        raise ValueError(
            f"{bundle / 'distances.csv'}: expected {n} rows, got {distances.shape[0]}"
        )
    items_truth = None
    truth_path = bundle / "items_truth.csv"
    if truth_path.exists():
        items_truth = read_matrix_csv(truth_path, expect_cols=d)
        if items_truth.shape[0] != m:
            raise ValueError(f"{truth_path}: expected {m} rows, got {items_truth.shape[0]}")
    matching = np.empty(n, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    match_path = bundle / "matching.csv"
    with open(match_path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{match_path}, line {lineno}: expected 'user,item'")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{match_path}, line {lineno}: non-integer entry") from None
            if not 0 <= i < n:
                raise ValueError(f"{match_path}, line {lineno}: user index {i} out of range")
            if seen[i]:
                raise ValueError(f"{match_path}, line {lineno}: duplicate user {i}")
            seen[i] = True
            matching[i] = j
    if not seen.all():
        raise ValueError(f"{match_path}: {int((~seen).sum())} users have no assignment")
    return Dataset(
        users=users,
        items_truth=items_truth,
        distances=distances,
        capacities=np.asarray(meta["capacities"], dtype=np.int64),
        matching=matching,
        alpha=float(meta["alpha"]),
        seed=int(meta["seed"]),
    )


def gen_config_from_meta(bundle_dir) -> GenConfig | None:
    """Recover the generator settings stored in a bundle, if present."""
    with open(Path(bundle_dir) / "meta.json") as fh:
        meta = json.load(fh)
    if "k" not in meta:
        return None
    return GenConfig(
        n=int(meta["n"]),
        m=int(meta["m"]),
        d=int(meta["d"]),
        k=int(meta["k"]),
        alpha=float(meta["alpha"]),
        cluster_spread=float(meta["cluster_spread"]),
        dirichlet_conc=float(meta["dirichlet_conc"]),
        extra_spots_per_item=int(meta["extra_spots_per_item"]),
        seed=int(meta["seed"]),
    )


def save_history(history: list[EpochRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for rec in history:
            writer.writerow([
                rec.epoch, _fmt(rec.loss), _fmt(rec.f1_micro), _fmt(rec.f1_macro),
                _fmt(rec.mean_embed_dist), _fmt(rec.grad_norm),
            ])


def load_history(path) -> list[EpochRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HISTORY_HEADER:
            raise ValueError(f"{path}, line 1: bad header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HISTORY_HEADER):
                raise ValueError(f"{path}, line {lineno}: expected {len(HISTORY_HEADER)} fields")
            try:
                records.append(EpochRecord(
                    epoch=int(row[0]),
                    loss=float(row[1]),
                    f1_micro=float(row[2]),
                    f1_macro=float(row[3]),
                    mean_embed_dist=float(row[4]),
                    grad_norm=float(row[5]),
                ))
            except ValueError:
                raise ValueError(f"{path}, line {lineno}: malformed record") from None
    return records


@dataclass(frozen=True)
class SweepRow:
    grid_param: str
    grid_value: float
    repeat: int
    seed: int
    final_loss: float = math.nan
    final_f1_micro: float = math.nan
    final_f1_macro: float = math.nan
    final_mean_embed_dist: float = math.nan
    error: str = ""


def save_sweep(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for r in rows:
            writer.writerow([
                r.grid_param, _fmt(r.grid_value), r.repeat, r.seed,
                _fmt(r.final_loss), _fmt(r.final_f1_micro), _fmt(r.final_f1_macro),
                _fmt(r.final_mean_embed_dist), r.error,
            ])


def load_sweep(path) -> list[SweepRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SWEEP_HEADER:
            raise ValueError(f"{path}, line 1: bad header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SWEEP_HEADER):
                raise ValueError(f"{path}, line {lineno}: expected {len(SWEEP_HEADER)} fields")
            try:
                rows.append(SweepRow(
                    grid_param=row[0],
                    grid_value=float(row[1]),
                    repeat=int(row[2]),
                    seed=int(row[3]),
                    final_loss=float(row[4]),
                    final_f1_micro=float(row[5]),
                    final_f1_macro=float(row[6]),
                    final_mean_embed_dist=float(row[7]),
                    error=row[8],
                ))
            except ValueError:
                raise ValueError(f"{path}, line {lineno}: malformed record") from None
    return rows


def save_eval_report(report: EvalReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
