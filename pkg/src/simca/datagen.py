"""Synthetic benchmark generation.

Latent features come from a Gaussian mixture projected onto the unit sphere,
with every cluster owning at least one item. Geographic positions are drawn
uniformly on a circle; the user-item distance matrix is the arc length
between positions, normalized by its grand mean. Capacities are Dirichlet
proportions of the user count, rounded by largest remainder, plus a fixed
number of extra spots per item. The ground-truth matching is the exact LAP
optimum of the resulting affinity matrix.

All draws come from one seeded generator per operation in a fixed order, so
a seed pins the dataset bytes exactly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .assignment import solve_lap
from .model import Dataset, compute_affinity


@dataclass(frozen=True)
class GenConfig:
    n: int = 1000
    m: int = 3
    d: int = 2
    k: int = 3
    alpha: float = 0.3
    cluster_spread: float = 0.3
    dirichlet_conc: float = 1.0
    extra_spots_per_item: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.k <= self.m:
            raise ValueError("need m >= k >= 1")
        if self.m > self.n:
            raise ValueError("need m <= n")
        if self.d < 1:
            raise ValueError("need d >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.cluster_spread <= 0:
            raise ValueError("cluster_spread must be positive")
        if self.dirichlet_conc <= 0:
            raise ValueError("dirichlet_conc must be positive")
        if self.extra_spots_per_item < 0:
            raise ValueError("extra_spots_per_item must be nonnegative")


def _capacities_from_rng(
    rng: np.random.Generator,
    n: int,
    m: int,
    conc: float,
    extra: int,
    proportions=None,
) -> np.ndarray:
    if proportions is None:
        proportions = rng.dirichlet(conc * np.ones(m))
    else:
        proportions = np.asarray(proportions, dtype=np.float64)
        if len(proportions) != m or abs(proportions.sum() - 1.0) > 1e-9:
            raise ValueError("proportions must be a length-m probability vector")
    targets = proportions * n
    base = np.floor(targets).astype(np.int64)
    remainders = targets - base
    deficit = n - int(base.sum())
    order = np.argsort(-remainders, kind="stable")
    base[order[:deficit]] += 1
    if extra == 0:
        # keep every item usable: a zero capacity would break the transport step
        if n < m:
            raise ValueError("need n >= m when no extra spots are added")
        while np.any(base == 0):
            base[int(np.argmax(base == 0))] += 1
            base[int(np.argmax(base))] -= 1
    return base + extra


def sample_capacities(n: int, m: int, conc: float, extra: int, seed: int, proportions=None) -> np.ndarray:
    """Dirichlet proportions of n, largest-remainder rounded to sum n, plus
    ``extra`` spots per item. ``proportions`` overrides the draw (test hook)."""
    if m < 1:
        raise ValueError("need at least one item")
    rng = np.random.default_rng(seed)
    return _capacities_from_rng(rng, n, m, conc, extra, proportions)


def generate_dataset(cfg: GenConfig) -> Dataset:
    """Draw a full synthetic instance and its exact optimal matching."""
    rng = np.random.default_rng(cfg.seed)
    n, m, d, k = cfg.n, cfg.m, cfg.d, cfg.k

    centers = rng.normal(size=(k, d))
    user_clusters = rng.integers(0, k, size=n)
    users = centers[user_clusters] + cfg.cluster_spread * rng.normal(size=(n, d))
    # first k items anchor the clusters, the rest spread uniformly
    item_clusters = np.concatenate([np.arange(k), rng.integers(0, k, size=m - k)])
    items = centers[item_clusters] + cfg.cluster_spread * rng.normal(size=(m, d))
    users /= np.linalg.norm(users, axis=1, keepdims=True)
    items /= np.linalg.norm(items, axis=1, keepdims=True)

    angles = rng.uniform(0.0, 2.0 * np.pi, size=n + m)
    gap = np.abs(angles[:n, None] - angles[None, n:])
    distances = np.minimum(gap, 2.0 * np.pi - gap)
    distances /= distances.mean()

    caps = _capacities_from_rng(rng, n, m, cfg.dirichlet_conc, cfg.extra_spots_per_item)

    affinity = compute_affinity(users, items, distances, cfg.alpha)
    matching = solve_lap(affinity, caps).matching
    return Dataset(
        users=users,
        items_truth=items,
        distances=distances,
        capacities=caps,
        matching=matching,
        alpha=cfg.alpha,
        seed=cfg.seed,
    )


def apply_swap_noise(assign, rho: float, seed: int) -> np.ndarray:
    """Corrupt a matching by swapping pairs of users holding different items.

    Swapping preserves per-item counts exactly. Each swap marks both users as
    modified, so the modified fraction lands on the even count nearest
    rho * n. Partners are drawn among the not-yet-modified users; if none with
    a different item remains (all users on one item, say), the procedure stops
    early with a warning.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    assign = np.asarray(assign, dtype=np.int64).copy()
    n = len(assign)
    rng = np.random.default_rng(seed)
    target = int(round(rho * n / 2.0)) * 2
    modified = np.zeros(n, dtype=bool)
    while int(modified.sum()) < target:
        unmodified = np.flatnonzero(~modified)
        u = int(rng.choice(unmodified))
        partners = unmodified[assign[unmodified] != assign[u]]
        if len(partners) == 0:
            warnings.warn(
                f"swap noise stopped at {int(modified.sum())}/{target} modified users: "
                "no partner with a different item remains"
            )
            break
        v = int(rng.choice(partners))
        assign[u], assign[v] = assign[v], assign[u]
        modified[u] = modified[v] = True
    return assign


def apply_gaussian_noise(embeddings, rho: float, seed: int) -> np.ndarray:
    """Blend embeddings with fresh standard normal noise:
    sqrt(1 - rho^2) * X + rho * Z. Rows are not re-normalized."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    arr = np.asarray(embeddings, dtype=np.float64)
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=arr.shape)
    return np.sqrt(1.0 - rho**2) * arr + rho * noise
