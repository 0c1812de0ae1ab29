"""Domain types and the affinity model.

Users and items live in a shared latent space; their pairwise score combines
the inner product of their embeddings with an exogenous distance penalty:

    M[i, j] = (1 - alpha) * <U_i, V_j> - alpha * D[i, j]

``alpha`` in [0, 1] trades latent affinity against geographic proximity.
Matrices are plain float64 numpy arrays throughout; embedding matrices are
row-major (one row per user or item).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_embeddings(values, normalized: bool = False, name: str = "embeddings") -> np.ndarray:
    """Validate an embedding matrix; with ``normalized`` every row must be unit norm."""
    arr = as_matrix(values, name)
    if normalized:
        norms = np.linalg.norm(arr, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError(f"{name} rows are not unit-normalized")
    return arr


def check_distances(values, mean_normalized: bool = False) -> np.ndarray:
    """Validate a nonnegative distance matrix; optionally require grand mean 1."""
    arr = as_matrix(values, "distances")
    if np.any(arr < 0):
        raise ValueError("distances must be nonnegative")
    if mean_normalized and abs(arr.mean() - 1.0) > 1e-9:
        raise ValueError("distances are not mean-normalized")
    return arr


def check_capacities(caps, n: int | None = None) -> np.ndarray:
    """Validate an integer capacity vector; with ``n`` require total capacity >= n."""
    arr = np.asarray(caps)
    if arr.ndim != 1:
        raise ValueError("capacities must be a vector")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("capacities must be integers")
        arr = arr.astype(np.int64)
    else:
        arr = arr.astype(np.int64)
    if np.any(arr < 1):
        raise ValueError("every capacity must be at least 1")
    if n is not None and int(arr.sum()) < n:
        raise ValueError(f"total capacity {int(arr.sum())} is less than the number of users {n}")
    return arr


def check_matching(assign, caps) -> np.ndarray:
    """Validate a hard assignment vector against item capacities."""
    arr = np.asarray(assign, dtype=np.int64)
    caps = np.asarray(caps, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("matching must be a vector of item indices")
    m = len(caps)
    if np.any(arr < 0) or np.any(arr >= m):
        raise ValueError("matching contains an out-of-range item index")
    counts = np.bincount(arr, minlength=m)
    if np.any(counts > caps):
        bad = int(np.argmax(counts > caps))
        raise ValueError(f"item {bad} receives {counts[bad]} users, capacity is {caps[bad]}")
    return arr


def matching_matrix(assign, m: int) -> np.ndarray:
    """0/1 matrix representation of a hard assignment (n x m)."""
    assign = np.asarray(assign, dtype=np.int64)
    out = np.zeros((len(assign), m))
    out[np.arange(len(assign)), assign] = 1.0
    return out


@dataclass(frozen=True)
class AffinityParams:
    """Trade-off and regularization knobs shared by scoring and transport."""

    alpha: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class Dataset:
    """An observed allocation problem: inputs plus the optimal hard matching.

    ``items_truth`` holds the generating item embeddings when known (synthetic
    data); real observations carry None.
    """

    users: np.ndarray
    distances: np.ndarray
    capacities: np.ndarray
    matching: np.ndarray
    alpha: float
    seed: int
    items_truth: np.ndarray | None = None

    def __post_init__(self):
        users = check_embeddings(self.users, name="users")
        distances = check_distances(self.distances)
        caps = check_capacities(self.capacities, n=users.shape[0])
        matching = check_matching(self.matching, caps)
        n, m = distances.shape
        if users.shape[0] != n:
            raise ValueError(f"users has {users.shape[0]} rows, distances has {n}")
        if len(caps) != m:
            raise ValueError(f"capacities has {len(caps)} items, distances has {m}")
        if len(matching) != n:
            raise ValueError(f"matching has {len(matching)} entries, expected {n}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "distances", distances)
        object.__setattr__(self, "capacities", caps)
        object.__setattr__(self, "matching", matching)
        if self.items_truth is not None:
            truth = check_embeddings(self.items_truth, name="items_truth")
            if truth.shape != (m, users.shape[1]):
                raise ValueError(
                    f"items_truth shape {truth.shape} does not match ({m}, {users.shape[1]})"
                )
            object.__setattr__(self, "items_truth", truth)

    @property
    def n_users(self) -> int:
        return self.users.shape[0]

    @property
    def n_items(self) -> int:
        return self.distances.shape[1]

    @property
    def dim(self) -> int:
        return self.users.shape[1]


def compute_affinity(users, items, distances, alpha: float) -> np.ndarray:
    """Affinity matrix (1 - alpha) * U V^T - alpha * D, shape (n, m)."""
    U = as_matrix(users, "users")
    V = as_matrix(items, "items")
    D = as_matrix(distances, "distances")
    if U.shape[1] != V.shape[1]:
        raise ValueError(f"embedding dims differ: users {U.shape[1]}, items {V.shape[1]}")
    if D.shape != (U.shape[0], V.shape[0]):
        raise ValueError(
            f"distances shape {D.shape} does not match ({U.shape[0]}, {V.shape[0]})"
        )
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return (1.0 - alpha) * (U @ V.T) - alpha * D


def affinity_grad_item(users, i: int, alpha: float) -> np.ndarray:
    """Gradient of M[i, j] in the item embedding V_j: (1 - alpha) * U_i for any j."""
    U = as_matrix(users, "users")
    if not 0 <= i < U.shape[0]:
        raise IndexError(f"user index {i} out of range [0, {U.shape[0]})")
    return (1.0 - alpha) * U[i]


def affinity_grad_user(items, j: int, alpha: float) -> np.ndarray:
    """Gradient of M[i, j] in the user embedding U_i: (1 - alpha) * V_j for any i."""
    V = as_matrix(items, "items")
    if not 0 <= j < V.shape[0]:
        raise IndexError(f"item index {j} out of range [0, {V.shape[0]})")
    return (1.0 - alpha) * V[j]


def check_affinity_linearity(affinity_fn, n=5, m=2, d=3, alpha=0.37,
                             rng=None, tol=1e-9) -> bool:
    """Probe whether an affinity implementation is affine in the item matrix.

    Both the closed-form training gradient and the convexity of the loss rely
    on the score being linear in each item embedding; a plug-in replacement
    for :func:`compute_affinity` can be validated here before use. Samples
    random inputs and checks the affine identity
    fn(aV1 + bV2) - fn(0) = a (fn(V1) - fn(0)) + b (fn(V2) - fn(0)).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    users = rng.normal(size=(n, d))
    distances = np.abs(rng.normal(size=(n, m)))
    offset = affinity_fn(users, np.zeros((m, d)), distances, alpha)
    for _ in range(5):
        v1 = rng.normal(size=(m, d))
        v2 = rng.normal(size=(m, d))
        a, b = rng.normal(size=2)
        lhs = affinity_fn(users, a * v1 + b * v2, distances, alpha) - offset
        rhs = a * (affinity_fn(users, v1, distances, alpha) - offset) + b * (
            affinity_fn(users, v2, distances, alpha) - offset
        )
        if np.max(np.abs(lhs - rhs)) > tol * max(1.0, np.max(np.abs(rhs))):
            return False
    return True
