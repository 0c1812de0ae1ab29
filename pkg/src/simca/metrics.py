"""Evaluation of learned embeddings against an observed allocation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import round_coupling
from .model import AffinityParams, Dataset, as_matrix, compute_affinity
from .sinkhorn import extend_with_slack, solve_ot


def f1_scores(truth, pred, m: int) -> tuple[float, float, np.ndarray]:
    """Per-item F1 from the m-class confusion counts.

    Returns (micro, macro, per_item). Micro-averaged F1 reduces to plain
    accuracy for single-label assignments; macro is the unweighted mean of
    per-item scores, where an item with no true and no predicted users counts
    as a perfect 1.
    """
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ValueError(f"matchings differ in length: {truth.shape} vs {pred.shape}")
    per_item = np.empty(m)
    for j in range(m):
        tp = int(np.sum((truth == j) & (pred == j)))
        fp = int(np.sum((truth != j) & (pred == j)))
        fn = int(np.sum((truth == j) & (pred != j)))
        if tp == 0 and fp == 0 and fn == 0:
            per_item[j] = 1.0
        else:
            per_item[j] = 2.0 * tp / (2.0 * tp + fp + fn)
    micro = float(np.mean(truth == pred)) if len(truth) else 1.0
    return micro, float(per_item.mean()), per_item


def mean_embedding_distance(learned, truth) -> float:
    """Mean Euclidean distance between matching rows of two embedding matrices.

    Item identities are fixed by the dataset, so row j is compared to row j;
    no permutation alignment.
    """
    a = as_matrix(learned, "learned")
    b = as_matrix(truth, "truth")
    if a.shape != b.shape:
        raise ValueError(f"embedding shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean(np.linalg.norm(a - b, axis=1)))


@dataclass(frozen=True)
class EvalReport:
    f1_micro: float
    f1_macro: float
    per_item_f1: list[float]
    mean_embed_dist: float | None
    cross_entropy: float

    def to_dict(self) -> dict:
        return {
            "f1_micro": self.f1_micro,
            "f1_macro": self.f1_macro,
            "per_item_f1": self.per_item_f1,
            "mean_embed_dist": self.mean_embed_dist,
            "cross_entropy": self.cross_entropy,
        }


def evaluate(
    dataset: Dataset,
    items_hat,
    params: AffinityParams,
    users_eval=None,
    tol: float = 1e-10,
    max_iterations: int = 10_000,
) -> EvalReport:
    """Score learned item embeddings by re-deriving the allocation.

    Recomputes the affinity matrix with ``users_eval`` (the dataset's users by
    default), solves the regularized transport problem to tolerance, rounds
    the coupling to a hard matching via the LAP, and compares it to the
    dataset's observed matching.
    """
    from .training import cross_entropy_loss  # local import to avoid a cycle

    users = dataset.users if users_eval is None else as_matrix(users_eval, "users_eval")
    affinity = compute_affinity(users, items_hat, dataset.distances, params.alpha)
    inst = extend_with_slack(affinity, dataset.capacities, params.epsilon)
    result = solve_ot(inst, tol=tol, max_iterations=max_iterations)
    coupling = result.user_coupling
    predicted = round_coupling(coupling, dataset.capacities)
    micro, macro, per_item = f1_scores(dataset.matching, predicted, dataset.n_items)
    dist = None
    if dataset.items_truth is not None:
        dist = mean_embedding_distance(items_hat, dataset.items_truth)
    return EvalReport(
        f1_micro=micro,
        f1_macro=macro,
        per_item_f1=[float(x) for x in per_item],
        mean_embed_dist=dist,
        cross_entropy=cross_entropy_loss(dataset.matching, coupling),
    )
