"""Entropy-regularized optimal transport via Sinkhorn-Knopp scaling.

Maximizes  Tr(pi^T M) + epsilon * H(pi)  over couplings with prescribed row
masses (one unit per user) and column masses (item capacities), where
H(pi) = -sum pi_ij (log pi_ij - 1). The optimum factors as

    pi[i, j] = exp(log_a[i] + M[i, j] / epsilon + log_b[j])

and is found by alternating row/column scalings. Everything runs in the log
domain with log-sum-exp reductions; the plain multiplicative form overflows
for small epsilon.

When total capacity exceeds the number of users, the instance is extended
with one virtual user row of zero affinity carrying the surplus mass, which
restores equality marginals without perturbing gradients in the item
embeddings.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import as_matrix


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    amax = np.max(a, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a - amax), axis=axis)) + np.squeeze(amax, axis=axis)
    return out


@dataclass(frozen=True)
class OtInstance:
    """Balanced transport instance, possibly extended with a slack row.

    ``n_users`` counts the real users; when ``affinity`` has one extra row it
    is the virtual user absorbing the unused capacity.
    """

    affinity: np.ndarray
    row_masses: np.ndarray
    col_masses: np.ndarray
    epsilon: float
    n_users: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if abs(self.row_masses.sum() - self.col_masses.sum()) > 1e-9:
            raise ValueError("row and column masses must balance")

    @property
    def has_slack(self) -> bool:
        return self.affinity.shape[0] == self.n_users + 1


def extend_with_slack(affinity, caps, epsilon: float) -> OtInstance:
    """Build a balanced instance; appends a zero-affinity virtual user when
    total capacity exceeds the number of users."""
    M = as_matrix(affinity, "affinity")
    caps = np.asarray(caps, dtype=np.int64)
    n, m = M.shape
    total = int(caps.sum())
    if total < n:
        raise ValueError(f"infeasible: total capacity {total} < {n} users")
    if total == n:
        rows = np.ones(n)
    else:
        M = np.vstack([M, np.zeros((1, m))])
        rows = np.concatenate([np.ones(n), [float(total - n)]])
    return OtInstance(
        affinity=M,
        row_masses=rows,
        col_masses=caps.astype(np.float64),
        epsilon=float(epsilon),
        n_users=n,
    )


@dataclass(frozen=True)
class SinkhornResult:
    """Converged (or truncated) scaling state.

    ``coupling`` includes the virtual slack row when the instance carries one;
    ``user_coupling`` strips it. The product form
    coupling = exp(log_a[:, None] + M / epsilon + log_b[None, :]) holds exactly
    by construction.
    """

    coupling: np.ndarray
    log_a: np.ndarray
    log_b: np.ndarray
    iterations: int
    marginal_error: float
    converged: bool
    n_users: int

    @property
    def user_coupling(self) -> np.ndarray:
        return self.coupling[: self.n_users]


def solve_ot(
    inst: OtInstance,
    iterations: int | None = None,
    tol: float | None = None,
    max_iterations: int = 10_000,
    log_b_init: np.ndarray | None = None,
) -> SinkhornResult:
    """Run Sinkhorn scaling on ``inst``.

    Exactly one stopping mode applies: a fixed number of ``iterations``
    (training mode), or a marginal ``tol`` with an iteration cap
    (analysis mode). One iteration is a row update followed by a column
    update. ``log_b_init`` warm-starts the column scalings (defaults to
    zeros). Under tolerance mode a run that exhausts ``max_iterations``
    returns with ``converged=False`` rather than raising.
    """
    if (iterations is None) == (tol is None):
        raise ValueError("specify exactly one of iterations or tol")
    log_k = inst.affinity / inst.epsilon
    log_r = np.log(inst.row_masses)
    log_c = np.log(inst.col_masses)
    log_b = np.zeros(inst.affinity.shape[1]) if log_b_init is None else log_b_init.copy()
    log_a = log_r - _logsumexp(log_k + log_b[None, :], axis=1)

    def coupling() -> np.ndarray:
        return np.exp(log_a[:, None] + log_k + log_b[None, :])

    def marginal_error(pi: np.ndarray) -> float:
        row_err = np.max(np.abs(pi.sum(axis=1) - inst.row_masses))
        col_err = np.max(np.abs(pi.sum(axis=0) - inst.col_masses))
        return float(max(row_err, col_err))

    limit = iterations if tol is None else max_iterations
    done = 0
    converged = tol is None
    for it in range(1, limit + 1):
        log_a = log_r - _logsumexp(log_k + log_b[None, :], axis=1)
        log_b = log_c - _logsumexp(log_a[:, None] + log_k, axis=0)
        done = it
        if tol is not None and marginal_error(coupling()) <= tol:
            converged = True
            break

    pi = coupling()
    return SinkhornResult(
        coupling=pi,
        log_a=log_a,
        log_b=log_b,
        iterations=done,
        marginal_error=marginal_error(pi),
        converged=converged,
        n_users=inst.n_users,
    )


def entropy(pi) -> float:
    """H(pi) = -sum pi_ij (log pi_ij - 1).

    Entries below 1e-300 (including exact zeros produced by underflow)
    contribute 0, the limit of x (log x - 1); negative entries are a domain
    error.
    """
    arr = np.asarray(pi, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("entropy requires a nonnegative coupling")
    tiny = arr < 1e-300
    safe = np.where(tiny, 1.0, arr)
    terms = np.where(tiny, 0.0, safe * (np.log(safe) - 1.0))
    return float(-terms.sum())


def ot_value(affinity, pi, epsilon: float) -> float:
    """Objective value Tr(pi^T M) + epsilon * H(pi)."""
    M = as_matrix(affinity, "affinity")
    arr = np.asarray(pi, dtype=np.float64)
    if arr.shape != M.shape:
        raise ValueError(f"coupling shape {arr.shape} does not match affinity {M.shape}")
    return float(np.sum(arr * M)) + epsilon * entropy(arr)
