"""Shared test utilities: instance builders and independent oracles."""
from __future__ import annotations

import numpy as np

from simca.model import compute_affinity
from simca.sinkhorn import extend_with_slack, solve_ot
from simca.training import cross_entropy_loss, matching_with_slack


def random_instance(rng, n, m, d, caps=None, slack=0):
    """Random embeddings, distances and a feasible greedy matching."""
    users = rng.normal(size=(n, d))
    users /= np.linalg.norm(users, axis=1, keepdims=True)
    distances = np.abs(rng.normal(size=(n, m)))
    if caps is None:
        caps = np.full(m, n // m, dtype=np.int64)
        caps[: n % m] += 1
        caps = caps + slack
    else:
        caps = np.asarray(caps, dtype=np.int64)
    affinity = rng.normal(size=(n, m))
    matching = greedy_matching(affinity, caps)
    return users, distances, caps, matching


def greedy_matching(scores, caps):
    """Feasible matching built row by row; not optimal, just valid."""
    caps = np.asarray(caps, dtype=np.int64)
    remaining = caps.copy()
    out = np.empty(scores.shape[0], dtype=np.int64)
    for i in range(scores.shape[0]):
        masked = np.where(remaining > 0, scores[i], -np.inf)
        j = int(np.argmax(masked))
        out[i] = j
        remaining[j] -= 1
    return out


def converged_coupling(affinity, caps, epsilon, tol=1e-12):
    """Tolerance-mode transport solve, returning the full (slack-extended) result."""
    inst = extend_with_slack(affinity, caps, epsilon)
    return solve_ot(inst, tol=tol, max_iterations=200_000)


def slack_extended_loss(users, items, distances, caps, matching, alpha, epsilon, tol=1e-12):
    """Cross entropy including the virtual-row term on slack instances.

    Equals the plain user cross entropy when total capacity matches the user
    count; this is the quantity whose gradient the closed form computes.
    """
    affinity = compute_affinity(users, items, distances, alpha)
    result = converged_coupling(affinity, caps, epsilon, tol=tol)
    pi = result.coupling
    sigma_ext = matching_with_slack(matching, caps)
    if sigma_ext.shape[0] == len(matching):
        return cross_entropy_loss(matching, pi)
    virtual = float(-np.sum(sigma_ext[-1] * np.log(pi[-1])))
    return cross_entropy_loss(matching, pi) + virtual


def projected_gradient_ot(affinity, row_masses, col_masses, epsilon,
                          max_iters=200_000):
    """Independent solver for the entropy-regularized transport problem.

    Maximizes Tr(pi^T M) + eps * H(pi) by gradient ascent with Euclidean
    projection onto the affine marginal constraints (the positivity
    constraints stay inactive at the interior optimum). Small instances only.
    """
    M = np.asarray(affinity, dtype=np.float64)
    r = np.asarray(row_masses, dtype=np.float64)
    c = np.asarray(col_masses, dtype=np.float64)
    n, m = M.shape
    rows = []
    rhs = []
    for i in range(n):
        a = np.zeros((n, m))
        a[i, :] = 1.0
        rows.append(a.ravel())
        rhs.append(r[i])
    for j in range(m - 1):  # last column constraint is redundant
        a = np.zeros((n, m))
        a[:, j] = 1.0
        rows.append(a.ravel())
        rhs.append(c[j])
    A = np.array(rows)
    b = np.array(rhs)
    gram_inv = np.linalg.inv(A @ A.T)

    def project(x):
        return x - A.T @ (gram_inv @ (A @ x - b))

    def objective(x):
        return float(np.sum(x * M.ravel()) - epsilon * np.sum(x * (np.log(x) - 1.0)))

    x = (np.outer(r, c) / r.sum()).ravel()
    fx = objective(x)
    step = 0.05 * epsilon * float(np.min(x))
    for _ in range(max_iters):
        grad = M.ravel() - epsilon * np.log(x)
        x_new = project(x + step * grad)
        if np.any(x_new <= 0):
            step *= 0.5
            continue
        f_new = objective(x_new)
        if f_new < fx - 1e-15:
            step *= 0.5
            continue
        moved = float(np.linalg.norm(x_new - x))
        x, fx = x_new, f_new
        if moved < 1e-14 and abs(f_new - fx) < 1e-16:
            break
    return x.reshape(n, m), fx
