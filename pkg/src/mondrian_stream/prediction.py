"""Tree and forest scoring.

For a query ``x`` sorted down one tree, each node ``j`` on the path gets

    eta_j  = L1 distance from x to the node box
    p_j    = 1 - exp(-delta_j * eta_j),   delta_j = min(tau_j, budget) - tau_parent
    P_j    = prod over strict ancestors g of (1 - p_g)

and contributes ``P_j * p_j * G_j`` (internal node) or ``P_j * (1 - p_j) * G_j``
(leaf). ``G_j`` is the smoothed label distribution of the node: with counts
``c``, tables ``t = min(c, 1)`` and discount ``d``

    G_j[k] = (c[k] - d * t[k] + d * sum(t) * G_parent[k]) / sum(c)

and ``G_j = G_parent`` for an empty node. The virtual parent of the root holds
``base_count`` pseudo-counts on every label, i.e. the uniform distribution.

Scoring never writes to the arena.
"""

import math

import numba
import numpy as np


class EmptyTreeError(ValueError):
    pass


@numba.njit(cache=True, inline="always")
def distance_to_box(arena, node, x):
    eta = 0.0
    for d in range(x.shape[0]):
        above = x[d] - arena.upper[node, d]
        below = arena.lower[node, d] - x[d]
        if above > 0.0:
            eta += above
        if below > 0.0:
            eta += below
    return eta


@numba.njit(cache=True, inline="always")
def branch_probability(delta, eta):
    if eta <= 0.0:
        return 0.0
    if math.isinf(delta):
        return 1.0
    return -math.expm1(-delta * eta)


@numba.njit(cache=True)
def prior_distribution(label_count, base_count):
    prior = np.empty(label_count)
    if base_count > 0.0:
        prior[:] = base_count / (label_count * base_count)
    else:
        prior[:] = 1.0 / label_count
    return prior


@numba.njit(cache=True, inline="always")
def posterior(counts, parent_g, discount):
    n = counts.shape[0]
    total = 0.0
    tables = 0.0
    for k in range(n):
        total += counts[k]
        if counts[k] > 0:
            tables += 1.0
    if total <= 0.0:
        return parent_g.copy()
    g = np.empty(n)
    for k in range(n):
        t = 1.0 if counts[k] > 0 else 0.0
        g[k] = (counts[k] - discount * t + discount * tables * parent_g[k]) / total
    return g


@numba.njit(cache=True)
def node_distribution(arena, node, discount, base_count):
    """G of ``node``, evaluated from the root down its ancestor chain."""
    depth = 0
    h = node
    while h >= 0:
        depth += 1
        h = arena.parent[h]
    chain = np.empty(depth, np.int64)
    h = node
    for i in range(depth - 1, -1, -1):
        chain[i] = h
        h = arena.parent[h]
    g = prior_distribution(arena.counters.shape[1], base_count)
    for i in range(depth):
        g = posterior(arena.counters[chain[i]], g, discount)
    return g


@numba.njit(cache=True)
def tree_score(arena, root, x, budget, discount, base_count):
    """Unnormalised label scores of one tree for ``x``."""
    n_labels = arena.counters.shape[1]
    scores = np.zeros(n_labels)
    g = prior_distribution(n_labels, base_count)
    not_separated = 1.0
    tau_parent = 0.0
    node = root
    while True:
        g = posterior(arena.counters[node], g, discount)
        eta = distance_to_box(arena, node, x)
        tau = min(arena.split_time[node], budget)
        p = branch_probability(tau - tau_parent, eta)
        if arena.left[node] < 0:
            w = not_separated * (1.0 - p)
            for k in range(n_labels):
                scores[k] += w * g[k]
            return scores
        w = not_separated * p
        for k in range(n_labels):
            scores[k] += w * g[k]
        not_separated *= 1.0 - p
        tau_parent = tau
        if x[arena.split_feature[node]] < arena.split_value[node]:
            node = arena.right[node]
        else:
            node = arena.left[node]


@numba.njit(cache=True)
def forest_scores(arena, roots, x, budget, discount, base_count):
    n_labels = arena.counters.shape[1]
    acc = np.zeros(n_labels)
    n = 0
    for t in range(roots.shape[0]):
        if roots[t] >= 0:
            acc += tree_score(arena, roots[t], x, budget, discount, base_count)
            n += 1
    if n > 0:
        acc /= n
    return acc, n


def forest_predict(forest, x) -> tuple[int, np.ndarray]:
    """Mean tree score and its argmax (lowest label wins ties)."""
    x = forest._check_features(x)
    cfg = forest.config
    scores, n = forest_scores(
        forest.arena, forest.roots, x, cfg.budget, cfg.discount_factor, cfg.base_count
    )
    if n == 0:
        raise EmptyTreeError("cannot predict with an untrained forest")
    return int(np.argmax(scores)), scores


def node_predictive_distribution(forest, node: int) -> np.ndarray:
    cfg = forest.config
    return node_distribution(forest.arena, node, cfg.discount_factor, cfg.base_count)


def tree_predict_scores(forest, tree: int, x) -> np.ndarray:
    x = forest._check_features(x)
    root = forest.roots[tree]
    if root < 0:
        raise EmptyTreeError(f"tree {tree} is empty")
    cfg = forest.config
    return tree_score(forest.arena, root, x, cfg.budget, cfg.discount_factor, cfg.base_count)
