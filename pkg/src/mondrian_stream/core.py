"""Memory-bounded Mondrian forest: training descent and branch-out.

Each tree is trained by walking the point from the root towards a leaf. At
every node the point's distance to the node box drives an exponential clock
``E ~ Exp(rate=eta)``; when ``tau_parent + E`` falls before the node's own split
time (the budget for leaves) the point branches out: a new parent is inserted
above the node with a fresh leaf for the point as its sibling. Branch-out only
happens with two free records in the arena. Otherwise the configured
out-of-memory strategy decides how the node's box and counters absorb the point.

Descent convention: ``x[split_feature] < split_value`` goes to the *right*
child, everything else to the left.

RNG draw order, per visited node with positive distance: one exponential
(rate ``eta``). On branch-out: one uniform picking the split feature
(proportional to the box violation), then one uniform for the split value.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numba
import numpy as np

from . import adaptation as ad
from .arena import NodeArena, NodeRecord, allocate, create_arena, parent_time, read_record
from .config import BudgetTooSmallError, ForestConfig, node_size_bytes
from .prediction import distance_to_box, forest_predict
from .rng import exponential, make_state, uniform
from .strategies import (
    PARTIAL_UPDATE,
    STOPPED,
    commit_path_boxes,
    descent_blocked,
    update_box,
    update_counters,
)


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledPoint:
    features: np.ndarray
    label: int


@numba.njit(cache=True, inline="always")
def sample_branch(arena, node, x, budget, rng):
    """Run the branch clock at ``node``.

    Returns ``(branch, split_time)``; ``split_time`` is the would-be time of
    the new parent. Never branches, and draws nothing, when ``x`` is inside the box.
    """
    eta = distance_to_box(arena, node, x)
    if eta <= 0.0:
        return False, 0.0
    t_parent = parent_time(arena, node)
    t_node = min(arena.split_time[node], budget)
    t_new = t_parent + exponential(rng, eta)
    return t_new < t_node, t_new


@numba.njit(cache=True)
def new_leaf(arena, tree, x, label, budget):
    h = allocate(arena, tree)
    if h < 0:
        return -1
    arena.lower[h, :] = x
    arena.upper[h, :] = x
    arena.prev_lower[h, :] = x
    arena.prev_upper[h, :] = x
    arena.counters[h, label] = 1
    arena.split_time[h] = budget
    return h


@numba.njit(cache=True)
def extend_tree(arena, roots, tree, node, x, label, split_time, budget, rng):
    """Insert a new parent above ``node`` and a leaf holding ``x`` as its sibling.

    Returns the new leaf. ``node`` and its subtree are left untouched.
    """
    if arena.free_top[0] < 2:
        raise RuntimeError("extend_tree: fewer than two free records")
    f = x.shape[0]
    total = 0.0
    for d in range(f):
        total += max(x[d] - arena.upper[node, d], 0.0) + max(arena.lower[node, d] - x[d], 0.0)
    target = uniform(rng) * total
    feature = -1
    acc = 0.0
    for d in range(f):
        w = max(x[d] - arena.upper[node, d], 0.0) + max(arena.lower[node, d] - x[d], 0.0)
        if w > 0.0:
            feature = d
            acc += w
            if target < acc:
                break
    if x[feature] > arena.upper[node, feature]:
        lo = arena.upper[node, feature]
        hi = x[feature]
    else:
        lo = x[feature]
        hi = arena.lower[node, feature]
    value = lo + (hi - lo) * uniform(rng)

    old_parent = arena.parent[node]
    p = allocate(arena, tree)
    s = new_leaf(arena, tree, x, label, budget)

    arena.parent[p] = old_parent
    arena.split_feature[p] = feature
    arena.split_value[p] = value
    arena.split_time[p] = split_time
    for d in range(f):
        arena.lower[p, d] = min(arena.lower[node, d], x[d])
        arena.upper[p, d] = max(arena.upper[node, d], x[d])
    arena.prev_lower[p, :] = arena.lower[p, :]
    arena.prev_upper[p, :] = arena.upper[p, :]
    arena.counters[p, :] = arena.counters[node, :]
    arena.counters[p, label] += 1

    if x[feature] < value:
        arena.right[p] = s
        arena.left[p] = node
    else:
        arena.left[p] = s
        arena.right[p] = node
    arena.parent[s] = p
    arena.parent[node] = p
    if old_parent < 0:
        roots[tree] = p
    elif arena.left[old_parent] == node:
        arena.left[old_parent] = p
    else:
        arena.right[old_parent] = p
    return s


@numba.njit(cache=True)
def train_tree(arena, roots, tree, x, label, budget, strategy, split_method, helper, state, rng):
    """Train one tree on ``(x, label)``.

    Returns the leaf that absorbed the point, or -1 when the point was dropped.
    """
    root = roots[tree]
    if root < 0:
        h = new_leaf(arena, tree, x, label, budget)
        roots[tree] = h
        return h
    node = root
    while True:
        state[ad.ST_NODE_VISITS] += 1
        m = arena.free_top[0] >= 2
        if not m and strategy == STOPPED:
            return -1
        r, t_new = sample_branch(arena, node, x, budget, rng)
        if r and m:
            return extend_tree(arena, roots, tree, node, x, label, t_new, budget, rng)
        leaf = arena.left[node] < 0
        if leaf and m and split_method != ad.SPLIT_NONE and arena.expanded[node]:
            if distance_to_box(arena, node, x) == 0.0:
                if split_method == ad.SPLIT_BARYCENTER:
                    h = ad.barycenter(arena, tree)
                else:
                    h = helper
                child = ad.forced_split(arena, roots, tree, node, x, label, h, budget, rng)
                if child >= 0:
                    state[ad.ST_FORCED_SPLITS] += 1
                    return child
        update_box(strategy, arena, node, x, r, m)
        update_counters(strategy, arena, node, label, r, m)
        if descent_blocked(strategy, r, m):
            return -1
        if leaf:
            if strategy == PARTIAL_UPDATE and not m:
                commit_path_boxes(arena, node)
            return node
        if x[arena.split_feature[node]] < arena.split_value[node]:
            node = arena.right[node]
        else:
            node = arena.left[node]


@numba.njit(cache=True)
def train_forest(
    arena, roots, x, label, budget, strategy, trim_method, split_method,
    trim_threshold, leaf_fading, helper, state, rng,
):
    full = arena.free_top[0] < 2
    for t in range(roots.shape[0]):
        leaf = train_tree(arena, roots, t, x, label, budget, strategy, split_method, helper, state, rng)
        if trim_method == ad.TRIM_FADING:
            ad.record_leaf_arrival(arena, t, leaf, leaf_fading)
    if split_method == ad.SPLIT_AVG:
        ad.update_fading_mean(helper, x, leaf_fading, state)
    state[ad.ST_POINTS] += 1
    ad.maybe_trim(arena, roots, state, trim_method, trim_threshold, rng, full)


class MondrianForest:
    """Forest state: config, shared node arena, tree roots, RNG and counters."""

    def __init__(self, config: ForestConfig):
        size = node_size_bytes(config.feature_count, config.label_count)
        need = size * 2 * config.tree_count
        if config.memory_budget_bytes < need:
            raise BudgetTooSmallError(
                f"memory budget {config.memory_budget_bytes} B is below {need} B "
                f"(2 nodes x {config.tree_count} trees x {size} B)"
            )
        self.config = config
        self.arena: NodeArena = create_arena(config.capacity, config.feature_count, config.label_count)
        self.roots = np.full(config.tree_count, -1, np.int32)
        self.state = np.zeros(ad.STATE_SIZE, np.int64)
        self.helper = np.zeros(config.feature_count)
        self.rng = make_state(config.seed)
        threshold = config.trim_threshold
        self._threshold = ad.AUTO_THRESHOLD if threshold == "auto" else float(threshold)

    # -- training -------------------------------------------------------
    def _check_features(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.config.feature_count:
            raise DimensionMismatchError(
                f"expected {self.config.feature_count} features, got shape {x.shape}"
            )
        if not np.isfinite(x).all():
            raise ValueError("features must be finite")
        return x

    def train(self, x, label: int) -> None:
        x = self._check_features(x)
        label = int(label)
        if not 0 <= label < self.config.label_count:
            raise DimensionMismatchError(f"label {label} outside [0, {self.config.label_count})")
        cfg = self.config
        train_forest(
            self.arena, self.roots, x, label, cfg.budget, int(cfg.strategy), int(cfg.trim_method),
            int(cfg.split_method), self._threshold, cfg.leaf_fading, self.helper, self.state, self.rng,
        )

    def train_point(self, point: LabeledPoint) -> None:
        self.train(point.features, point.label)

    def predict(self, x) -> tuple[int, np.ndarray]:
        return forest_predict(self, x)

    # -- introspection --------------------------------------------------
    @property
    def capacity(self) -> int:
        return self.arena.capacity

    @property
    def used(self) -> int:
        return self.arena.used

    @property
    def is_empty(self) -> bool:
        return bool((self.roots < 0).all())

    @property
    def node_visits(self) -> int:
        return int(self.state[ad.ST_NODE_VISITS])

    @property
    def trim_rounds(self) -> int:
        return int(self.state[ad.ST_TRIM_ROUNDS])

    @property
    def trims(self) -> int:
        return int(self.state[ad.ST_TRIMS])

    @property
    def forced_splits(self) -> int:
        return int(self.state[ad.ST_FORCED_SPLITS])

    def node(self, handle: int) -> NodeRecord:
        return read_record(self.arena, handle)

    def tree_nodes(self, tree: int) -> list[int]:
        """Handles reachable from the root of ``tree`` (pre-order)."""
        out = []
        stack = [int(self.roots[tree])] if self.roots[tree] >= 0 else []
        a = self.arena
        while stack:
            h = stack.pop()
            out.append(h)
            if a.left[h] >= 0:
                stack.append(int(a.right[h]))
                stack.append(int(a.left[h]))
        return out

    def leaf_for(self, tree: int, x) -> int:
        x = self._check_features(x)
        a = self.arena
        h = int(self.roots[tree])
        while h >= 0 and a.left[h] >= 0:
            h = int(a.right[h] if x[a.split_feature[h]] < a.split_value[h] else a.left[h])
        return h

    def path(self, tree: int, x) -> list[int]:
        leaf = self.leaf_for(tree, x)
        out = []
        while leaf >= 0:
            out.append(leaf)
            leaf = int(self.arena.parent[leaf])
        return out[::-1]

    def snapshot(self, include_stats: bool = True) -> dict:
        """Deep copy of every piece of mutable model state.

        With ``include_stats=False`` the instrumentation counters (node visits,
        points seen, trim and split tallies) are zeroed so the result only
        reflects what influences future predictions and training.
        """
        snap = {name: arr.copy() for name, arr in self.arena.arrays().items()}
        snap["roots"] = self.roots.copy()
        snap["state"] = self.state.copy()
        if not include_stats:
            snap["state"][list(ad.STAT_SLOTS)] = 0
        snap["helper"] = self.helper.copy()
        snap["rng"] = self.rng.copy()
        return snap

    def state_hash(self) -> str:
        h = hashlib.sha256()
        for name, arr in sorted(self.snapshot().items()):
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def create_forest(config: ForestConfig) -> MondrianForest:
    return MondrianForest(config)
