"""Leaf trimming and regrowth splits for drifting streams under a memory cap.

Trimming runs every ``TRIM_PERIOD`` points that arrive while the arena is
full. Each round picks at most one leaf per tree (Random, Count or Fading
selection) and removes it together with its parent, splicing the sibling into
the grandparent. That returns two records to the arena per trimmed leaf.

Regrowth splits target leaves whose box was stretched while memory was
exhausted (``expanded`` flag). When a point lands inside such a leaf and two
records are free, the leaf is cut between the point and a split helper: either
the fading mean of the stream (Split AVG) or the count-weighted mean of the
tree's leaf box centres (Split Barycenter).
"""

import math

import numba
import numpy as np

from .arena import allocate, parent_time, release, tree_leaves
from .config import SplitMethod, TrimMethod
from .rng import exponential, uniform

TRIM_PERIOD = 100
AUTO_THRESHOLD = -1.0

TRIM_NONE = int(TrimMethod.NONE)
TRIM_RANDOM = int(TrimMethod.RANDOM)
TRIM_COUNT = int(TrimMethod.COUNT)
TRIM_FADING = int(TrimMethod.FADING)

SPLIT_NONE = int(SplitMethod.NONE)
SPLIT_AVG = int(SplitMethod.SPLIT_AVG)
SPLIT_BARYCENTER = int(SplitMethod.SPLIT_BARYCENTER)

# layout of the forest's int64 bookkeeping vector
ST_SINCE_TRIM = 0
ST_TRIM_ROUNDS = 1
ST_NODE_VISITS = 2
ST_HELPER_READY = 3
ST_POINTS = 4
ST_TRIMS = 5
ST_FORCED_SPLITS = 6
STATE_SIZE = 7
# pure instrumentation, never read back by training
STAT_SLOTS = (ST_TRIM_ROUNDS, ST_NODE_VISITS, ST_POINTS, ST_TRIMS, ST_FORCED_SPLITS)


@numba.njit(cache=True)
def record_leaf_arrival(arena, tree, leaf, fading):
    """Fade every leaf count of ``tree`` by ``fading`` and add one to ``leaf`` (if >= 0)."""
    for h in range(arena.parent.shape[0]):
        if arena.live[h] and arena.tree[h] == tree and arena.left[h] < 0:
            arena.fading_count[h] *= fading
    if leaf >= 0:
        arena.fading_count[leaf] += 1.0


@numba.njit(cache=True)
def _leaf_total(arena, h):
    total = 0
    for k in range(arena.counters.shape[1]):
        total += arena.counters[h, k]
    return total


@numba.njit(cache=True)
def select_trim_leaf(arena, tree, method, threshold, rng):
    """Pick a leaf of ``tree`` to trim, or -1.

    A negative ``threshold`` means "auto": the mean guard value over the
    tree's leaves. The guard is the fading count for the Fading method and the
    total label count otherwise.
    """
    leaves = tree_leaves(arena, tree)
    n = leaves.shape[0]
    if n < 2:
        return -1
    guard = np.empty(n)
    for i in range(n):
        if method == TRIM_FADING:
            guard[i] = arena.fading_count[leaves[i]]
        else:
            guard[i] = _leaf_total(arena, leaves[i])
    if method == TRIM_RANDOM:
        pick = int(uniform(rng) * n)
        if pick >= n:
            pick = n - 1
    else:
        pick = 0
        for i in range(1, n):
            if guard[i] < guard[pick]:
                pick = i
    limit = threshold
    if threshold < 0.0:
        limit = guard.mean()
    if guard[pick] > limit:
        return -1
    return leaves[pick]


@numba.njit(cache=True)
def trim_leaf(arena, roots, tree, leaf):
    """Remove ``leaf`` and its parent; the sibling takes the parent's place."""
    if arena.left[leaf] >= 0:
        raise ValueError("trim_leaf: handle is not a leaf")
    parent = arena.parent[leaf]
    if parent < 0:
        raise ValueError("trim_leaf: cannot trim the root")
    sibling = arena.left[parent]
    if sibling == leaf:
        sibling = arena.right[parent]
    grand = arena.parent[parent]

    h = grand
    while h >= 0:
        for k in range(arena.counters.shape[1]):
            v = arena.counters[h, k] - arena.counters[leaf, k]
            arena.counters[h, k] = v if v > 0 else 0
        h = arena.parent[h]

    arena.parent[sibling] = grand
    if grand < 0:
        roots[tree] = sibling
    elif arena.left[grand] == parent:
        arena.left[grand] = sibling
    else:
        arena.right[grand] = sibling
    release(arena, leaf)
    release(arena, parent)


@numba.njit(cache=True)
def maybe_trim(arena, roots, state, method, threshold, rng, full_on_arrival):
    """Trim trigger, called once per training point after all trees trained.

    Only points that arrive while the arena is already full count towards the
    ``TRIM_PERIOD`` rounds.
    """
    if method == TRIM_NONE or not full_on_arrival:
        return
    state[ST_SINCE_TRIM] += 1
    if state[ST_SINCE_TRIM] < TRIM_PERIOD:
        return
    state[ST_SINCE_TRIM] = 0
    state[ST_TRIM_ROUNDS] += 1
    for t in range(roots.shape[0]):
        leaf = select_trim_leaf(arena, t, method, threshold, rng)
        if leaf >= 0:
            trim_leaf(arena, roots, t, leaf)
            state[ST_TRIMS] += 1


@numba.njit(cache=True)
def update_fading_mean(mean, x, fading, state):
    if state[ST_HELPER_READY] == 0:
        mean[:] = x
        state[ST_HELPER_READY] = 1
    else:
        for d in range(x.shape[0]):
            mean[d] = fading * mean[d] + (1.0 - fading) * x[d]


@numba.njit(cache=True)
def barycenter(arena, tree):
    """Count-weighted mean of the leaf box centres of ``tree``.

    Falls back to the unweighted mean of centres when every leaf is empty.
    """
    f = arena.lower.shape[1]
    acc = np.zeros(f)
    plain = np.zeros(f)
    weight = 0.0
    leaves = tree_leaves(arena, tree)
    for h in leaves:
        w = float(_leaf_total(arena, h))
        for d in range(f):
            c = 0.5 * (arena.lower[h, d] + arena.upper[h, d])
            acc[d] += w * c
            plain[d] += c
        weight += w
    if weight > 0.0:
        return acc / weight
    if leaves.shape[0] > 0:
        return plain / leaves.shape[0]
    return plain


@numba.njit(cache=True)
def split_counts(count, fraction):
    """Split an integer ``count`` into (low side, high side) by largest remainder.

    The low side receives ``fraction`` of the mass; an exact half remainder goes
    to the low side.
    """
    share = count * fraction
    low = int(math.floor(share))
    if share - low >= 0.5:
        low += 1
    if low > count:
        low = count
    return low, count - low


@numba.njit(cache=True)
def forced_split(arena, roots, tree, leaf, x, label, helper, budget, rng):
    """Cut ``leaf`` between ``x`` and ``helper``; route ``x`` into its side.

    Returns the child that received ``x``, or -1 when no dimension is eligible
    (helper outside the box or equal to ``x`` on every dimension) or fewer than
    two records are free. Child ``right`` holds values below the split, the same
    convention as the descent rule.
    """
    if arena.free_top[0] < 2:
        return -1
    f = x.shape[0]
    eligible = np.empty(f, np.int64)
    n = 0
    for d in range(f):
        h = helper[d]
        if arena.lower[leaf, d] <= h <= arena.upper[leaf, d] and h != x[d]:
            eligible[n] = d
            n += 1
    if n == 0:
        return -1
    pick = int(uniform(rng) * n)
    if pick >= n:
        pick = n - 1
    d = eligible[pick]
    lo = min(x[d], helper[d])
    hi = max(x[d], helper[d])
    u = uniform(rng)
    if u == 0.0:
        u = 0.5
    value = lo + (hi - lo) * u
    if not lo < value < hi:
        value = 0.5 * (lo + hi)

    # split time: Mondrian clock on the leaf's box, clipped to the budget
    linear = 0.0
    for k in range(f):
        linear += arena.upper[leaf, k] - arena.lower[leaf, k]
    t = parent_time(arena, leaf) + exponential(rng, linear)
    if t > budget:
        t = budget

    lo_child = allocate(arena, tree)
    hi_child = allocate(arena, tree)
    width = arena.upper[leaf, d] - arena.lower[leaf, d]
    fraction = (value - arena.lower[leaf, d]) / width
    for c in (lo_child, hi_child):
        arena.parent[c] = leaf
        arena.split_time[c] = budget
        arena.lower[c, :] = arena.lower[leaf, :]
        arena.upper[c, :] = arena.upper[leaf, :]
    arena.upper[lo_child, d] = value
    arena.lower[hi_child, d] = value
    for c in (lo_child, hi_child):
        arena.prev_lower[c, :] = arena.lower[c, :]
        arena.prev_upper[c, :] = arena.upper[c, :]
    for k in range(arena.counters.shape[1]):
        a, b = split_counts(arena.counters[leaf, k], fraction)
        arena.counters[lo_child, k] = a
        arena.counters[hi_child, k] = b
    arena.fading_count[lo_child] = arena.fading_count[leaf] * fraction
    arena.fading_count[hi_child] = arena.fading_count[leaf] * (1.0 - fraction)

    arena.right[leaf] = lo_child
    arena.left[leaf] = hi_child
    arena.split_feature[leaf] = d
    arena.split_value[leaf] = value
    arena.split_time[leaf] = t
    arena.expanded[leaf] = False
    arena.fading_count[leaf] = 0.0
    arena.counters[leaf, label] += 1

    target = lo_child if x[d] < value else hi_child
    arena.counters[target, label] += 1
    return target
