"""Out-of-memory strategies.

``update_box`` and ``update_counters`` are called on every node visited by a
training point. With memory available (``m`` true) all strategies do the plain
update. They only diverge once the arena is exhausted:

=============== ================================ ================================
strategy        counters                          box
=============== ================================ ================================
Stopped         untouched                         untouched
ExtendNode      always incremented                always extended
PartialUpdate   incremented, whole path rolled    extended, whole path restored
                back when a split is blocked      when a split is blocked
CountOnly       always incremented                untouched
Ghost           ancestors keep their increments,  same, blocked node untouched
                blocked node untouched
=============== ================================ ================================

Blocked-split rollbacks run from the blocked node up to and including the root.
The previous bounds (``prev_lower``/``prev_upper``) equal the live bounds
between training points; PartialUpdate uses them as its undo record.
"""

import numba

from .config import Strategy

STOPPED = int(Strategy.STOPPED)
EXTEND_NODE = int(Strategy.EXTEND_NODE)
PARTIAL_UPDATE = int(Strategy.PARTIAL_UPDATE)
COUNT_ONLY = int(Strategy.COUNT_ONLY)
GHOST = int(Strategy.GHOST)


@numba.njit(cache=True, inline="always")
def extend_box(arena, node, x, tentative):
    """Grow the box of ``node`` to hold ``x``; returns True when it grew.

    Outside a tentative update the previous bounds track the live ones. A
    tentative update leaves them alone so ``restore_path_boxes`` can undo it;
    ``commit_path_boxes`` makes it permanent.
    """
    grew = False
    for d in range(x.shape[0]):
        if x[d] < arena.lower[node, d]:
            arena.lower[node, d] = x[d]
            if not tentative:
                arena.prev_lower[node, d] = x[d]
            grew = True
        if x[d] > arena.upper[node, d]:
            arena.upper[node, d] = x[d]
            if not tentative:
                arena.prev_upper[node, d] = x[d]
            grew = True
    return grew


@numba.njit(cache=True, inline="always")
def restore_path_boxes(arena, node):
    while node >= 0:
        arena.lower[node, :] = arena.prev_lower[node, :]
        arena.upper[node, :] = arena.prev_upper[node, :]
        node = arena.parent[node]


@numba.njit(cache=True, inline="always")
def commit_path_boxes(arena, node):
    while node >= 0:
        arena.prev_lower[node, :] = arena.lower[node, :]
        arena.prev_upper[node, :] = arena.upper[node, :]
        node = arena.parent[node]


@numba.njit(cache=True, inline="always")
def update_box(strategy, arena, node, x, r, m):
    if m:
        extend_box(arena, node, x, False)
        return
    if strategy == EXTEND_NODE:
        if extend_box(arena, node, x, False):
            arena.expanded[node] = True
    elif strategy == PARTIAL_UPDATE:
        extend_box(arena, node, x, True)
        if r:
            restore_path_boxes(arena, node)
    elif strategy == GHOST:
        if not r:
            if extend_box(arena, node, x, False):
                arena.expanded[node] = True
    # STOPPED and COUNT_ONLY leave the box alone once memory is exhausted


@numba.njit(cache=True, inline="always")
def update_counters(strategy, arena, node, label, r, m):
    if m:
        arena.counters[node, label] += 1
        return
    if strategy == EXTEND_NODE or strategy == COUNT_ONLY:
        arena.counters[node, label] += 1
    elif strategy == PARTIAL_UPDATE:
        arena.counters[node, label] += 1
        if r:
            h = node
            while h >= 0:
                arena.counters[h, label] -= 1
                h = arena.parent[h]
    elif strategy == GHOST:
        if not r:
            arena.counters[node, label] += 1


@numba.njit(cache=True, inline="always")
def descent_blocked(strategy, r, m):
    """Whether the point is dropped at this node instead of descending further."""
    if m:
        return False
    if strategy == STOPPED:
        return True
    if strategy == PARTIAL_UPDATE or strategy == GHOST:
        return r
    return False
