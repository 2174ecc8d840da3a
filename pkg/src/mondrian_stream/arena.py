"""Fixed-capacity node storage.

All trees of a forest share one arena. Records live in parallel arrays indexed
by an integer handle; ``-1`` is the null handle. Free handles sit on a stack so
allocation and release are O(1) and never grow the backing arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
from numba.core import types
from numba.experimental import structref

NULL = -1


FIELDS = (
    "parent",  # int32[C]
    "left",  # int32[C]
    "right",  # int32[C]
    "split_feature",  # int32[C]
    "split_value",  # float64[C]
    "split_time",  # float64[C]
    "counters",  # int32[C, L]
    "lower",  # float64[C, F]
    "upper",  # float64[C, F]
    "prev_lower",  # float64[C, F]
    "prev_upper",  # float64[C, F]
    "fading_count",  # float64[C]
    "expanded",  # bool[C]
    "live",  # bool[C]
    "tree",  # int32[C], owning tree index
    "free_stack",  # int32[C]
    "free_top",  # int64[1], number of handles on the stack
)


@structref.register
class NodeArenaType(types.StructRef):
    def preprocess_fields(self, fields):
        return tuple((name, types.unliteral(typ)) for name, typ in fields)


class NodeArena(structref.StructRefProxy):
    """Handle to the arena arrays.

    Compiled kernels receive it as a single reference; from Python every field
    is exposed as an attribute returning the live (shared) array.
    """

    def __new__(cls, *arrays):
        return structref.StructRefProxy.__new__(cls, *arrays)

    @property
    def capacity(self) -> int:
        return self.parent.shape[0]

    @property
    def used(self) -> int:
        return self.capacity - int(self.free_top[0])

    @property
    def free(self) -> int:
        return int(self.free_top[0])

    def arrays(self) -> dict:
        return {name: getattr(self, name) for name in FIELDS}


structref.define_proxy(NodeArena, NodeArenaType, list(FIELDS))


def _field_property(name):
    getter = numba.njit(cache=False)(eval(f"lambda self: self.{name}"))
    return property(lambda self: getter(self))


for _name in FIELDS:
    setattr(NodeArena, _name, _field_property(_name))


def create_arena(capacity: int, feature_count: int, label_count: int) -> NodeArena:
    """Allocate every record up front; handles are handed out in ascending order."""
    c, f, l = capacity, feature_count, label_count
    return NodeArena(
        np.full(c, NULL, np.int32),  # parent
        np.full(c, NULL, np.int32),  # left
        np.full(c, NULL, np.int32),  # right
        np.full(c, NULL, np.int32),  # split_feature
        np.full(c, np.nan),  # split_value
        np.full(c, np.inf),  # split_time
        np.zeros((c, l), np.int32),  # counters
        np.zeros((c, f)),  # lower
        np.zeros((c, f)),  # upper
        np.zeros((c, f)),  # prev_lower
        np.zeros((c, f)),  # prev_upper
        np.zeros(c),  # fading_count
        np.zeros(c, np.bool_),  # expanded
        np.zeros(c, np.bool_),  # live
        np.full(c, NULL, np.int32),  # tree
        np.arange(c - 1, -1, -1, dtype=np.int32),  # free_stack
        np.array([c], np.int64),  # free_top
    )


@numba.njit(cache=True, inline="always")
def free_count(arena):
    return arena.free_top[0]


@numba.njit(cache=True)
def allocate(arena, tree):
    """Pop a handle and reset its record. Returns NULL when the arena is full."""
    top = arena.free_top[0]
    if top == 0:
        return -1
    top -= 1
    h = arena.free_stack[top]
    arena.free_top[0] = top
    arena.parent[h] = -1
    arena.left[h] = -1
    arena.right[h] = -1
    arena.split_feature[h] = -1
    arena.split_value[h] = np.nan
    arena.split_time[h] = np.inf
    arena.counters[h, :] = 0
    arena.fading_count[h] = 0.0
    arena.expanded[h] = False
    arena.live[h] = True
    arena.tree[h] = tree
    return h


@numba.njit(cache=True)
def release(arena, h):
    arena.live[h] = False
    arena.tree[h] = -1
    arena.parent[h] = -1
    arena.left[h] = -1
    arena.right[h] = -1
    top = arena.free_top[0]
    arena.free_stack[top] = h
    arena.free_top[0] = top + 1


@numba.njit(cache=True, inline="always")
def is_leaf(arena, h):
    return arena.left[h] < 0


@numba.njit(cache=True)
def tree_leaves(arena, tree):
    """Live leaves of ``tree`` in ascending handle order."""
    n = 0
    for h in range(arena.parent.shape[0]):
        if arena.live[h] and arena.tree[h] == tree and arena.left[h] < 0:
            n += 1
    out = np.empty(n, np.int64)
    i = 0
    for h in range(arena.parent.shape[0]):
        if arena.live[h] and arena.tree[h] == tree and arena.left[h] < 0:
            out[i] = h
            i += 1
    return out


def _opt(h: int) -> Optional[int]:
    return None if h < 0 else int(h)


@dataclass
class NodeRecord:
    """Read-only snapshot of one arena record."""

    handle: int
    parent: Optional[int]
    left: Optional[int]
    right: Optional[int]
    split_feature: Optional[int]
    split_value: Optional[float]
    counters: np.ndarray
    lower_bound: np.ndarray
    upper_bound: np.ndarray
    prev_lower_bound: np.ndarray
    prev_upper_bound: np.ndarray
    split_time: float
    fading_count: float
    expanded_flag: bool

    @property
    def is_leaf(self) -> bool:
        return self.left is None and self.right is None


def read_record(arena: NodeArena, h: int) -> NodeRecord:
    if not (0 <= h < arena.capacity) or not arena.live[h]:
        raise KeyError(f"handle {h} is not a live record")
    feature = _opt(arena.split_feature[h])
    return NodeRecord(
        handle=int(h),
        parent=_opt(arena.parent[h]),
        left=_opt(arena.left[h]),
        right=_opt(arena.right[h]),
        split_feature=feature,
        split_value=None if feature is None else float(arena.split_value[h]),
        counters=arena.counters[h].copy(),
        lower_bound=arena.lower[h].copy(),
        upper_bound=arena.upper[h].copy(),
        prev_lower_bound=arena.prev_lower[h].copy(),
        prev_upper_bound=arena.prev_upper[h].copy(),
        split_time=float(arena.split_time[h]),
        fading_count=float(arena.fading_count[h]),
        expanded_flag=bool(arena.expanded[h]),
    )


@numba.njit(cache=True, inline="always")
def parent_time(arena, h):
    """Split time of the parent of ``h``; the root's virtual parent sits at time 0."""
    p = arena.parent[h]
    if p < 0:
        return 0.0
    return arena.split_time[p]
