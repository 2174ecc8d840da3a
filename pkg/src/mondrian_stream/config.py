"""Forest configuration, selector enums and the per-node byte layout."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Union


class _CliEnum(enum.IntEnum):
    """IntEnum addressable by a dashed lower-case CLI name."""

    @property
    def cli_name(self) -> str:
        return self.name.lower().replace("_", "-")

    @classmethod
    def from_cli(cls, name: str):
        key = name.strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            choices = ", ".join(m.cli_name for m in cls)
            raise ValueError(f"unknown {cls.__name__} {name!r} (choose from {choices})") from None


class Strategy(_CliEnum):
    """Out-of-memory behaviour of the box/counter updates."""

    STOPPED = 0
    EXTEND_NODE = 1
    PARTIAL_UPDATE = 2
    COUNT_ONLY = 3
    GHOST = 4


class TrimMethod(_CliEnum):
    NONE = 0
    RANDOM = 1
    COUNT = 2
    FADING = 3


class SplitMethod(_CliEnum):
    NONE = 0
    SPLIT_AVG = 1
    SPLIT_BARYCENTER = 2

    @property
    def cli_name(self) -> str:
        return {0: "none", 1: "avg", 2: "barycenter"}[int(self)]

    @classmethod
    def from_cli(cls, name: str):
        key = name.strip().lower()
        if key in ("avg", "barycenter"):
            name = "split-" + key
        return super().from_cli(name)


# Per-node layout of the embedded record, in bytes:
#   header   parent/left/right/split_feature as int32 (16) + split_value and
#            split_time as float64 (16)
#   counters L x uint32
#   bounds   lower/upper/prev_lower/prev_upper, 4 x F x float64
#   fading   float64
#   flags    1 byte (expanded)
# padded to an 8-byte boundary.
HEADER_BYTES = 32
COUNTER_BYTES = 4
BOUND_BYTES = 8
FADING_BYTES = 8
FLAG_BYTES = 1
ALIGNMENT = 8


def node_size_bytes(feature_count: int, label_count: int) -> int:
    """Size of one node record for ``feature_count`` features and ``label_count`` labels."""
    raw = (
        HEADER_BYTES
        + COUNTER_BYTES * label_count
        + 4 * BOUND_BYTES * feature_count
        + FADING_BYTES
        + FLAG_BYTES
    )
    return -(-raw // ALIGNMENT) * ALIGNMENT


def node_capacity(memory_budget_bytes: int, feature_count: int, label_count: int) -> int:
    return memory_budget_bytes // node_size_bytes(feature_count, label_count)


class ConfigError(ValueError):
    pass


class BudgetTooSmallError(ConfigError):
    pass


Threshold = Union[float, str]


@dataclass(frozen=True)
class ForestConfig:
    feature_count: int
    label_count: int
    tree_count: int = 10
    memory_budget_bytes: int = 600_000
    budget: float = math.inf
    base_count: float = 1.0
    discount_factor: float = 0.5
    strategy: Strategy = Strategy.EXTEND_NODE
    trim_method: TrimMethod = TrimMethod.NONE
    split_method: SplitMethod = SplitMethod.NONE
    trim_threshold: Threshold = "auto"
    leaf_fading: float = 0.99
    seed: int = 0

    def __post_init__(self) -> None:
        # accept plain ints/strings for the selectors
        object.__setattr__(self, "strategy", _coerce(Strategy, self.strategy))
        object.__setattr__(self, "trim_method", _coerce(TrimMethod, self.trim_method))
        object.__setattr__(self, "split_method", _coerce(SplitMethod, self.split_method))
        self.validate()

    def validate(self) -> None:
        if self.tree_count < 1:
            raise ConfigError("tree_count must be >= 1")
        if self.feature_count < 1 or self.label_count < 1:
            raise ConfigError("feature_count and label_count must be >= 1")
        if self.memory_budget_bytes <= 0:
            raise ConfigError("memory_budget_bytes must be positive")
        if not self.budget > 0:
            raise ConfigError("budget must be positive (or inf)")
        if self.base_count < 0:
            raise ConfigError("base_count must be non-negative")
        if not 0.0 <= self.discount_factor < 1.0:
            raise ConfigError("discount_factor must lie in [0, 1)")
        if not 0.0 < self.leaf_fading <= 1.0:
            raise ConfigError("leaf_fading must lie in (0, 1]")
        if isinstance(self.trim_threshold, str):
            if self.trim_threshold != "auto":
                raise ConfigError("trim_threshold must be a number or 'auto'")
        elif self.trim_threshold < 0:
            raise ConfigError("trim_threshold must be non-negative")

    @property
    def node_size(self) -> int:
        return node_size_bytes(self.feature_count, self.label_count)

    @property
    def capacity(self) -> int:
        return node_capacity(self.memory_budget_bytes, self.feature_count, self.label_count)

    def as_flat_dict(self) -> dict:
        out = asdict(self)
        for key in ("strategy", "trim_method", "split_method"):
            out[key] = getattr(self, key).cli_name
        return out


def _coerce(enum_cls, value):
    if isinstance(value, enum_cls):
        return value
    if isinstance(value, str):
        return enum_cls.from_cli(value)
    return enum_cls(value)
