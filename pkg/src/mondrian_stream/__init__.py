"""Memory-bounded Mondrian forests for data-stream classification."""

__version__ = "0.1.0"

from .arena import NodeArena, NodeRecord
from .config import (
    BudgetTooSmallError,
    ConfigError,
    ForestConfig,
    SplitMethod,
    Strategy,
    TrimMethod,
    node_capacity,
    node_size_bytes,
)
from .core import LabeledPoint, MondrianForest, create_forest
from .prediction import EmptyTreeError

__all__ = [
    "BudgetTooSmallError",
    "ConfigError",
    "EmptyTreeError",
    "ForestConfig",
    "LabeledPoint",
    "MondrianForest",
    "NodeArena",
    "NodeRecord",
    "SplitMethod",
    "Strategy",
    "TrimMethod",
    "create_forest",
    "node_capacity",
    "node_size_bytes",
]
