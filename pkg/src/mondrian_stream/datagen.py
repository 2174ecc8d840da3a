"""Seeded synthetic streams in the style of the MOA generators.

Families
--------
randomrbf
    ``centroids`` centres drawn uniformly in [0, 1]^F, each with a label drawn
    uniformly from ``labels``, a radius (standard deviation) uniform in [0, 1]
    and a selection weight uniform in [0, 1]. A point picks a centre by
    weight and moves away from it in a uniformly random direction by a
    Gaussian length scaled by the centre's radius.
sea
    Three features uniform on [0, 10]; label 1 iff ``x0 + x1 <= theta`` with
    theta 8, 9, 7 and 9.5 for functions 1-4. ``x2`` is irrelevant.
sine
    Two features uniform on [0, 1]. Function 1: label 1 iff ``x1 < sin(x0)``;
    function 2 is its complement; function 3: label 1 iff
    ``x1 < 0.5 + 0.3 sin(3 pi x0)``; function 4 is its complement.
hyperplane
    ``features`` features uniform on [0, 1], weights uniform on [0, 1]; label 1
    iff ``w.x >= sum(w) / 2``. After every point the first
    ``drifting_attributes`` weights move by ``drift_magnitude`` in their
    current direction, and each direction reverses with probability 0.1.

With probability ``noise`` the emitted label is replaced by a uniformly drawn
different label. ``switch_function`` swaps the SEA/SINE function at
``shift_at``; ``label_shift`` rotates every label by one from ``shift_at`` on.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterator, Optional

import numpy as np

from .core import LabeledPoint

FAMILIES = ("randomrbf", "sea", "sine", "hyperplane")
SEA_THRESHOLDS = {1: 8.0, 2: 9.0, 3: 7.0, 4: 9.5}
DIRECTION_FLIP_PROB = 0.1


class StreamExhausted(Exception):
    pass


@dataclass
class GeneratorConfig:
    family: str = "sea"
    seed: int = 1
    n_points: int = 20_000
    noise: float = 0.0
    centroids: int = 50
    features: int = 10
    labels: int = 2
    sea_function: int = 1
    sine_function: int = 1
    drift_magnitude: float = 0.0
    drifting_attributes: int = 2
    switch_function: Optional[int] = None
    label_shift: bool = False
    shift_at: Optional[int] = None

    def __post_init__(self) -> None:
        self.family = self.family.lower()
        if self.family not in FAMILIES:
            raise ValueError(f"unknown generator family {self.family!r}")
        if not 0.0 <= self.noise < 1.0:
            raise ValueError("noise must lie in [0, 1)")
        if self.n_points < 0:
            raise ValueError("n_points must be non-negative")
        if self.family == "sea" and self.sea_function not in SEA_THRESHOLDS:
            raise ValueError("sea_function must be 1..4")
        if self.family == "sine" and self.sine_function not in (1, 2, 3, 4):
            raise ValueError("sine_function must be 1..4")
        if self.switch_function is not None and self.switch_function not in (1, 2, 3, 4):
            raise ValueError("switch_function must be 1..4")
        if self.family == "randomrbf" and self.centroids < 1:
            raise ValueError("centroids must be >= 1")
        if self.family == "hyperplane" and not 0 <= self.drifting_attributes <= self.features:
            raise ValueError("drifting_attributes must lie in [0, features]")

    @property
    def feature_count(self) -> int:
        return {"sea": 3, "sine": 2}.get(self.family, self.features)

    @property
    def label_count(self) -> int:
        return self.labels if self.family == "randomrbf" else 2

    @property
    def switch_point(self) -> int:
        return self.n_points // 2 if self.shift_at is None else self.shift_at

    def as_flat_dict(self) -> dict:
        return asdict(self)


class StreamGenerator:
    """Iterator over ``n_points`` labelled points."""

    def __init__(self, config: GeneratorConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.emitted = 0
        self.last_clean_label: Optional[int] = None
        self._setup()

    @property
    def feature_count(self) -> int:
        return self.config.feature_count

    @property
    def label_count(self) -> int:
        return self.config.label_count

    def _setup(self) -> None:
        pass

    def _sample(self) -> tuple[np.ndarray, int]:
        raise NotImplementedError

    def _after_point(self) -> None:
        pass

    def next_point(self) -> LabeledPoint:
        cfg = self.config
        if self.emitted >= cfg.n_points:
            raise StreamExhausted(f"stream exhausted after {cfg.n_points} points")
        x, label = self._sample()
        self.last_clean_label = label
        if cfg.noise > 0.0 and self.rng.random() < cfg.noise:
            other = int(self.rng.integers(self.label_count - 1))
            label = other if other < label else other + 1
        self._after_point()
        self.emitted += 1
        return LabeledPoint(x, int(label))

    def __iter__(self) -> Iterator[LabeledPoint]:
        while self.emitted < self.config.n_points:
            yield self.next_point()


class RandomRBF(StreamGenerator):
    def _setup(self) -> None:
        cfg, rng = self.config, self.rng
        self.centres = rng.random((cfg.centroids, cfg.features))
        self.centre_labels = rng.integers(cfg.labels, size=cfg.centroids)
        self.radii = rng.random(cfg.centroids)
        weights = rng.random(cfg.centroids)
        self.cum_weights = np.cumsum(weights) / weights.sum()

    def _sample(self):
        rng = self.rng
        i = min(int(np.searchsorted(self.cum_weights, rng.random(), side="right")), len(self.radii) - 1)
        direction = rng.random(self.config.features) * 2.0 - 1.0
        norm = math.sqrt(float(direction @ direction)) or 1.0
        length = rng.standard_normal() * self.radii[i]
        return self.centres[i] + direction * (length / norm), int(self.centre_labels[i])


class SEA(StreamGenerator):
    def _function(self) -> int:
        cfg = self.config
        if cfg.switch_function is not None and self.emitted >= cfg.switch_point:
            return cfg.switch_function
        return cfg.sea_function

    def concept(self, x) -> int:
        return int(x[0] + x[1] <= SEA_THRESHOLDS[self._function()])

    def _sample(self):
        x = self.rng.random(3) * 10.0
        return x, self.concept(x)


class Sine(StreamGenerator):
    def _function(self) -> int:
        cfg = self.config
        if cfg.switch_function is not None and self.emitted >= cfg.switch_point:
            return cfg.switch_function
        return cfg.sine_function

    def concept(self, x) -> int:
        fn = self._function()
        if fn in (1, 2):
            below = x[1] < math.sin(x[0])
        else:
            below = x[1] < 0.5 + 0.3 * math.sin(3.0 * math.pi * x[0])
        return int(below) if fn in (1, 3) else int(not below)

    def _sample(self):
        x = self.rng.random(2)
        return x, self.concept(x)


class Hyperplane(StreamGenerator):
    def _setup(self) -> None:
        self.weights = self.rng.random(self.config.features)
        self.directions = np.ones(self.config.features)

    def concept(self, x) -> int:
        return int(float(self.weights @ x) >= 0.5 * float(self.weights.sum()))

    def _sample(self):
        x = self.rng.random(self.config.features)
        return x, self.concept(x)

    def _after_point(self) -> None:
        cfg = self.config
        if cfg.drift_magnitude == 0.0:
            return
        for d in range(cfg.drifting_attributes):
            self.weights[d] += self.directions[d] * cfg.drift_magnitude
            if self.rng.random() < DIRECTION_FLIP_PROB:
                self.directions[d] = -self.directions[d]


class LabelShiftWrapper:
    """Rotate labels by ``shift`` (mod label count) from ``shift_at`` onwards."""

    def __init__(self, inner: StreamGenerator, shift_at: int, shift: int = 1):
        self.inner = inner
        self.shift_at = shift_at
        self.shift = shift

    @property
    def config(self) -> GeneratorConfig:
        return self.inner.config

    @property
    def feature_count(self) -> int:
        return self.inner.feature_count

    @property
    def label_count(self) -> int:
        return self.inner.label_count

    def next_point(self) -> LabeledPoint:
        index = self.inner.emitted
        point = self.inner.next_point()
        if index >= self.shift_at:
            point = LabeledPoint(point.features, (point.label + self.shift) % self.label_count)
        return point

    def __iter__(self) -> Iterator[LabeledPoint]:
        while self.inner.emitted < self.inner.config.n_points:
            yield self.next_point()


_FAMILY_CLASSES = {"randomrbf": RandomRBF, "sea": SEA, "sine": Sine, "hyperplane": Hyperplane}


def make_generator(config: GeneratorConfig):
    gen = _FAMILY_CLASSES[config.family](config)
    if config.label_shift:
        return LabelShiftWrapper(gen, config.switch_point)
    return gen
