"""Prequential (test-then-train) evaluation with a fading confusion matrix."""

from __future__ import annotations

from typing import Iterable, List, Optional, Tuple

import numpy as np

from .core import LabeledPoint, MondrianForest

DEFAULT_EVAL_FADING = 0.999
# a label whose faded row + column mass is below this share of the total is
# treated as absent; with plain counts (fading 1) only exact zeros qualify
NEGLIGIBLE_SHARE = 1e-12


class FadingConfusion:
    """Label x label confusion matrix (rows: truth, columns: prediction).

    Before each increment the whole matrix is multiplied by ``fading``; with
    ``fading=1`` the entries are plain counts.
    """

    def __init__(self, label_count: int, fading: float = DEFAULT_EVAL_FADING):
        if not 0.0 < fading <= 1.0:
            raise ValueError("fading must lie in (0, 1]")
        self.label_count = label_count
        self.fading = fading
        self.matrix = np.zeros((label_count, label_count))

    def update(self, true_label: int, predicted_label: int) -> None:
        n = self.label_count
        if not (0 <= true_label < n and 0 <= predicted_label < n):
            raise ValueError(f"label out of range [0, {n}): {true_label}, {predicted_label}")
        if self.fading != 1.0:
            self.matrix *= self.fading
        self.matrix[true_label, predicted_label] += 1.0

    def macro_f1(self) -> float:
        return macro_f1(self.matrix)


def update_confusion(cm: FadingConfusion, true_label: int, predicted_label: int) -> None:
    cm.update(true_label, predicted_label)


def macro_f1(matrix) -> float:
    """Mean per-label F1 over labels that were either seen or predicted.

    A label with zero precision and recall scores 0; a label absent from both
    the truth and the predictions (up to ``NEGLIGIBLE_SHARE`` of the total
    mass, so faded-out labels eventually drop out) is left out of the mean.
    """
    m = np.asarray(matrix, dtype=float)
    tp = np.diag(m)
    rows = m.sum(axis=1)
    cols = m.sum(axis=0)
    total = m.sum()
    if total <= 0.0:
        return 0.0
    present = (rows + cols) > NEGLIGIBLE_SHARE * total
    if not present.any():
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(cols > 0, tp / cols, 0.0)
        recall = np.where(rows > 0, tp / rows, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2.0 * precision * recall / denom, 0.0)
    return float(f1[present].mean())


def run_prequential(
    stream: Iterable[LabeledPoint],
    forest: MondrianForest,
    eval_fading: float = DEFAULT_EVAL_FADING,
    report_every: int = 100,
    log: Optional[list] = None,
) -> List[Tuple[int, float]]:
    """Score each point before training on it.

    Returns ``(point_index, macro_f1)`` rows every ``report_every`` points and
    at the end of the stream; ``point_index`` counts points consumed (1-based).
    Points that arrive while the forest is still empty are train-only. When
    ``log`` is given, ``(prediction, truth)`` pairs are appended to it.
    """
    if report_every < 1:
        raise ValueError("report_every must be >= 1")
    cm = FadingConfusion(forest.config.label_count, eval_fading)
    rows: List[Tuple[int, float]] = []
    index = 0
    for point in stream:
        index += 1
        if not forest.is_empty:
            predicted, _ = forest.predict(point.features)
            cm.update(point.label, predicted)
            if log is not None:
                log.append((predicted, point.label))
        forest.train(point.features, point.label)
        if index % report_every == 0:
            rows.append((index, cm.macro_f1()))
    if index and (not rows or rows[-1][0] != index):
        rows.append((index, cm.macro_f1()))
    return rows
