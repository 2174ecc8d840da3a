"""CSV stream ingestion and fixed-window feature extraction."""

from __future__ import annotations

import csv
import io
import os
from collections import Counter
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .core import LabeledPoint

Source = Union[str, os.PathLike, Iterable[str]]


class CsvFormatError(ValueError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _lines(source: Source) -> Iterator[str]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            yield from fh
    else:
        yield from source


def parse_csv_stream(source: Source) -> Iterator[LabeledPoint]:
    """Yield points from numeric CSV rows whose last column is an integer label.

    ``source`` is a path or an iterable of lines. A non-numeric first row is
    treated as a header and skipped. Blank lines are ignored.
    """
    width = None
    for row_no, row in enumerate(csv.reader(_lines(source)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if width is None and row_no == 1 and not all(_is_number(c) for c in row):
            width = len(row)
            continue
        if width is None:
            width = len(row)
        if len(row) != width:
            raise CsvFormatError(row_no, f"expected {width} columns, got {len(row)}")
        if width < 2:
            raise CsvFormatError(row_no, "need at least one feature and a label")
        try:
            values = np.array([float(c) for c in row[:-1]])
            label_value = float(row[-1])
        except ValueError as exc:
            raise CsvFormatError(row_no, str(exc)) from None
        if not label_value.is_integer() or label_value < 0:
            raise CsvFormatError(row_no, f"label {row[-1]!r} is not a non-negative integer")
        yield LabeledPoint(values, int(label_value))


def parse_csv_text(text: str) -> Iterator[LabeledPoint]:
    return parse_csv_stream(io.StringIO(text))


def window_features(
    raw: Iterable[LabeledPoint], window_len: int, axes: Optional[Sequence[int]] = None
) -> Iterator[LabeledPoint]:
    """Mean and population standard deviation per axis over non-overlapping windows.

    Output features are all axis means followed by all axis standard
    deviations. The window label is the most frequent one (lowest wins ties).
    A trailing partial window is dropped.
    """
    if window_len < 2:
        raise ValueError("window_len must be >= 2")
    rows, labels = [], []
    for sample in raw:
        values = np.asarray(sample.features, dtype=float)
        rows.append(values if axes is None else values[list(axes)])
        labels.append(sample.label)
        if len(rows) == window_len:
            block = np.vstack(rows)
            counts = Counter(labels)
            top = max(counts.values())
            label = min(k for k, v in counts.items() if v == top)
            yield LabeledPoint(np.concatenate([block.mean(axis=0), block.std(axis=0)]), label)
            rows, labels = [], []


def drop_label(stream: Iterable[LabeledPoint], label: int = 0) -> Iterator[LabeledPoint]:
    for point in stream:
        if point.label != label:
            yield point


def write_csv_stream(points: Iterable[LabeledPoint], out) -> int:
    """Write points as ``f0,...,fN,label`` rows with a header. Returns the row count."""
    writer = csv.writer(out, lineterminator="\n")
    n = 0
    for point in points:
        if n == 0:
            writer.writerow([f"f{i}" for i in range(len(point.features))] + ["label"])
        writer.writerow([repr(float(v)) for v in point.features] + [point.label])
        n += 1
    return n
