"""CSV ingestion with invertible per-column scaling into [-1, 1]."""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mechanisms import DataMatrix

__all__ = ["ParseError", "ScalingRecord", "scale_columns", "read_numeric_csv", "ingest_csv"]


class ParseError(ValueError):
    """A cell could not be read as a number."""


@dataclass(frozen=True)
class ScalingRecord:
    """Per-column affine maps (x - offset) / scale used at ingestion.

    Applying the map sends each ingested column into [-1, 1]; the inverse
    transform recovers the original values.
    """

    offsets: tuple
    scales: tuple

    def __post_init__(self):
        if len(self.offsets) != len(self.scales):
            raise ValueError("offsets and scales must have equal length")
        if any(not s > 0.0 for s in self.scales):
            raise ValueError("scales must be positive")

    def apply(self, raw) -> np.ndarray:
        raw = np.asarray(raw, dtype=np.float64)
        return (raw - np.asarray(self.offsets)) / np.asarray(self.scales)

    def invert(self, scaled) -> np.ndarray:
        scaled = np.asarray(scaled, dtype=np.float64)
        return scaled * np.asarray(self.scales) + np.asarray(self.offsets)

    def to_dict(self) -> dict:
        return {"offsets": list(self.offsets), "scales": list(self.scales)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingRecord":
        return cls(offsets=tuple(d["offsets"]), scales=tuple(d["scales"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ScalingRecord":
        return cls.from_dict(json.loads(Path(path).read_text()))


def scale_columns(raw) -> tuple[DataMatrix, ScalingRecord]:
    """Map each column affinely onto [-1, 1]; constant columns map to 0."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.size == 0:
        raise ValueError(f"expected a non-empty 2-D array, got shape {raw.shape}")
    highs = raw.max(axis=0)
    lows = raw.min(axis=0)
    offsets = np.where(highs == lows, highs, 0.5 * (highs + lows))
    scales = np.where(highs == lows, 1.0, 0.5 * (highs - lows))
    scaled = (raw - offsets) / scales
    # the affine endpoints are exact up to rounding; never exceed the contract
    np.clip(scaled, -1.0, 1.0, out=scaled)
    return DataMatrix(scaled), ScalingRecord(tuple(offsets), tuple(scales))


def read_numeric_csv(path):
    """Read a rectangular numeric CSV, auto-detecting an optional header row.

    Returns (array, header_or_None).  Raises ParseError naming the first bad
    cell, ValueError on an empty or ragged file.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty file")

    def parse_row(cells, row_number):
        out = []
        for j, cell in enumerate(cells):
            try:
                out.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric cell at row {row_number}, column {j + 1}: {cell!r}"
                ) from None
        return out

    header = None
    data_rows = rows
    try:
        parse_row(rows[0], 1)
    except ParseError:
        header = [c.strip() for c in rows[0]]
        data_rows = rows[1:]
        if not data_rows:
            raise ValueError(f"{path}: no data rows below the header") from None

    first_number = 2 if header else 1
    data = []
    width = None
    for k, cells in enumerate(data_rows):
        row = parse_row(cells, k + first_number)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ValueError(
                f"{path}: ragged row {k + first_number} (expected {width} cells, got {len(row)})"
            )
        data.append(row)
    return np.asarray(data, dtype=np.float64), header


def ingest_csv(path):
    """Ingest a CSV file: returns (DataMatrix, ScalingRecord, header)."""
    raw, header = read_numeric_csv(path)
    matrix, record = scale_columns(raw)
    return matrix, record, header
