"""Scattered sample container and CSV round-trip.

CSV schema: header row ``x1,...,xd,value``, one row per sampling location.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError

__all__ = ["SampleData", "read_sample_csv", "write_sample_csv"]


@dataclass(frozen=True)
class SampleData:
    """n sampling locations in R^d with one scalar value each."""

    locations: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        loc = np.atleast_2d(np.asarray(self.locations, dtype=float))
        val = np.asarray(self.values, dtype=float).ravel()
        if loc.shape[0] != val.shape[0]:
            raise ValueError("locations and values must have equal length")
        if loc.shape[0] < 2:
            raise DegenerateDataError("need at least two sampling locations")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "values", val)

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    @property
    def d(self) -> int:
        return self.locations.shape[1]


def read_sample_csv(path) -> SampleData:
    """Read ``x1..xd,value`` CSV into a SampleData."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: empty file")
        header = [c.strip() for c in header]
        if header[-1] != "value" or not all(
            c == f"x{i + 1}" for i, c in enumerate(header[:-1])
        ):
            raise ValueError(
                f"{path}: expected header x1,...,xd,value, got {header}"
            )
        rows = [[float(c) for c in row] for row in reader if row]
    if len(rows) < 2:
        raise DegenerateDataError(f"{path}: need at least two data rows")
    arr = np.asarray(rows, dtype=float)
    return SampleData(locations=arr[:, :-1], values=arr[:, -1])


def write_sample_csv(path, data: SampleData, fmt: str = "%.9g") -> None:
    """Write a SampleData to CSV with the standard header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(data.d)] + ["value"])
        for loc, val in zip(data.locations, data.values):
            writer.writerow([fmt % c for c in loc] + [fmt % val])
