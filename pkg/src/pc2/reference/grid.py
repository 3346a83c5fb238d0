"""Gridded solver output."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator


@dataclass
class GridSolution:
    """Field values on a tensor grid; ``axes`` is ordered like ``values``' axes."""

    axes: dict
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = {k: np.asarray(v, dtype=np.float64) for k, v in self.axes.items()}
        self.values = np.asarray(self.values, dtype=np.float64)
        shape = tuple(len(v) for v in self.axes.values())
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} does not match axes {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values in grid solution")

    @property
    def names(self) -> list:
        return list(self.axes)

    def interpolate(self, points, method: str = "linear") -> np.ndarray:
        """Values at scattered points (columns ordered like ``axes``)."""
        f = RegularGridInterpolator(tuple(self.axes.values()), self.values, method=method)
        return f(np.atleast_2d(np.asarray(points, dtype=np.float64)))

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes.values(), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def write_csv(self, path, header_lines=()) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(self.names + ["value"])
            for idx in itertools.product(*(range(len(a)) for a in self.axes.values())):
                coords = [repr(float(a[i])) for a, i in zip(self.axes.values(), idx)]
                w.writerow(coords + [repr(float(self.values[idx]))])
        return path
