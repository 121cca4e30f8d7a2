"""Weighted samples of a scalar function."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DomainError


@dataclass
class SampledScalarField:
    """Values at points, each carrying the measure of the cell it represents.

    ``points`` may be ``None`` when only the distribution of the values
    matters (abstract step functions).
    """

    values: np.ndarray
    weights: np.ndarray
    points: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        self.weights = np.broadcast_to(np.asarray(self.weights, dtype=float), self.values.shape).copy()
        if np.any(self.weights <= 0):
            raise DomainError("sample weights must be positive")
        if self.points is not None:
            self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
            if len(self.points) != len(self.values):
                raise DomainError("points and values differ in length")

    @classmethod
    def uniform(cls, points, values, domain_measure: float) -> "SampledScalarField":
        """N samples of a domain of the given measure, weight ``measure / N`` each."""
        values = np.asarray(values, dtype=float).ravel()
        if domain_measure <= 0 or len(values) == 0:
            raise DomainError("need a positive domain measure and at least one sample")
        return cls(values, np.full(len(values), domain_measure / len(values)), points)

    @property
    def domain_measure(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.values)

    def map(self, fn) -> "SampledScalarField":
        return SampledScalarField(fn(self.values), self.weights, self.points)

    def integral(self) -> float:
        return float(np.dot(self.weights, self.values))

    def to_csv(self, path) -> None:
        path = Path(path)
        dim = 0 if self.points is None else self.points.shape[1]
        with path.open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow([f"x{i + 1}" for i in range(dim)] + ["value", "weight"])
            for k in range(len(self)):
                coords = [] if self.points is None else [repr(float(c)) for c in self.points[k]]
                out.writerow(coords + [repr(float(self.values[k])), repr(float(self.weights[k]))])

    @classmethod
    def from_csv(cls, path) -> "SampledScalarField":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        dim = len(header) - 2
        points = body[:, :dim] if dim else None
        return cls(body[:, dim], body[:, dim + 1], points)
