"""Discrete phase space: uniform tensor grids, fields and L^p norms.

A field stores samples at the grid nodes only. Values outside the domain
are zero by construction, so every integral over R^N reduces to a
quadrature over the grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np


class NonFiniteFieldError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


def _as_tuple(value, dimension: int, cast) -> tuple:
    if np.ndim(value) == 0:
        return (cast(value),) * dimension
    out = tuple(cast(v) for v in value)
    if len(out) != dimension:
        raise ValueError(f"expected {dimension} entries, got {len(out)}")
    return out


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on ``[0, L_1] x ... x [0, L_d]`` with trapezoid weights.

    Nodes include the end points of each axis; boundary weights are half the
    interior spacing, so ``weights.sum()`` is the domain measure.
    """

    extent: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        if len(self.extent) != len(self.points) or len(self.extent) not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if any(e <= 0 or not math.isfinite(e) for e in self.extent):
            raise ValueError("extent must be positive and finite")
        if any(n < 2 for n in self.points):
            raise ValueError("need at least 2 points per axis")

    @classmethod
    def uniform(cls, extent=1.0, points=256, dimension: int | None = None) -> "Grid":
        if dimension is None:
            dimension = max(np.size(extent), np.size(points))
        return cls(_as_tuple(extent, dimension, float), _as_tuple(points, dimension, int))

    @property
    def dimension(self) -> int:
        return len(self.points)

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (n - 1) for L, n in zip(self.extent, self.points))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(0.0, L, n) for L, n in zip(self.extent, self.points))

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dimension)``, lexicographic order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        out = np.stack([m.ravel() for m in mesh], axis=-1)
        out.flags.writeable = False
        return out

    @cached_property
    def weights(self) -> np.ndarray:
        per_axis = []
        for h, n in zip(self.spacing, self.points):
            w = np.full(n, h)
            w[0] = w[-1] = 0.5 * h
            per_axis.append(w)
        w = per_axis[0]
        for other in per_axis[1:]:
            w = np.outer(w, other).ravel()
        w = np.ascontiguousarray(w)
        w.flags.writeable = False
        return w

    @property
    def measure(self) -> float:
        return float(np.prod(self.extent))

    def norm(self, values: np.ndarray, p: float = 2.0) -> np.ndarray | float:
        """Discrete L^p norm along the last axis of ``values``."""
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise NonFiniteFieldError("non-finite field")
        if p < 1:
            raise ValueError("p must be >= 1")
        a = np.abs(values)
        if math.isinf(p):
            out = a.max(axis=-1)
        elif p == 1:
            out = np.sum(self.weights * a, axis=-1)
        else:
            # scale by the max entry so |u|^p neither underflows nor overflows
            m = a.max(axis=-1, keepdims=True)
            s = np.where(m > 0, m, 1.0)
            r = a / s
            inner = np.sum(self.weights * r * r, axis=-1) if p == 2 else \
                np.sum(self.weights * r**p, axis=-1)
            out = s[..., 0] * (np.sqrt(inner) if p == 2 else inner ** (1.0 / p))
        return float(out) if np.ndim(out) == 0 else out

    def same_as(self, other: "Grid") -> bool:
        return self is other or (self.extent == other.extent and self.points == other.points)

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and self.same_as(other)

    def __hash__(self) -> int:
        return hash((self.extent, self.points))

    def field(self, values) -> "Field":
        return Field(self, values)

    def sample(self, fn) -> "Field":
        """Field from a function of the node coordinate array ``(size, d)``."""
        x = self.nodes[:, 0] if self.dimension == 1 else self.nodes
        return Field(self, np.broadcast_to(fn(x), (self.size,)))

    def constant(self, c: float) -> "Field":
        return Field(self, np.full(self.size, float(c)))


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function in X_p at the nodes of ``grid``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if v.size != self.grid.size:
            raise ValueError(f"field has {v.size} values for {self.grid.size} nodes")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise NonFiniteFieldError(f"non-finite field (node {bad})")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def _check(self, other: "Field"):
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, alpha: float) -> "Field":
        return Field(self.grid, float(alpha) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def __len__(self) -> int:
        return self.values.size


def lp_norm(u: Field, p: float = 2.0) -> float:
    """``(sum_i w_i |u_i|^p)^(1/p)`` with the grid's trapezoid weights."""
    return u.grid.norm(u.values, p)


def lp_distance(u: Field, v: Field, p: float = 2.0) -> float:
    if not u.grid.same_as(v.grid):
        raise GridMismatchError("fields live on different grids")
    return u.grid.norm(u.values - v.values, p)


def sup_norm_gap(u: Field, v: Field) -> float:
    if not u.grid.same_as(v.grid):
        raise GridMismatchError("fields live on different grids")
    return float(np.max(np.abs(u.values - v.values)))


def write_field_csv(u: Field, path) -> None:
    """Write ``x[,y],value`` rows in node order with 17 significant digits."""
    grid = u.grid
    header = ["x", "value"] if grid.dimension == 1 else ["x", "y", "value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for coord, val in zip(grid.nodes, u.values):
            w.writerow([format(c, ".17g") for c in coord] + [format(val, ".17g")])


def read_field_csv(path, grid: Grid) -> Field:
    """Inverse of :func:`write_field_csv`; coordinates must match ``grid``."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    expected = ["x", "value"] if grid.dimension == 1 else ["x", "y", "value"]
    if [h.strip() for h in rows[0]] != expected:
        raise ValueError(f"bad field header {rows[0]!r}, expected {expected!r}")
    body = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    if body.shape[0] != grid.size:
        raise GridMismatchError(f"{body.shape[0]} rows for {grid.size} nodes")
    scale = max(grid.extent)
    if np.max(np.abs(body[:, :-1] - grid.nodes)) > 1e-9 * scale:
        raise GridMismatchError("node coordinates do not match grid")
    return Field(grid, body[:, -1])


def stack_values(fields: Sequence[Field]) -> np.ndarray:
    grid = fields[0].grid
    for f in fields[1:]:
        if not f.grid.same_as(grid):
            raise GridMismatchError("fields live on different grids")
    return np.stack([f.values for f in fields])
