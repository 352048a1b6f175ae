"""Uniform space-time grids, sampled fields and the Grid Field text format.

Field values are stored as a numpy array of shape ``(n_snapshots, M)`` in 1D
and ``(n_snapshots, M, M)`` in 2D.  Array axis 1 is ``x`` (``i1``) and axis 2
is ``y`` (``i2``), so C-order flattening of a snapshot enumerates spatial
nodes with ``i1`` slowest.  Every regression row therefore decodes as
``(n, i1, ..., id)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_REL_TOL = 1e-12


class GridError(ValueError):
    """Raised for invalid grids, fields or malformed Grid Field files."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform isotropic grid on ``[0, T] x [0, X]^d``."""

    d: int
    M: int
    N: int
    dx: float
    dt: float
    X: float
    T: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise GridError(f"spatial dimension must be 1 or 2, got {self.d}")
        if self.M < 5:
            raise GridError(f"need at least 5 points per axis, got M={self.M}")
        # N >= 1 (not 2) so that derivative fields over times 0..N-1 can reuse this type
        if self.N < 1:
            raise GridError(f"need at least one time step, got N={self.N}")
        for name in ("dx", "dt", "X", "T"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise GridError(f"{name} must be positive and finite, got {v}")
        if abs(self.dx * (self.M - 1) - self.X) > _REL_TOL * self.X:
            raise GridError("dx*(M-1) does not match X")
        if abs(self.dt * self.N - self.T) > _REL_TOL * self.T:
            raise GridError("dt*N does not match T")

    @classmethod
    def from_extent(cls, d: int, M: int, N: int, X: float, T: float) -> "SpaceTimeGrid":
        return cls(d=d, M=M, N=N, dx=X / (M - 1), dt=T / N, X=X, T=T)

    @classmethod
    def from_spacing(cls, d: int, M: int, N: int, dx: float, dt: float) -> "SpaceTimeGrid":
        return cls(d=d, M=M, N=N, dx=dx, dt=dt, X=dx * (M - 1), T=dt * N)

    @property
    def n_nodes(self) -> int:
        """Number of spatial nodes, ``M**d``."""
        return self.M**self.d

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return (self.M,) * self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N + 1,) + self.spatial_shape

    @property
    def cell_volume(self) -> float:
        """``dx**d * dt``, the weight of the grid-dependent L2 norm."""
        return self.dx**self.d * self.dt

    def coordinates(self) -> np.ndarray:
        """1D node coordinates along any spatial axis."""
        return np.arange(self.M) * self.dx

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Spatial meshgrid with ``indexing='ij'`` (x varies along axis 0)."""
        x = self.coordinates()
        return tuple(np.meshgrid(*([x] * self.d), indexing="ij"))

    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt

    def truncated(self) -> "SpaceTimeGrid":
        """Grid of times ``0..N-1``, where forward time differences live."""
        return SpaceTimeGrid.from_spacing(self.d, self.M, self.N - 1, self.dx, self.dt)

    def to_header(self) -> dict:
        return {"d": self.d, "M": self.M, "N": self.N, "dx": self.dx,
                "dt": self.dt, "X": self.X, "T": self.T}


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples over a grid, time-major.  Immutable once built."""

    grid: SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise GridError(f"field shape {v.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def snapshot(self, n: int) -> "Snapshot":
        if not 0 <= n <= self.grid.N:
            raise IndexError(f"time index {n} outside 0..{self.grid.N}")
        return Snapshot(self.grid, n, self.values[n])

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def __eq__(self, other):
        if not isinstance(other, Field):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Field values at a single time index (spatial shape, not flattened)."""

    grid: SpaceTimeGrid
    time_index: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(self.grid.spatial_shape)
        if not 0 <= self.time_index <= self.grid.N:
            raise GridError(f"time index {self.time_index} outside 0..{self.grid.N}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def vector(self) -> np.ndarray:
        return self.values.reshape(-1)


def vectorize(field: Field, first_time: int, last_time: int) -> np.ndarray:
    """Stack snapshots ``first_time..last_time`` (inclusive) time-major."""
    if not 0 <= first_time <= last_time <= field.grid.N:
        raise IndexError(
            f"time range ({first_time}, {last_time}) invalid for N={field.grid.N}")
    return field.values[first_time:last_time + 1].reshape(-1).copy()


def grid_norm(values: np.ndarray, grid: SpaceTimeGrid) -> float:
    """Grid-dependent L2 norm ``sqrt(dx^d dt) * ||values||_2``."""
    return math.sqrt(grid.cell_volume) * float(np.linalg.norm(np.ravel(values)))


def write_field(field: Field, path) -> None:
    """Write ``field`` in the Grid Field format (JSON header + CSV rows)."""
    lines = [json.dumps(field.grid.to_header())]
    for snap in field.values.reshape(field.grid.N + 1, -1):
        lines.append(",".join(format(v, ".17g") for v in snap))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_field(path) -> Field:
    """Parse a Grid Field file; raises :class:`GridError` on any violation."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GridError("empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise GridError(f"malformed header: {exc}") from None
    keys = ("d", "M", "N", "dx", "dt", "X", "T")
    if not isinstance(header, dict) or any(k not in header for k in keys):
        raise GridError(f"header must be a JSON object with keys {keys}")
    try:
        grid = SpaceTimeGrid(d=int(header["d"]), M=int(header["M"]), N=int(header["N"]),
                             dx=float(header["dx"]), dt=float(header["dt"]),
                             X=float(header["X"]), T=float(header["T"]))
    except (TypeError, ValueError) as exc:
        raise GridError(f"malformed header: {exc}") from None
    rows = lines[1:]
    if len(rows) != grid.N + 1:
        raise GridError(f"expected {grid.N + 1} snapshot lines, found {len(rows)}")
    values = np.empty((grid.N + 1, grid.n_nodes))
    for n, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != grid.n_nodes:
            raise GridError(
                f"snapshot {n}: expected {grid.n_nodes} values, found {len(parts)}")
        try:
            values[n] = [float(p) for p in parts]
        except ValueError as exc:
            raise GridError(f"snapshot {n}: {exc}") from None
    if not np.all(np.isfinite(values)):
        raise GridError("file contains non-finite values")
    return Field(grid, values.reshape(grid.shape))
