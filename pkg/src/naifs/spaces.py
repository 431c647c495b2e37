"""Compact metric spaces (interval, circle, d-torus) and finite grids.

The interval is [0,1] with |x-y|; the circle is R/Z with the wrap-around metric
min(|x-y|, 1-|x-y|) (so no two points are farther than 1/2 apart); the d-torus
carries the sup over coordinates of circle distances.  The sup metric keeps
dynamical balls products of arcs, which makes exact ball enumeration on grids
cheap; entropy and pressure do not depend on this choice in the eps -> 0 limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

KINDS = ("interval", "circle", "torus")


@dataclass(frozen=True)
class Space:
    kind: str
    dim: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown space kind {self.kind!r}")
        if self.kind in ("interval", "circle") and self.dim != 1:
            raise InputError(f"{self.kind} space is one-dimensional")
        if self.dim < 1:
            raise InputError("dimension must be >= 1")

    @property
    def wrap(self) -> bool:
        return self.kind in ("circle", "torus")

    @property
    def diameter(self) -> float:
        # sup metric: every wrapped coordinate contributes at most 1/2
        return 1.0 if self.kind == "interval" else 0.5

    def canonicalize(self, x) -> np.ndarray:
        """Return the canonical representative of ``x`` as a float64 (dim,) array."""
        p = np.atleast_1d(np.asarray(x, dtype=np.float64)).reshape(-1)
        if p.shape[0] != self.dim:
            raise InputError(f"point has {p.shape[0]} coordinates, space has {self.dim}")
        return self.canonicalize_array(p.reshape(1, -1))[0]

    def canonicalize_array(self, pts: np.ndarray) -> np.ndarray:
        """Canonicalize an (N, dim) array of points in place-safe fashion."""
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise InputError(f"expected (N, {self.dim}) array, got {pts.shape}")
        if self.wrap:
            out = np.mod(pts, 1.0)
            # mod of tiny negatives can round to 1.0 exactly
            out[out >= 1.0] = 0.0
            return out
        if np.any(pts < -1e-12) or np.any(pts > 1.0 + 1e-12):
            raise InputError("interval point outside [0, 1]")
        return np.clip(pts, 0.0, 1.0)


def coordinate_distances(space: Space, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise sup-metric distances between broadcastable point arrays."""
    delta = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    if space.wrap:
        delta = np.minimum(delta, 1.0 - delta)
    return delta.max(axis=-1)


def distance(space: Space, x, y) -> float:
    """Metric distance between two points of ``space``."""
    a = space.canonicalize(x)
    b = space.canonicalize(y)
    return float(coordinate_distances(space, a, b))


@dataclass(frozen=True)
class Grid:
    """Uniform lattice used as the finite computational proxy for the space.

    Points are sorted lexicographically by coordinates, so iteration order (and
    everything downstream that scans "in grid order") is deterministic.
    """

    space: Space
    h: float
    spacing: float
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.points.setflags(write=False)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def index_array(self) -> np.ndarray:
        return np.arange(self.size, dtype=np.int64)


def grid_points(space: Space, h: float) -> Grid:
    """Uniform grid with per-coordinate spacing <= h covering the space.

    Interval grids include both endpoints; circle/torus grids drop the
    duplicate 1 == 0.
    """
    if not (h > 0.0):
        raise InputError("grid mesh h must be positive")
    if h > space.diameter:
        raise InputError("grid mesh h exceeds the space diameter")
    cells = int(np.ceil(1.0 / h - 1e-12))
    spacing = 1.0 / cells
    if space.kind == "interval":
        axis = np.arange(cells + 1, dtype=np.float64) * spacing
        axis[-1] = 1.0
    else:
        axis = np.arange(cells, dtype=np.float64) * spacing
    if space.dim == 1:
        pts = axis.reshape(-1, 1)
    else:
        mesh = np.meshgrid(*([axis] * space.dim), indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    return Grid(space=space, h=float(h), spacing=float(spacing), points=pts)


def ball_points(grid: Grid, center, r: float) -> np.ndarray:
    """Grid points strictly within distance r of ``center`` (open ball)."""
    if not (r > 0.0):
        raise InputError("ball radius must be positive")
    c = grid.space.canonicalize(center)
    d = coordinate_distances(grid.space, grid.points, c.reshape(1, -1))
    return grid.points[d < r]


def ball_indices(grid: Grid, center, r: float, closed: bool = False) -> np.ndarray:
    """Indices of grid points within r of ``center``; closed=True uses <=."""
    if not (r > 0.0):
        raise InputError("ball radius must be positive")
    c = grid.space.canonicalize(center)
    d = coordinate_distances(grid.space, grid.points, c.reshape(1, -1))
    mask = (d <= r) if closed else (d < r)
    return np.nonzero(mask)[0].astype(np.int64)
