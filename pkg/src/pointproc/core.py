"""Shared domain types for point-process simulation and analysis.

Coordinates are planar Cartesian and times are non-negative reals.  All
container types validate their invariants at construction and freeze
their arrays afterwards, so instances can be shared freely.  Randomness
is funnelled through :class:`RngStream`, which owns a seeded generator:
one stream per logical simulation, never shared between concurrent
consumers.  Parallel work derives child streams with
:meth:`RngStream.substream`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CountGrid",
    "DegenerateDataError",
    "EnvelopeError",
    "EventTimes",
    "GridSpec",
    "InsufficientDataError",
    "ParameterError",
    "Region",
    "RngStream",
    "SpaceTimeEvents",
    "SpatialPattern",
    "exponential_draw",
    "inter_arrival_times",
]

class ParameterError(ValueError):
    """A parameter violates an operation's preconditions."""


class EnvelopeError(RuntimeError):
    """A dominating envelope was found to under-estimate the intensity."""


class InsufficientDataError(ValueError):
    """Too few points or events for the requested statistic."""


class DegenerateDataError(ValueError):
    """The data admits no meaningful value for the requested statistic."""


class RngStream:
    """Deterministic random stream: same seed, same draw sequence.

    ``uniform`` draws lie strictly inside (0, 1), so ``-log(u)`` is
    always finite; the thinning simulators rely on that.  Substreams are
    derived as ``seed + index`` (mod 2**64) and are safe to hand to
    parallel replicates as long as each index is used once.
    """

    def __init__(self, seed: int):
        self.seed = int(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF))
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return f"RngStream(seed={self.seed})"

    def uniform(self) -> float:
        u = self._gen.random()
        while u == 0.0:  # random() covers [0, 1); keep the interval open
            u = self._gen.random()
        return u

    def uniforms(self, low: float, high: float, n: int) -> np.ndarray:
        return self._gen.uniform(low, high, int(n))

    def poisson(self, mean: float) -> int:
        return int(self._gen.poisson(mean))

    def multinomial(self, n: int, pvals) -> np.ndarray:
        return self._gen.multinomial(int(n), np.asarray(pvals, dtype=float))

    def substream(self, index: int) -> "RngStream":
        return RngStream((self.seed + int(index)) & 0xFFFFFFFFFFFFFFFF)


def exponential_draw(rng: RngStream, rate: float) -> float:
    """One Exp(rate) variate via inversion, -log(u)/rate."""
    rate = float(rate)
    if not math.isfinite(rate) or rate <= 0.0:
        raise ParameterError(f"rate must be positive and finite, got {rate}")
    return -math.log(rng.uniform()) / rate


def inter_arrival_times(events: "EventTimes") -> np.ndarray:
    """Gaps between consecutive events, the first measured from zero."""
    return np.diff(events.times, prepend=0.0)


class EventTimes:
    """An ordered realization of a temporal point process on (0, horizon]."""

    def __init__(self, times, horizon: float):
        arr = np.array(times, dtype=float).reshape(-1)
        horizon = float(horizon)
        if not (math.isfinite(horizon) and horizon > 0.0):
            raise ParameterError(f"horizon must be positive and finite, got {horizon}")
        if arr.size:
            if not np.all(np.isfinite(arr)):
                raise ParameterError("event times must be finite")
            if arr[0] <= 0.0 or arr[-1] > horizon:
                raise ParameterError("event times must lie in (0, horizon]")
            if np.any(np.diff(arr) <= 0.0):
                raise ParameterError("event times must be strictly increasing")
        arr.setflags(write=False)
        self.times = arr
        self.horizon = horizon

    def __len__(self) -> int:
        return self.times.size

    def __repr__(self):
        return f"EventTimes(n={len(self)}, horizon={self.horizon})"

    def count_by(self, t: float) -> int:
        """N_t, the number of events in (0, t]."""
        return int(np.searchsorted(self.times, t, side="right"))


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangular study region."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        for name in ("xmin", "xmax", "ymin", "ymax"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not all(map(math.isfinite, (self.xmin, self.xmax, self.ymin, self.ymax))):
            raise ParameterError("region bounds must be finite")
        if self.xmax <= self.xmin or self.ymax <= self.ymin:
            raise ParameterError("region must have positive width and height")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, x, y):
        """Vectorized inclusive containment test."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)

    def covers(self, other: "Region") -> bool:
        return (
            self.xmin <= other.xmin
            and self.xmax >= other.xmax
            and self.ymin <= other.ymin
            and self.ymax >= other.ymax
        )


@dataclass(frozen=True)
class GridSpec:
    """Regular nx-by-ny partition of a region.

    Cells are half-open, [x0, x1) x [y0, y1), except that the final row
    and column are closed so the grid tiles the region exactly.
    """

    region: Region
    nx: int
    ny: int

    def __post_init__(self):
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        if self.nx < 1 or self.ny < 1:
            raise ParameterError("grid must have at least one cell per axis")

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_width(self) -> float:
        return self.region.width / self.nx

    @property
    def cell_height(self) -> float:
        return self.region.height / self.ny

    @property
    def cell_area(self) -> float:
        return self.cell_width * self.cell_height

    def x_centres(self) -> np.ndarray:
        r = self.region
        return r.xmin + (np.arange(self.nx) + 0.5) * self.cell_width

    def y_centres(self) -> np.ndarray:
        r = self.region
        return r.ymin + (np.arange(self.ny) + 0.5) * self.cell_height

    def centre_points(self) -> np.ndarray:
        """Cell centres as an (ncells, 2) array, x-major (iy varies fastest)."""
        cx, cy = np.meshgrid(self.x_centres(), self.y_centres(), indexing="ij")
        return np.column_stack([cx.ravel(), cy.ravel()])

    def cell_indices(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Map points to (ix, iy) cell indices under the half-open rule.

        Raises ParameterError listing the offending point indices when
        any point falls outside the region.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        r = self.region
        with np.errstate(invalid="ignore"):
            ix = np.floor((x - r.xmin) / self.cell_width).astype(np.int64)
            iy = np.floor((y - r.ymin) / self.cell_height).astype(np.int64)
        # the closing edges belong to the last row/column
        ix = np.where((ix >= self.nx) & (x <= r.xmax), self.nx - 1, ix)
        iy = np.where((iy >= self.ny) & (y <= r.ymax), self.ny - 1, iy)
        bad = ~self.region.contains(x, y) | ~np.isfinite(x) | ~np.isfinite(y)
        if np.any(bad):
            where = np.flatnonzero(bad).tolist()
            raise ParameterError(f"points outside grid region at indices {where}")
        return ix, iy


class SpatialPattern:
    """A finite planar point pattern observed in a rectangular region."""

    def __init__(self, points, region: Region):
        pts = np.array(points, dtype=float)
        if pts.size == 0:
            pts = np.empty((0, 2))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ParameterError(f"points must be (n, 2), got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("point coordinates must be finite")
        if pts.shape[0] and not np.all(region.contains(pts[:, 0], pts[:, 1])):
            outside = np.flatnonzero(~region.contains(pts[:, 0], pts[:, 1])).tolist()
            raise ParameterError(f"points outside region at indices {outside}")
        pts.setflags(write=False)
        self.points = pts
        self.region = region

    def __len__(self) -> int:
        return self.points.shape[0]

    def __repr__(self):
        return f"SpatialPattern(n={len(self)}, region={self.region})"

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def intensity(self) -> float:
        """Empirical intensity n / area."""
        return len(self) / self.region.area


class SpaceTimeEvents:
    """Events with planar coordinates and occurrence times in [0, horizon]."""

    def __init__(self, events, region: Region, horizon: float):
        arr = np.array(events, dtype=float)
        if arr.size == 0:
            arr = np.empty((0, 3))
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ParameterError(f"events must be (n, 3) as (x, y, t), got shape {arr.shape}")
        horizon = float(horizon)
        if not (math.isfinite(horizon) and horizon > 0.0):
            raise ParameterError(f"horizon must be positive and finite, got {horizon}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("event coordinates must be finite")
        if arr.shape[0]:
            inside = region.contains(arr[:, 0], arr[:, 1])
            if not np.all(inside):
                raise ParameterError(
                    f"events outside region at indices {np.flatnonzero(~inside).tolist()}"
                )
            t = arr[:, 2]
            if np.any(t < 0.0) or np.any(t > horizon):
                bad = np.flatnonzero((t < 0.0) | (t > horizon)).tolist()
                raise ParameterError(f"event times outside [0, horizon] at indices {bad}")
        arr.setflags(write=False)
        self.xy = arr[:, :2]
        self.t = arr[:, 2]
        self.region = region
        self.horizon = horizon

    def __len__(self) -> int:
        return self.xy.shape[0]

    def __repr__(self):
        return f"SpaceTimeEvents(n={len(self)}, horizon={self.horizon})"

    def spatial(self) -> SpatialPattern:
        """Drop the time marks."""
        return SpatialPattern(self.xy, self.region)


class CountGrid:
    """Non-negative integer counts on a grid."""

    def __init__(self, spec: GridSpec, counts):
        arr = np.array(counts)
        if arr.shape != (spec.nx, spec.ny):
            raise ParameterError(
                f"counts shape {arr.shape} does not match grid ({spec.nx}, {spec.ny})"
            )
        if not np.issubdtype(arr.dtype, np.integer):
            as_int = arr.astype(np.int64)
            if not np.array_equal(as_int, arr):
                raise ParameterError("counts must be integers")
            arr = as_int
        else:
            arr = arr.astype(np.int64)
        if np.any(arr < 0):
            raise ParameterError("counts must be non-negative")
        arr.setflags(write=False)
        self.spec = spec
        self.counts = arr

    def __repr__(self):
        return f"CountGrid({self.spec.nx}x{self.spec.ny}, total={self.total})"

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def indexed_map(fn, count: int, threads: int = 1) -> list:
    """Run fn(0..count-1), returning results in index order.

    With threads > 1 the calls run on a thread pool; results are still
    collected by index, so reductions over them are order-stable.
    """
    threads = max(1, int(threads))
    if threads == 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))
