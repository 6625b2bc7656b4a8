"""Density and distance statistics for planar point patterns.

All statistics are edge-uncorrected unless stated otherwise; the Monte
Carlo envelope applies the identical estimator to CSR replicates, so
rank comparisons against the envelope are unaffected by edge bias.
Distance queries go through a k-d tree; counts of neighbours within a
radius use the closed ball (distance <= r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .core import (
    CountGrid,
    DegenerateDataError,
    GridSpec,
    InsufficientDataError,
    ParameterError,
    Region,
    RngStream,
    SpatialPattern,
    indexed_map,
)

__all__ = [
    "DensitySurface",
    "EnvelopeResult",
    "NNI_MAX_HEX",
    "QuadratResult",
    "csr_envelope",
    "dispersion_by_block",
    "f_function",
    "g_function",
    "kde_surface",
    "mean_min_distance",
    "nni",
    "quadrat_counts",
    "ripleys_k",
    "simulate_csr",
]

# diameter of the densest possible arrangement relative to random:
# perfectly hexagonal packing; nni values live in [0, ~2.149]
NNI_MAX_HEX = 2.0 * math.sqrt(2.0 / math.sqrt(3.0))


def simulate_csr(rate: float, region: Region, rng: RngStream) -> SpatialPattern:
    """Complete spatial randomness: Poisson count, uniform placement."""
    rate = float(rate)
    if not (math.isfinite(rate) and rate > 0.0):
        raise ParameterError(f"rate must be positive, got {rate}")
    n = rng.poisson(rate * region.area)
    xs = rng.uniforms(region.xmin, region.xmax, n)
    ys = rng.uniforms(region.ymin, region.ymax, n)
    return SpatialPattern(np.column_stack([xs, ys]), region)


class DensitySurface:
    """Per-cell density values on a grid."""

    def __init__(self, spec: GridSpec, values):
        arr = np.array(values, dtype=float)
        if arr.shape != (spec.nx, spec.ny):
            raise ParameterError(
                f"values shape {arr.shape} does not match grid ({spec.nx}, {spec.ny})"
            )
        arr.setflags(write=False)
        self.spec = spec
        self.values = arr

    def __repr__(self):
        return f"DensitySurface({self.spec.nx}x{self.spec.ny})"

    def integral(self) -> float:
        """Total mass: cell area times the sum of the values."""
        return float(self.values.sum() * self.spec.cell_area)


def kde_surface(pattern: SpatialPattern, spec: GridSpec, bandwidth: float) -> DensitySurface:
    """Disc-count density: points within `bandwidth` of each cell centre,
    divided by the disc area pi * bandwidth**2.

    Near the boundary part of the disc hangs outside the region, so the
    surface under-estimates there; its integral over the region is below
    n by exactly the mass the discs lose.
    """
    bandwidth = float(bandwidth)
    if not (math.isfinite(bandwidth) and bandwidth > 0.0):
        raise ParameterError(f"bandwidth must be positive, got {bandwidth}")
    centres = spec.centre_points()
    if len(pattern) == 0:
        counts = np.zeros(spec.ncells)
    else:
        tree = cKDTree(pattern.points)
        counts = tree.query_ball_point(centres, bandwidth, return_length=True)
    vals = counts / (math.pi * bandwidth**2)
    return DensitySurface(spec, np.asarray(vals, dtype=float).reshape(spec.nx, spec.ny))


@dataclass(frozen=True)
class QuadratResult:
    """Chi-square test of equal cell counts."""

    grid: CountGrid
    statistic: float
    dof: int
    p_value: float


def quadrat_counts(pattern: SpatialPattern, spec: GridSpec) -> QuadratResult:
    """Counts per cell plus the chi-square CSR test.

    Statistic: sum (c - cbar)^2 / cbar against chi-square with
    ncells - 1 degrees of freedom.
    """
    if spec.ncells < 2:
        raise DegenerateDataError("quadrat test needs at least two cells")
    counts = _bin_counts(pattern, spec)
    cbar = len(pattern) / spec.ncells
    if cbar == 0.0:
        raise DegenerateDataError("quadrat test needs at least one point")
    statistic = float(((counts - cbar) ** 2).sum() / cbar)
    dof = spec.ncells - 1
    p = float(stats.chi2.sf(statistic, dof))
    return QuadratResult(CountGrid(spec, counts), statistic, dof, p)


def dispersion_by_block(
    pattern: SpatialPattern, spec: GridSpec, block_sizes
) -> list[tuple[int, float]]:
    """Variance-to-mean ratio of counts merged into b-by-b blocks.

    Each block size must divide both grid dimensions.  Values near 1
    indicate randomness at that scale, above 1 clustering, below 1
    regularity.
    """
    base = _bin_counts(pattern, spec)
    out = []
    for b in block_sizes:
        b = int(b)
        if b < 1 or spec.nx % b or spec.ny % b:
            raise ParameterError(
                f"block size {b} must divide grid dimensions ({spec.nx}, {spec.ny})"
            )
        merged = base.reshape(spec.nx // b, b, spec.ny // b, b).sum(axis=(1, 3))
        if merged.size < 2:
            raise ParameterError(f"block size {b} leaves fewer than two blocks")
        mean = merged.mean()
        if mean == 0.0:
            raise DegenerateDataError("dispersion is undefined for an empty pattern")
        out.append((b, float(merged.var(ddof=1) / mean)))
    return out


def _bin_counts(pattern: SpatialPattern, spec: GridSpec) -> np.ndarray:
    if not spec.region.covers(pattern.region):
        raise ParameterError("grid region must cover the pattern region")
    counts = np.zeros((spec.nx, spec.ny), dtype=np.int64)
    if len(pattern):
        ix, iy = spec.cell_indices(pattern.x, pattern.y)
        np.add.at(counts, (ix, iy), 1)
    return counts


def _nn_distances(points: np.ndarray) -> np.ndarray:
    """Distance from each point to its nearest other point."""
    tree = cKDTree(points)
    d, _ = tree.query(points, k=2)
    return d[:, 1]


def _validate_radii(radii, positive: bool = False) -> np.ndarray:
    arr = np.asarray(radii, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ParameterError("radii must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("radii must be finite")
    if np.any(np.diff(arr) <= 0.0):
        raise ParameterError("radii must be strictly ascending")
    if positive and arr[0] <= 0.0:
        raise ParameterError("radii must be positive")
    if not positive and arr[0] < 0.0:
        raise ParameterError("radii must be non-negative")
    return arr


def g_function(pattern: SpatialPattern, radii) -> np.ndarray:
    """Empirical CDF of nearest-neighbour distances at the given radii."""
    radii = _validate_radii(radii)
    if len(pattern) < 2:
        raise InsufficientDataError("G needs at least two points")
    nnd = _nn_distances(pattern.points)
    return (nnd[:, None] <= radii[None, :]).mean(axis=0)


def f_function(pattern: SpatialPattern, probe_spec: GridSpec, radii) -> np.ndarray:
    """Empty-space function: CDF of probe-to-nearest-point distances.

    Probes are the centres of `probe_spec`.
    """
    radii = _validate_radii(radii)
    if len(pattern) == 0:
        raise InsufficientDataError("F needs at least one point")
    probes = probe_spec.centre_points()
    d, _ = cKDTree(pattern.points).query(probes, k=1)
    return (d[:, None] <= radii[None, :]).mean(axis=0)


def mean_min_distance(pattern: SpatialPattern) -> float:
    """Average nearest-neighbour distance."""
    if len(pattern) < 2:
        raise InsufficientDataError("mean nearest-neighbour distance needs >= 2 points")
    return float(_nn_distances(pattern.points).mean())


def nni(pattern: SpatialPattern) -> float:
    """Nearest-neighbour index: observed mean NN distance over the CSR
    expectation 1 / (2 sqrt(lambda)), lambda estimated as n / area.

    1 is random, 0 fully clustered, ~2.149 a perfect hexagonal lattice.
    """
    d_obs = mean_min_distance(pattern)
    d_exp = 1.0 / (2.0 * math.sqrt(pattern.intensity))
    return d_obs / d_exp


def ripleys_k(pattern: SpatialPattern, radii, correction: str = "none") -> np.ndarray:
    """Ripley's K: mean count of other points within r, over lambda-hat.

    correction="border" averages only over points further than r from
    the region boundary; radii where no such point exists yield NaN.
    """
    radii = _validate_radii(radii, positive=True)
    if correction not in ("none", "border"):
        raise ParameterError(f"correction must be 'none' or 'border', got {correction!r}")
    if len(pattern) < 2:
        raise InsufficientDataError("K needs at least two points")
    lam = pattern.intensity
    pts = pattern.points
    tree = cKDTree(pts)
    if correction == "border":
        r = pattern.region
        depth = np.minimum.reduce(
            [pts[:, 0] - r.xmin, r.xmax - pts[:, 0], pts[:, 1] - r.ymin, r.ymax - pts[:, 1]]
        )
    out = np.empty(radii.size)
    for j, rad in enumerate(radii):
        neighbours = tree.query_ball_point(pts, rad, return_length=True) - 1
        if correction == "border":
            keep = depth > rad
            out[j] = neighbours[keep].mean() / lam if np.any(keep) else math.nan
        else:
            out[j] = neighbours.mean() / lam
    return out


@dataclass(frozen=True)
class EnvelopeResult:
    """Observed summary curve with pointwise simulation extremes."""

    radii: np.ndarray
    observed: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    nsim: int

    def __post_init__(self):
        for name in ("radii", "observed", "lower", "upper"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.radii.size
        if any(getattr(self, k).size != n for k in ("observed", "lower", "upper")):
            raise ParameterError("curve arrays must share the radii length")
        ok = np.isfinite(self.lower) & np.isfinite(self.upper)
        if not np.all(self.lower[ok] <= self.upper[ok]):
            raise ParameterError("envelope lower bound exceeds upper bound")

    def outside(self) -> np.ndarray:
        """Boolean mask of radii where the observed curve escapes the band."""
        return (self.observed < self.lower) | (self.observed > self.upper)


def csr_envelope(
    pattern: SpatialPattern,
    statistic: str,
    radii,
    nsim: int,
    rng: RngStream,
    *,
    correction: str = "none",
    probe_spec: GridSpec | None = None,
    threads: int = 1,
) -> EnvelopeResult:
    """Pointwise min/max envelope of a summary statistic under CSR.

    Replicates are CSR with the pattern's empirical intensity; each uses
    substream i+1 of `rng`, so results do not depend on thread count.
    With the minimum nsim=19, a pointwise exceedance is a 2/20 = 0.1
    two-sided test at each radius.
    """
    statistic = str(statistic).lower()
    if statistic not in ("g", "f", "k"):
        raise ParameterError(f"statistic must be one of 'g', 'f', 'k', got {statistic!r}")
    nsim = int(nsim)
    if nsim < 19:
        raise ParameterError(f"nsim must be at least 19, got {nsim}")
    radii_arr = _validate_radii(radii, positive=(statistic == "k"))
    if statistic == "f" and probe_spec is None:
        raise ParameterError("the F statistic needs a probe_spec")
    if len(pattern) == 0:
        raise InsufficientDataError("envelope needs a non-empty pattern")

    def evaluate(pat: SpatialPattern) -> np.ndarray:
        if statistic == "g":
            return g_function(pat, radii_arr)
        if statistic == "f":
            return f_function(pat, probe_spec, radii_arr)
        return ripleys_k(pat, radii_arr, correction=correction)

    observed = evaluate(pattern)
    lam = pattern.intensity
    region = pattern.region

    def replicate(i: int) -> np.ndarray:
        sub = rng.substream(i + 1)
        while True:
            pat = simulate_csr(lam, region, sub)
            # a replicate too small for the statistic is redrawn
            if len(pat) >= 2 or statistic == "f" and len(pat) >= 1:
                return evaluate(pat)

    curves = np.stack(indexed_map(replicate, nsim, threads))
    return EnvelopeResult(
        radii_arr, observed, curves.min(axis=0), curves.max(axis=0), nsim
    )
