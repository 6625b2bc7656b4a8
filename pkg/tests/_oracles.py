"""Brute-force O(n^2) references for the spatial statistics.

These deliberately avoid the library's k-d tree: every statistic is
recomputed from a dense pairwise-distance matrix using the same
Euclidean arithmetic (sqrt of the sum of squares), which the production
code must match exactly.
"""

import numpy as np


def pairwise(points: np.ndarray) -> np.ndarray:
    dx = points[:, 0][:, None] - points[:, 0][None, :]
    dy = points[:, 1][:, None] - points[:, 1][None, :]
    return np.sqrt(dx * dx + dy * dy)


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]
    return np.sqrt(dx * dx + dy * dy)


def nn_distances(points: np.ndarray) -> np.ndarray:
    d = pairwise(points)
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1)


def mean_min_distance(points: np.ndarray) -> float:
    return float(nn_distances(points).mean())


def g_function(points: np.ndarray, radii) -> np.ndarray:
    nnd = nn_distances(points)
    return np.array([(nnd <= r).mean() for r in radii])


def f_function(points: np.ndarray, probes: np.ndarray, radii) -> np.ndarray:
    d = cross(probes, points).min(axis=1)
    return np.array([(d <= r).mean() for r in radii])


def ripleys_k(points: np.ndarray, region, radii, correction="none") -> np.ndarray:
    n = len(points)
    lam = n / region.area
    d = pairwise(points)
    np.fill_diagonal(d, np.inf)
    depth = np.minimum.reduce(
        [
            points[:, 0] - region.xmin,
            region.xmax - points[:, 0],
            points[:, 1] - region.ymin,
            region.ymax - points[:, 1],
        ]
    )
    out = np.empty(len(radii))
    for j, r in enumerate(radii):
        counts = (d <= r).sum(axis=1)
        if correction == "border":
            keep = depth > r
            out[j] = counts[keep].mean() / lam if keep.any() else np.nan
        else:
            out[j] = counts.mean() / lam
    return out


def kde_values(points: np.ndarray, centres: np.ndarray, bandwidth: float) -> np.ndarray:
    if len(points) == 0:
        counts = np.zeros(len(centres))
    else:
        counts = (cross(centres, points) <= bandwidth).sum(axis=1)
    return counts / (np.pi * bandwidth**2)


def gi_star(counts: np.ndarray, centres: np.ndarray, radius: float) -> np.ndarray:
    """Dense-weights GI* reference on flattened counts."""
    x = counts.astype(float)
    n = x.size
    w = (cross(centres, centres) <= radius).astype(float)
    W = w.sum(axis=1)
    S = w @ x
    xbar = x.mean()
    s = x.std()
    var_term = (n * W - W * W) / (n - 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = (S - xbar * W) / (s * np.sqrt(var_term))
    return np.where(W >= n, 0.0, z)
