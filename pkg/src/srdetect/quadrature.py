"""Grids on the statistic axis and trapezoid weights for Stieltjes sums.

The Fredholm discretization integrates functions against differentials
d(b(z)) of monotone weight functions rather than dz, so the trapezoid rule
is expressed through first differences of the sampled weight function b.
The resulting weights telescope: their sum is exactly b[-1] - b[0], which
makes integrate() exact for constant integrands by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [r_min, A] with one node snapped onto r_star.

    nodes[0] == r_min, nodes[-1] == threshold == r_star + gamma, and
    nodes[r_star_index] == r_star exactly (the nearest interior node is
    moved there, so spacing is uniform except around that node).
    """

    nodes: np.ndarray
    r_star_index: int
    threshold: float
    r_min: float

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def r_star(self) -> float:
        return float(self.nodes[self.r_star_index])


def make_grid(r_min: float, r_star: float, gamma: float, n: int) -> Grid:
    """Build an n-point grid on [r_min, r_star + gamma] containing r_star.

    The snap target is clipped to the interior so the endpoints are never
    displaced.  Requires 0 < r_min < r_star and n >= 3.
    """
    if n < 3:
        raise ValueError("grid needs at least 3 nodes")
    if not (0.0 < r_min < r_star):
        raise ValueError("need 0 < r_min < r_star")
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    threshold = r_star + gamma
    nodes = np.linspace(r_min, threshold, n)
    idx = int(np.argmin(np.abs(nodes - r_star)))
    idx = min(max(idx, 1), n - 2)
    nodes[idx] = r_star
    if not np.all(np.diff(nodes) > 0.0):
        raise ValueError("grid nodes are not strictly increasing after snapping")
    return Grid(nodes=nodes, r_star_index=idx, threshold=threshold, r_min=r_min)


@dataclass(frozen=True)
class DiffWeights:
    """Trapezoid weights for sums approximating integral f d(b)."""

    w: np.ndarray
    description: str = ""


def diff_weights(b_values, description: str = "") -> DiffWeights:
    """Trapezoid weights against the differential of sampled b.

    w[0] = (b[1]-b[0])/2, interior w[i] = (b[i+1]-b[i-1])/2, and
    w[-1] = (b[-1]-b[-2])/2; the sum telescopes to b[-1] - b[0].
    """
    b = np.asarray(b_values, dtype=float)
    if b.ndim != 1 or b.size < 3:
        raise ValueError("need a 1-d array of at least 3 sampled values")
    w = np.empty_like(b)
    w[0] = 0.5 * (b[1] - b[0])
    w[1:-1] = 0.5 * (b[2:] - b[:-2])
    w[-1] = 0.5 * (b[-1] - b[-2])
    return DiffWeights(w=w, description=description)


def integrate(a_values, weights: DiffWeights) -> float:
    """Dot product of sampled integrand values with diff weights."""
    a = np.asarray(a_values, dtype=float)
    if a.shape != weights.w.shape:
        raise ValueError("integrand and weights have different lengths")
    return float(a @ weights.w)
