"""Finite square simulation windows and toroidal geometry.

The infinite plane is modelled by a square window with a wrap-around
(toroidal) metric, which keeps every point statistically equivalent and
removes boundary bias from association and spatial statistics.  An
alternative "euclidean-with-guard" metric is kept so second-order
statistics can be cross-checked against a guard-region edge correction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TOROIDAL = "toroidal"
GUARD = "euclidean-with-guard"

_METRICS = (TOROIDAL, GUARD)


class Point2(NamedTuple):
    """A planar location in km."""

    x: float
    y: float


@dataclass(frozen=True)
class SimulationWindow:
    """Square window [0, side) x [0, side) standing in for the plane.

    Parameters
    ----------
    side : float
        Window side length in km, > 0.
    metric : str
        Either ``"toroidal"`` (default; distances wrap at the edges) or
        ``"euclidean-with-guard"`` (plain distances; statistics are meant
        to be read off the interior observation sub-window).
    guard_fraction : float
        Fraction of the side stripped from each edge to form the
        observation sub-window.  Only meaningful with the guard metric.
    """

    side: float
    metric: str = TOROIDAL
    guard_fraction: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.side) or self.side <= 0:
            raise ValueError(f"window side must be positive and finite, got {self.side}")
        if self.metric not in _METRICS:
            raise ValueError(f"unknown metric {self.metric!r}, expected one of {_METRICS}")
        if not 0.0 <= self.guard_fraction < 0.5:
            raise ValueError(f"guard_fraction must lie in [0, 0.5), got {self.guard_fraction}")

    @property
    def center(self) -> Point2:
        return Point2(self.side / 2.0, self.side / 2.0)

    def area(self) -> float:
        """Area of the observation region.

        The full square under the toroidal metric; the interior
        sub-window once the guard strips are removed otherwise.
        """
        if self.metric == TOROIDAL:
            return self.side * self.side
        inner = (1.0 - 2.0 * self.guard_fraction) * self.side
        return inner * inner

    def sampling_area(self) -> float:
        """Area of the full square over which points are generated."""
        return self.side * self.side

    def observation_bounds(self) -> tuple[float, float]:
        """(low, high) coordinate bounds of the observation region."""
        if self.metric == TOROIDAL:
            return 0.0, self.side
        g = self.guard_fraction * self.side
        return g, self.side - g

    def contains(self, points) -> bool:
        """True if every coordinate lies in [0, side)."""
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            return True
        return bool(np.all(pts >= 0.0) and np.all(pts < self.side))

    def wrap(self, points) -> np.ndarray:
        """Map arbitrary coordinates into [0, side) by wrapping."""
        return np.mod(np.asarray(points, dtype=float), self.side)


def _as_xy(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError(f"expected 2-D coordinates, got shape {arr.shape}")
    return arr


def wrapped_deltas(points, origin, window: SimulationWindow) -> np.ndarray:
    """Per-axis displacements from ``origin`` to ``points``.

    Under the toroidal metric each axis difference d is reduced to the
    shorter way around, i.e. |d| becomes min(|d|, side - |d|).
    """
    delta = _as_xy(points) - _as_xy(origin)
    if window.metric == TOROIDAL:
        s = window.side
        delta = np.mod(delta + s / 2.0, s) - s / 2.0
    return delta


def distance(a, b, window: SimulationWindow) -> float:
    """Distance between two points under the window's metric.

    Toroidal distances are symmetric, satisfy the triangle inequality and
    are bounded by side * sqrt(2) / 2.
    """
    delta = wrapped_deltas(_as_xy(a)[None, :], b, window)
    return float(np.hypot(delta[0, 0], delta[0, 1]))


def distances_to_point(points, origin, window: SimulationWindow) -> np.ndarray:
    """Distances from every row of ``points`` to ``origin``."""
    pts = _as_xy(points)
    if pts.ndim == 1:
        pts = pts[None, :]
    delta = wrapped_deltas(pts, origin, window)
    return np.hypot(delta[:, 0], delta[:, 1])


def pairwise_distances(points_a, points_b, window: SimulationWindow) -> np.ndarray:
    """(n, m) matrix of distances between two coordinate arrays."""
    a = _as_xy(points_a)
    b = _as_xy(points_b)
    if a.ndim == 1:
        a = a[None, :]
    if b.ndim == 1:
        b = b[None, :]
    delta = a[:, None, :] - b[None, :, :]
    if window.metric == TOROIDAL:
        s = window.side
        delta = np.mod(delta + s / 2.0, s) - s / 2.0
    return np.sqrt(np.sum(delta * delta, axis=-1))


def uniform_points(window: SimulationWindow, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points drawn uniformly over the full square, as an (n, 2) array."""
    if n < 0:
        raise ValueError("point count must be non-negative")
    return rng.uniform(0.0, window.side, size=(n, 2))


def uniform_point(window: SimulationWindow, rng: np.random.Generator) -> Point2:
    """A single uniform draw from the window."""
    xy = uniform_points(window, 1, rng)[0]
    return Point2(float(xy[0]), float(xy[1]))
