"""Homogeneous Poisson point patterns, random scaling maps and CSR tests.

Implements sampling of homogeneous PPPs on a window, the per-point random
scaling map (each point is scaled about the window centre by its own
i.i.d. positive mark, which turns an intensity-lambda PPP into one of
intensity lambda * E[1/T^2]), nearest-point distances, and a quadrat-count
chi-square test of complete spatial randomness.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .geometry import SimulationWindow, distances_to_point, uniform_points


def rep_rng(seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for replication ``index``.

    Streams derived this way are identical no matter how replications are
    scheduled across workers, which keeps every experiment bit-reproducible.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


class ScalingMark(NamedTuple):
    """Positive per-point scale factor used by :func:`map_pattern`."""

    t: float


@dataclass(frozen=True)
class PointPattern:
    """An immutable realization of a planar point process.

    ``intensity_declared`` is the intensity the pattern is supposed to
    have (points per km^2); the realized count fluctuates around
    intensity * area.
    """

    points: np.ndarray
    window: SimulationWindow
    intensity_declared: float

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must be an (n, 2) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite coordinates")
        if not self.window.contains(pts):
            raise ValueError("points must lie inside the window")
        if not (np.isfinite(self.intensity_declared) and self.intensity_declared >= 0):
            raise ValueError(f"declared intensity must be >= 0, got {self.intensity_declared}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def empirical_intensity(self) -> float:
        return len(self) / self.window.sampling_area()

    def to_csv(self, path) -> None:
        """Write one ``x,y`` row per point (for external plotting)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y"])
            for x, y in self.points:
                writer.writerow([repr(float(x)), repr(float(y))])


def sample_ppp(intensity: float, window: SimulationWindow, rng: np.random.Generator) -> PointPattern:
    """Draw a homogeneous PPP on the window.

    The point count is Poisson(intensity * side^2) and point locations are
    i.i.d. uniform, so counts in disjoint regions come out independent.
    """
    if not np.isfinite(intensity) or intensity < 0:
        raise ValueError(f"intensity must be >= 0, got {intensity}")
    n = int(rng.poisson(intensity * window.sampling_area()))
    pts = uniform_points(window, n, rng)
    return PointPattern(points=pts, window=window, intensity_declared=float(intensity))


def _marks_as_array(marks) -> np.ndarray:
    if isinstance(marks, np.ndarray):
        arr = marks.astype(float)
    else:
        seq = list(marks)
        if seq and isinstance(seq[0], ScalingMark):
            arr = np.asarray([m.t for m in seq], dtype=float)
        else:
            arr = np.asarray(seq, dtype=float)
    return np.atleast_1d(arr)


def map_pattern(
    pattern: PointPattern,
    marks: Sequence[ScalingMark] | np.ndarray,
    target: SimulationWindow | None = None,
    mean_inverse_square: float | None = None,
) -> PointPattern:
    """Scale every point about the window centre by its own mark.

    Point i at displacement u from the source-window centre moves to
    t_i * u from the target-window centre; points landing outside the
    target window are dropped.  For i.i.d. marks the surviving points on
    the target window form another homogeneous PPP whose intensity is the
    source intensity times E[1/T^2].

    The source window must be large enough that points which would map
    into the target from outside it are negligible; marks below
    target_side / source_side lose coverage (see
    :func:`mark_expansion_factor`).  With ``target=None`` the source
    window itself is the target, which is only adequate when no mark is
    below 1.

    ``mean_inverse_square`` supplies E[1/T^2] for the declared output
    intensity; when omitted, the realized mean of 1/t_i^2 is used instead.
    """
    t = _marks_as_array(marks)
    if len(t) != len(pattern):
        raise ValueError(f"need one mark per point: {len(t)} marks for {len(pattern)} points")
    if len(t) and (not np.all(np.isfinite(t)) or np.any(t <= 0)):
        raise ValueError("marks must be positive and finite")
    if target is None:
        target = pattern.window

    src_c = pattern.window.side / 2.0
    tgt_c = target.side / 2.0
    if len(pattern):
        mapped = tgt_c + t[:, None] * (pattern.points - src_c)
        inside = np.all((mapped >= 0.0) & (mapped < target.side), axis=1)
        kept = mapped[inside]
    else:
        kept = pattern.points

    if mean_inverse_square is None:
        mean_inverse_square = float(np.mean(1.0 / t**2)) if len(t) else 1.0
    out_intensity = pattern.intensity_declared * mean_inverse_square
    return PointPattern(points=kept, window=target, intensity_declared=out_intensity)


def mark_expansion_factor(
    mark_sampler,
    rng: np.random.Generator,
    rel_tail: float = 1e-4,
    n_samples: int = 200_000,
) -> float:
    """Source/target side ratio adequate for :func:`map_pattern`.

    Estimates, by simulation of the mark law, the smallest quantile t*
    such that marks below t* contribute at most ``rel_tail`` of E[1/T^2];
    source points further than (target half-width) / t* from the centre
    then have a negligible chance of mapping into the target.  Returns
    max(1, 1/t*).
    """
    t = np.sort(np.asarray(mark_sampler(rng, n_samples), dtype=float))
    if t[0] <= 0:
        raise ValueError("mark sampler produced non-positive values")
    contribution = np.cumsum(1.0 / t**2)  # running E[1/T^2] share of the smallest marks
    droppable = int(np.searchsorted(contribution, rel_tail * contribution[-1]))
    t_star = float(t[min(droppable, len(t) - 1)])
    return max(1.0, 1.0 / t_star)


def nearest_distance(origin, pattern: PointPattern, window: SimulationWindow | None = None) -> float:
    """Distance from ``origin`` to the closest point of the pattern."""
    if len(pattern) == 0:
        raise ValueError("pattern is empty; nearest distance undefined")
    w = pattern.window if window is None else window
    return float(np.min(distances_to_point(pattern.points, origin, w)))


@dataclass(frozen=True)
class CsrReport:
    """Quadrat-count chi-square test report."""

    statistic: float
    dof: int
    p_value: float
    counts: np.ndarray
    expected_per_cell: float


def csr_test(pattern: PointPattern, grid: int) -> CsrReport:
    """Chi-square quadrat test of complete spatial randomness.

    The window is cut into grid x grid equal quadrats; under CSR the
    counts, conditioned on the total, are exchangeable with common mean,
    and the index-of-dispersion statistic sum (n_i - nbar)^2 / nbar is
    asymptotically chi-square with grid^2 - 1 degrees of freedom.  The
    p-value is two-sided, so both clustering (overdispersion) and
    regularity (underdispersion) are detected.

    Requires at least 5 expected points per quadrat for the chi-square
    approximation to hold.
    """
    if grid < 2:
        raise ValueError("grid must be at least 2")
    n = len(pattern)
    cells = grid * grid
    expected = n / cells
    if expected < 5.0:
        raise ValueError(
            f"only {expected:.2f} expected points per quadrat; "
            "need at least 5 for a valid chi-square test"
        )
    side = pattern.window.side
    edges = np.linspace(0.0, side, grid + 1)
    counts, _, _ = np.histogram2d(pattern.points[:, 0], pattern.points[:, 1], bins=[edges, edges])
    statistic = float(np.sum((counts - expected) ** 2) / expected)
    dof = cells - 1
    p_value = float(min(1.0, 2.0 * min(stats.chi2.cdf(statistic, dof), stats.chi2.sf(statistic, dof))))
    return CsrReport(statistic=statistic, dof=dof, p_value=p_value, counts=counts, expected_per_cell=expected)
