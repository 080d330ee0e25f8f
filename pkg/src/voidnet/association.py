"""Random cell association and void-cell Monte Carlo.

Every user is assigned to the base station maximizing
W_i * H_iu * d(u, B_i)^(-alpha), where W_i is an i.i.d. per-station
weight and H_iu an i.i.d. per-link gain.  The nearest law sets W = 1/H
link-wise, collapsing the criterion to pure path loss.  Base stations
whose resulting cell is empty are "void"; their statistics are pooled
across stations and replications.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .analytics import EstimateWithCI, pooled_fraction
from .channel import NEAREST, ChannelParams, WeightLaw, sample_gain, zeta_dagger
from .geometry import TOROIDAL, Point2, SimulationWindow, pairwise_distances
from .pointprocess import PointPattern, rep_rng, sample_ppp

# Best-to-second-best criterion gap below which a user's association is
# considered ambiguous; a high fraction flags an undersized window.
NEAR_TIE_RTOL = 0.01


@dataclass(frozen=True)
class MarkedBasestation:
    """A base station with its association marks.

    ``assoc_gains`` holds the serving-link gains of the users in this
    station's cell (one per roster entry).  ``void`` is True exactly when
    the roster is empty.
    """

    position: Point2
    weight: float
    assoc_gains: np.ndarray
    void: bool
    users: np.ndarray


@dataclass(frozen=True)
class AssociationOutcome:
    """Result of one association round.

    ``assignments[u]`` is the serving base-station index of user u;
    ``cell_counts`` partitions the users over stations, so its sum equals
    the user count and ``void_count`` is the number of zero entries.
    """

    assignments: np.ndarray
    serving_distance: np.ndarray
    serving_gain: np.ndarray
    bs_weights: np.ndarray
    cell_counts: np.ndarray
    void_count: int
    near_tie_fraction: float

    def __post_init__(self) -> None:
        if int(self.cell_counts.sum()) != len(self.assignments):
            raise ValueError("cell counts do not partition the user set")
        if int(np.sum(self.cell_counts == 0)) != self.void_count:
            raise ValueError("void count inconsistent with cell counts")

    def to_user_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["user_id", "bs_id", "serving_distance"])
            for u, (b, d) in enumerate(zip(self.assignments, self.serving_distance)):
                writer.writerow([u, int(b), repr(float(d))])

    def to_bs_csv(self, path, bs: PointPattern) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bs_id", "x", "y", "count", "void_flag"])
            for i, (x, y) in enumerate(bs.points):
                writer.writerow(
                    [i, repr(float(x)), repr(float(y)), int(self.cell_counts[i]),
                     int(self.cell_counts[i] == 0)]
                )


def associate(
    bs: PointPattern,
    users: PointPattern,
    cp: ChannelParams,
    law: WeightLaw,
    rng: np.random.Generator,
) -> AssociationOutcome:
    """Assign every user to its criterion-maximizing base station.

    Draw order is fixed for reproducibility: per-station weights first,
    then the full user-by-station gain matrix (nearest law: serving-link
    gains only, since gains cancel out of its criterion).  Ties break
    toward the lowest station index.
    """
    n_b = len(bs)
    n_u = len(users)
    if n_b == 0:
        raise ValueError("association requires at least one base station")

    if law.kind == NEAREST:
        # Gains cancel out of the nearest criterion, so assignment is a
        # plain (periodic) nearest-neighbour query.
        weights = np.ones(n_b)
        if n_u:
            boxsize = bs.window.side if bs.window.metric == TOROIDAL else None
            tree = cKDTree(bs.points, boxsize=boxsize)
            k = min(2, n_b)
            dd, ii = tree.query(users.points, k=k)
            dd = dd.reshape(n_u, k)
            ii = ii.reshape(n_u, k)
            assignments = ii[:, 0]
            serving_distance = dd[:, 0]
        else:
            assignments = np.zeros(0, dtype=int)
            serving_distance = np.zeros(0)
        serving_gain = np.asarray(sample_gain(cp, rng, size=n_u), dtype=float).reshape(n_u)
        if n_u and n_b >= 2:
            near_tie = (serving_distance / dd[:, 1]) ** cp.alpha > 1.0 - NEAR_TIE_RTOL
            near_tie_fraction = float(np.mean(near_tie))
        else:
            near_tie_fraction = 0.0
    else:
        dist = pairwise_distances(users.points, bs.points, bs.window)
        weights = law.sample_weights(n_b, rng)
        gains = np.asarray(sample_gain(cp, rng, size=(n_u, n_b)), dtype=float).reshape(n_u, n_b)
        with np.errstate(divide="ignore"):
            criterion = weights[None, :] * gains * dist ** (-cp.alpha)
        assignments = np.argmax(criterion, axis=1) if n_u else np.zeros(0, dtype=int)
        rows = np.arange(n_u)
        serving_distance = dist[rows, assignments] if n_u else np.zeros(0)
        serving_gain = gains[rows, assignments] if n_u else np.zeros(0)
        if n_u and n_b >= 2:
            best = criterion[rows, assignments]
            second = np.partition(criterion, n_b - 2, axis=1)[:, n_b - 2]
            with np.errstate(invalid="ignore"):
                near_tie = second / best > 1.0 - NEAR_TIE_RTOL
            near_tie_fraction = float(np.mean(near_tie))
        else:
            near_tie_fraction = 0.0

    cell_counts = np.bincount(assignments, minlength=n_b)
    return AssociationOutcome(
        assignments=assignments,
        serving_distance=serving_distance,
        serving_gain=serving_gain,
        bs_weights=weights,
        cell_counts=cell_counts,
        void_count=int(np.sum(cell_counts == 0)),
        near_tie_fraction=near_tie_fraction,
    )


def marked_basestations(bs: PointPattern, outcome: AssociationOutcome) -> list[MarkedBasestation]:
    """Per-station view of an association outcome (positions + marks)."""
    stations = []
    for i, (x, y) in enumerate(bs.points):
        members = np.flatnonzero(outcome.assignments == i)
        stations.append(
            MarkedBasestation(
                position=Point2(float(x), float(y)),
                weight=float(outcome.bs_weights[i]),
                assoc_gains=outcome.serving_gain[members],
                void=members.size == 0,
                users=members,
            )
        )
    return stations


def associated_pattern(outcome: AssociationOutcome, bs: PointPattern) -> PointPattern:
    """Sub-pattern of base stations that serve at least one user.

    Declared intensity is the original intensity thinned by the realized
    non-void fraction.
    """
    keep = outcome.cell_counts > 0
    retained = float(np.mean(keep)) if len(bs) else 0.0
    return PointPattern(
        points=bs.points[keep],
        window=bs.window,
        intensity_declared=bs.intensity_declared * retained,
    )


def _warn_if_divergent(cp: ChannelParams, law: WeightLaw) -> None:
    if np.isinf(zeta_dagger(cp, law)):
        warnings.warn(
            "moment product E[(WH)^(2/a)]E[(WH)^(-2/a)] diverges (m <= 2/alpha); "
            "closed-form void expressions are inapplicable, only the "
            "exp(-lambda_u/lambda_b) lower bound remains",
            stacklevel=3,
        )


def _replication_cells(
    lambda_b: float,
    lambda_u: float,
    cp: ChannelParams,
    law: WeightLaw,
    window: SimulationWindow,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-station user counts for one fresh replication.

    An empty base-station draw (vanishingly unlikely at sane window
    sizes) contributes no cells.
    """
    bs = sample_ppp(lambda_b, window, rng)
    if len(bs) == 0:
        return np.zeros(0, dtype=int)
    users = sample_ppp(lambda_u, window, rng)
    outcome = associate(bs, users, cp, law, rng)
    return outcome.cell_counts


def void_probability_mc(
    lambda_b: float,
    lambda_u: float,
    cp: ChannelParams,
    law: WeightLaw,
    reps: int,
    window: SimulationWindow,
    seed: int,
) -> EstimateWithCI:
    """Monte-Carlo void probability, pooled over stations and replications.

    All cells are exchangeable on the torus, so pooling is unbiased; the
    interval accounts for within-replication correlation by treating each
    replication as a cluster (see :func:`voidnet.analytics.pooled_fraction`).
    """
    if reps < 1:
        raise ValueError("need at least one replication")
    if lambda_b <= 0:
        raise ValueError("lambda_b must be > 0")
    _warn_if_divergent(cp, law)
    voids = np.zeros(reps)
    cells = np.zeros(reps)
    for r in range(reps):
        counts = _replication_cells(lambda_b, lambda_u, cp, law, window, rep_rng(seed, r))
        voids[r] = np.sum(counts == 0)
        cells[r] = len(counts)
    p_hat, lo, hi = pooled_fraction(voids, cells)
    return EstimateWithCI(value=p_hat, ci_low=lo, ci_high=hi, reps=reps, seed=seed)


@dataclass(frozen=True)
class CellCountPmf:
    """Empirical per-cell user-count distribution with per-bin intervals."""

    n_values: np.ndarray
    pmf: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    mean: float
    reps: int
    seed: int


def cell_count_pmf_mc(
    lambda_b: float,
    lambda_u: float,
    cp: ChannelParams,
    law: WeightLaw,
    reps: int,
    window: SimulationWindow,
    seed: int,
) -> CellCountPmf:
    """Empirical pmf of the number of users in a cell.

    Shares the replication streams of :func:`void_probability_mc`, so the
    n = 0 bin reproduces that estimate exactly for the same seed.
    """
    if reps < 1:
        raise ValueError("need at least one replication")
    if lambda_b <= 0:
        raise ValueError("lambda_b must be > 0")
    _warn_if_divergent(cp, law)
    per_rep_counts = []
    n_max = 0
    for r in range(reps):
        counts = _replication_cells(lambda_b, lambda_u, cp, law, window, rep_rng(seed, r))
        per_rep_counts.append(counts)
        if len(counts):
            n_max = max(n_max, int(counts.max()))

    hist = np.zeros((reps, n_max + 1))
    cells = np.zeros(reps)
    total_users = 0.0
    for r, counts in enumerate(per_rep_counts):
        cells[r] = len(counts)
        total_users += counts.sum()
        if len(counts):
            hist[r] = np.bincount(counts, minlength=n_max + 1)

    total_cells = cells.sum()
    if total_cells == 0:
        raise RuntimeError("no cells simulated; window too small for lambda_b")
    pmf = np.empty(n_max + 1)
    lo = np.empty(n_max + 1)
    hi = np.empty(n_max + 1)
    for n in range(n_max + 1):
        pmf[n], lo[n], hi[n] = pooled_fraction(hist[:, n], cells)
    return CellCountPmf(
        n_values=np.arange(n_max + 1),
        pmf=pmf,
        ci_low=lo,
        ci_high=hi,
        mean=float(total_users / total_cells),
        reps=reps,
        seed=seed,
    )
