"""Partition-sum densities and (truncated) composite log-likelihoods.

The full density in dimension q is exp(-V) times a sum over all set
partitions of {1..q}, each partition contributing the product of -V_S
over its blocks.  Products are accumulated as sums of log(-V_S) and the
partition sum collapses with one log-sum-exp per replicate, so the
assembly stays finite far past the point where direct products underflow.

Composite likelihoods restrict the same machinery to subsets of size q,
optionally truncated to the fraction t of subsets with the smallest
maximum pairwise site distance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, ModelValidityError
from .models import exponent_measure_batch, log_neg_partials_batch, restrict_model
from .partitions import (
    PartitionTable,
    SubsetId,
    get_partition_table,
    iter_partition_index_rows,
)

# Cap on the number of gathered (replicate, block) entries processed at
# once; larger batches are chunked over replicates.
_CHUNK_ELEMENTS = 20_000_000


@dataclass
class Telemetry:
    """Counters accumulated across likelihood evaluations."""

    wall_time: float = 0.0
    n_partial_evaluations: int = 0
    n_density_evaluations: int = 0
    peak_table_bytes: int = 0

    def add(self, wall: float, partials: int, densities: int, table_bytes: int):
        self.wall_time += wall
        self.n_partial_evaluations += partials
        self.n_density_evaluations += densities
        self.peak_table_bytes = max(self.peak_table_bytes, table_bytes)


@dataclass
class CompositeScheme:
    """A set of size-q subsets of {1..Q} with positive weights.

    ``t`` records the truncation fraction that produced the subset list;
    ``max_set_distances`` keeps the ranking metric (maximum pairwise site
    distance per retained subset) when locations were involved.
    """

    Q: int
    q: int
    subsets: tuple
    weights: np.ndarray
    t: float = 1.0
    max_set_distances: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if not 1 <= self.q <= self.Q:
            raise DomainError(f"subset order must satisfy 1 <= q <= Q, got q={self.q}")
        if len(self.subsets) == 0:
            raise DomainError("scheme has no subsets")
        if len(self.weights) != len(self.subsets):
            raise DomainError("one weight per subset required")
        if np.any(self.weights <= 0.0):
            raise DomainError("subset weights must be positive")
        seen = set()
        for S in self.subsets:
            if len(S.members) != self.q:
                raise DomainError(f"subset {S.members} does not have size q={self.q}")
            if S.members[-1] > self.Q:
                raise DomainError(f"subset {S.members} outside {{1..{self.Q}}}")
            if S.rank in seen:
                raise DomainError(f"duplicate subset {S.members}")
            seen.add(S.rank)
        if not 0.0 < self.t <= 1.0:
            raise DomainError(f"truncation fraction must be in (0, 1], got {self.t}")

    @property
    def n_subsets(self) -> int:
        return len(self.subsets)


@dataclass
class Dataset:
    """Replicated observations on unit Fréchet margins, one row per replicate."""

    values: np.ndarray
    locations: np.ndarray | None = None
    replicate_ids: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if np.any(~np.isfinite(self.values)) or np.any(self.values <= 0.0):
            raise DomainError("dataset values must be strictly positive and finite")
        if self.locations is not None:
            self.locations = np.atleast_2d(np.asarray(self.locations, dtype=float))
            if len(self.locations) != self.values.shape[1]:
                raise DomainError("one location per observation column required")
            diff = self.locations[:, None, :] - self.locations[None, :, :]
            d = np.sqrt((diff ** 2).sum(axis=2))
            off = ~np.eye(len(self.locations), dtype=bool)
            if np.any(d[off] == 0.0):
                raise DomainError("dataset locations must be distinct")
        if self.replicate_ids is None:
            self.replicate_ids = np.arange(self.values.shape[0])
        else:
            self.replicate_ids = np.asarray(self.replicate_ids)
            if len(self.replicate_ids) != self.values.shape[0]:
                raise DomainError("one replicate id per row required")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def Q(self) -> int:
        return self.values.shape[1]


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5))


def build_scheme(Q: int, q: int, locations=None, t: float = 1.0,
                 weights=None) -> CompositeScheme:
    """All size-q subsets, optionally truncated by maximum set distance.

    Subsets are ranked by the largest pairwise distance among their
    sites (ascending, ties broken lexicographically on the member lists)
    and the first round(t * C(Q, q)) are retained — never fewer than one.
    Unit weights unless an explicit weight vector is supplied.
    """
    if not 1 <= q <= Q:
        raise DomainError(f"subset order must satisfy 1 <= q <= Q, got q={q}, Q={Q}")
    if not 0.0 < t <= 1.0:
        raise DomainError(f"truncation fraction must be in (0, 1], got {t}")
    if t < 1.0 and locations is None:
        raise DomainError("truncation by set distance requires site locations")

    members_list = list(combinations(range(1, Q + 1), q))
    if locations is not None:
        X = np.atleast_2d(np.asarray(locations, dtype=float))
        if len(X) != Q:
            raise DomainError(f"expected {Q} locations, got {len(X)}")
        diff = X[:, None, :] - X[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        def max_dist(ms):
            if len(ms) == 1:
                return 0.0
            return max(dist[a - 1, b - 1] for a, b in combinations(ms, 2))
        ranked = sorted(members_list, key=lambda ms: (max_dist(ms), ms))
        n_keep = len(ranked) if t == 1.0 else max(1, _round_half_away(t * len(ranked)))
        kept = ranked[:n_keep]
        dists = np.array([max_dist(ms) for ms in kept])
    else:
        kept = members_list
        dists = None

    subsets = tuple(SubsetId(ms) for ms in kept)
    if weights is None:
        w = np.ones(len(subsets))
    else:
        w = np.asarray(weights, dtype=float)
        if len(w) != len(subsets):
            raise DomainError(
                f"weight vector has length {len(w)}, expected {len(subsets)}"
            )
    return CompositeScheme(Q=Q, q=q, subsets=subsets, weights=w, t=t,
                           max_set_distances=dists)


def _partition_logsum_rows(log_neg: np.ndarray, table: PartitionTable) -> np.ndarray:
    """log sum over partitions of prod over blocks of (-V_S), per replicate row."""
    m = log_neg.shape[0]
    flat_idx = table.flat.astype(np.int64) - 1
    starts = table.row_ptr[:-1]
    chunk = max(1, _CHUNK_ELEMENTS // max(1, len(flat_idx)))
    out = np.empty(m)
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        gathered = log_neg[lo:hi][:, flat_idx]
        row_sums = np.add.reduceat(gathered, starts, axis=1)
        out[lo:hi] = logsumexp(row_sums, axis=1)
    return out


def log_density_rows(model, Z: np.ndarray, table: PartitionTable | None = None) -> np.ndarray:
    """Full partition-sum log-density for each replicate row of Z."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    q = Z.shape[1]
    if table is None:
        table = get_partition_table(q)
    elif table.n != q:
        raise DomainError(f"partition table is for n={table.n}, data has q={q}")
    V = exponent_measure_batch(model, Z)
    log_neg = log_neg_partials_batch(model, Z)
    if np.any(np.isnan(log_neg)) or np.any(np.isnan(V)):
        raise ModelValidityError("partial derivatives produced NaN")
    return -V + _partition_logsum_rows(log_neg, table)


def log_density_full(model, z, table: PartitionTable | None = None,
                     telemetry: Telemetry | None = None) -> float:
    """log of the exact density: -V(z) plus the log partition sum."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    t0 = time.perf_counter()
    if table is None:
        table = get_partition_table(len(z))
    out = float(log_density_rows(model, z[None, :], table)[0])
    if telemetry is not None:
        telemetry.add(time.perf_counter() - t0, (1 << len(z)) - 1, 1,
                      table.memory_bytes())
    return out


def log_density_full_streaming(model, z) -> float:
    """Same value as log_density_full without materializing the table.

    Enumerates partitions grouped by block count and folds them into a
    running log-sum-exp; memory stays O(2^q) but the Python-level loop is
    orders of magnitude slower than the table path.  Meant for dimensions
    whose table would breach the memory cap.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    q = len(z)
    V = float(exponent_measure_batch(model, z[None, :])[0])
    log_neg = log_neg_partials_batch(model, z[None, :])[0]
    if np.any(np.isnan(log_neg)):
        raise ModelValidityError("partial derivatives produced NaN")
    best = -np.inf
    acc = 0.0
    # two-pass-free online log-sum-exp: rescale the accumulator whenever a
    # larger partition product appears
    for ranks in iter_partition_index_rows(q):
        s = sum(log_neg[r - 1] for r in ranks)
        if s == -np.inf:
            continue
        if s <= best:
            acc += math.exp(s - best)
        else:
            acc = acc * math.exp(best - s) + 1.0 if best > -np.inf else 1.0
            best = s
    if best == -np.inf:
        return -np.inf
    return -V + best + math.log(acc)


def _composite_subtotals(model, scheme: CompositeScheme, Z: np.ndarray,
                         table: PartitionTable) -> np.ndarray:
    """Per-subset sums over replicates of the restricted log-density."""
    cols = [np.array(S.members, dtype=int) - 1 for S in scheme.subsets]
    exchangeable = restrict_model(model, scheme.subsets[0].members) is model
    subtotals = np.empty(scheme.n_subsets)
    if exchangeable:
        m = Z.shape[0]
        stacked = np.concatenate([Z[:, c] for c in cols], axis=0)
        rows = log_density_rows(model, stacked, table)
        for j in range(scheme.n_subsets):
            subtotals[j] = math.fsum(rows[j * m:(j + 1) * m])
    else:
        for j, (S, c) in enumerate(zip(scheme.subsets, cols)):
            sub = restrict_model(model, S.members)
            rows = log_density_rows(sub, Z[:, c], table)
            subtotals[j] = math.fsum(rows)
    return subtotals


def log_composite(model, scheme: CompositeScheme, z,
                  telemetry: Telemetry | None = None) -> float:
    """Weighted sum of restricted log-densities over the scheme's subsets."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if len(z) != scheme.Q:
        raise DomainError(f"z has length {len(z)}, scheme expects Q={scheme.Q}")
    t0 = time.perf_counter()
    table = get_partition_table(scheme.q)
    subtotals = _composite_subtotals(model, scheme, z[None, :], table)
    out = math.fsum(w * s for w, s in zip(scheme.weights, subtotals))
    if telemetry is not None:
        telemetry.add(time.perf_counter() - t0,
                      scheme.n_subsets * ((1 << scheme.q) - 1), 1,
                      table.memory_bytes())
    return out


def log_likelihood_replicates(model, scheme: CompositeScheme, data: Dataset,
                              telemetry: Telemetry | None = None) -> float:
    """Sum of the composite log-likelihood over independent replicates.

    Replicate and subset reductions use exact summation, so the value is
    bit-identical under any ordering or parallel split of the work.
    """
    if data.Q != scheme.Q:
        raise DomainError(f"data has Q={data.Q}, scheme expects Q={scheme.Q}")
    t0 = time.perf_counter()
    table = get_partition_table(scheme.q)
    subtotals = _composite_subtotals(model, scheme, data.values, table)
    out = math.fsum(w * s for w, s in zip(scheme.weights, subtotals))
    if telemetry is not None:
        telemetry.add(time.perf_counter() - t0,
                      data.m * scheme.n_subsets * ((1 << scheme.q) - 1), data.m,
                      table.memory_bytes())
    return out


def expected_partial_evaluations(Q: int, q: int, m: int, t: float = 1.0) -> int:
    """Analytic V_S evaluation count per composite likelihood call."""
    n_sub = math.comb(Q, q) if t == 1.0 else max(1, _round_half_away(t * math.comb(Q, q)))
    return m * n_sub * ((1 << q) - 1)
