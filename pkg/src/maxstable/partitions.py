"""Set partitions, Bell/Stirling counts, and the packed partition table.

The full max-stable density is a sum over all set partitions of the
observation indices.  Everything here works with partitions of {1..n}
encoded either as restricted growth strings (RGS) during enumeration or,
inside :class:`PartitionTable`, as per-block bitmask ranks stored at
16-bit width.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, ResourceGuardError

MAX_BELL_N = 30
MAX_ENUM_N = 13

# Default cap on partition-table memory; override with maxstable_memory_cap
# config key or the MAXSTABLE_MEMORY_CAP environment variable (bytes).
DEFAULT_MEMORY_CAP = 4 << 30


def bell_number(n: int) -> int:
    """Number of set partitions of an n-element set, as an exact integer.

    Uses the Bell-triangle recurrence in Python integers, so there is no
    overflow up to the supported n.
    """
    if not 0 <= n <= MAX_BELL_N:
        raise DomainError(f"bell_number requires 0 <= n <= {MAX_BELL_N}, got {n}")
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


@lru_cache(maxsize=None)
def _stirling2_row(n: int) -> tuple[int, ...]:
    if n == 0:
        return (1,)
    prev = _stirling2_row(n - 1)
    row = [0] * (n + 1)
    for k in range(1, n + 1):
        above = prev[k] if k < n else 0
        row[k] = k * above + prev[k - 1]
    return tuple(row)


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind S(n, k), exact."""
    if not 0 <= n <= MAX_BELL_N:
        raise DomainError(f"stirling2 requires 0 <= n <= {MAX_BELL_N}, got n={n}")
    if not 0 <= k <= n:
        return 0
    return _stirling2_row(n)[k]


def total_blocks(n: int) -> int:
    """Sum of block counts over all partitions of {1..n} (= table flat length)."""
    return sum(k * stirling2(n, k) for k in range(1, n + 1))


@dataclass(frozen=True)
class Partition:
    """A set partition of {1..n} with blocks in canonical order.

    Blocks are sorted tuples of 1-based indices, listed by increasing
    minimal element; together they are disjoint and cover {1..n}.
    """

    n: int
    blocks: tuple[tuple[int, ...], ...]

    @classmethod
    def from_rgs(cls, rgs: Sequence[int]) -> "Partition":
        """Build from a restricted growth string (0-based block labels)."""
        n = len(rgs)
        nblocks = max(rgs) + 1
        blocks: list[list[int]] = [[] for _ in range(nblocks)]
        for i, lab in enumerate(rgs):
            blocks[lab].append(i + 1)
        return cls(n=n, blocks=tuple(tuple(b) for b in blocks))

    def to_rgs(self) -> tuple[int, ...]:
        rgs = [0] * self.n
        for lab, block in enumerate(self.blocks):
            for i in block:
                rgs[i - 1] = lab
        return tuple(rgs)

    def block_ranks(self) -> tuple[int, ...]:
        """Bitmask rank of each block (member m contributes bit m-1)."""
        return tuple(sum(1 << (i - 1) for i in block) for block in self.blocks)

    def validate(self) -> None:
        seen: set[int] = set()
        for block in self.blocks:
            if not block:
                raise DomainError("empty block in partition")
            if list(block) != sorted(block):
                raise DomainError("block members not sorted")
            if seen & set(block):
                raise DomainError("blocks are not disjoint")
            seen.update(block)
        if seen != set(range(1, self.n + 1)):
            raise DomainError("blocks do not cover {1..n}")
        mins = [b[0] for b in self.blocks]
        if mins != sorted(mins):
            raise DomainError("blocks not ordered by minimal element")


def _iter_rgs(n: int) -> Iterator[list[int]]:
    # Lexicographic successor walk over restricted growth strings:
    # a[0] = 0 and a[i] <= 1 + max(a[0..i-1]).  The yielded list is reused.
    a = [0] * n
    m = [0] * n  # m[i] = max(a[0..i]) maintained alongside
    while True:
        yield a
        j = n - 1
        while j > 0 and a[j] > m[j - 1]:
            j -= 1
        if j == 0:
            return
        a[j] += 1
        m[j] = max(m[j - 1], a[j])
        for i in range(j + 1, n):
            a[i] = 0
            m[i] = m[j]


def enumerate_partitions(n: int) -> Iterator[Partition]:
    """All set partitions of {1..n}, in RGS lexicographic order.

    The count equals ``bell_number(n)``; n is capped at 13 because the
    enumeration (let alone any table built from it) hits a memory wall
    shortly beyond that.
    """
    if not 1 <= n <= MAX_ENUM_N:
        if n > MAX_ENUM_N:
            raise ResourceGuardError(
                f"partition enumeration capped at n <= {MAX_ENUM_N} "
                f"(Bell({n}) partitions would be intractable)"
            )
        raise DomainError(f"enumerate_partitions requires n >= 1, got {n}")
    for rgs in _iter_rgs(n):
        yield Partition.from_rgs(rgs)


def enumerate_partitions_with_blocks(n: int, k: int) -> Iterator[Partition]:
    """Partitions of {1..n} with exactly k blocks (a Stirling group).

    Yields S(n, k) partitions; the union over k = 1..n reproduces
    ``enumerate_partitions(n)`` up to ordering.
    """
    if not 1 <= n <= MAX_ENUM_N:
        if n > MAX_ENUM_N:
            raise ResourceGuardError(f"partition enumeration capped at n <= {MAX_ENUM_N}")
        raise DomainError(f"requires n >= 1, got {n}")
    if not 1 <= k <= n:
        raise DomainError(f"block count must satisfy 1 <= k <= n, got k={k}, n={n}")

    a = [0] * n

    def rec(i: int, cur_max: int) -> Iterator[Partition]:
        if i == n:
            if cur_max + 1 == k:
                yield Partition.from_rgs(a)
            return
        # Prune: even giving every remaining position a new label cannot
        # reach k blocks.
        if cur_max + 1 + (n - i) < k:
            return
        top = min(cur_max + 1, k - 1)
        for lab in range(top + 1):
            a[i] = lab
            yield from rec(i + 1, max(cur_max, lab))

    a[0] = 0
    yield from rec(1, 0) if n > 1 else iter([Partition.from_rgs(a)])


@dataclass(frozen=True)
class SubsetId:
    """A non-empty subset of {1..Q} with its bitmask rank as canonical key."""

    members: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))
        if any(m < 1 for m in self.members):
            raise DomainError("subset members are 1-based")
        if list(self.members) != sorted(set(self.members)):
            raise DomainError("subset members must be strictly increasing")

    @property
    def rank(self) -> int:
        return sum(1 << (i - 1) for i in self.members)

    @classmethod
    def from_rank(cls, rank: int) -> "SubsetId":
        rank = int(rank)
        if rank < 1:
            raise DomainError(f"subset rank must be >= 1, got {rank}")
        members = tuple(i + 1 for i in range(rank.bit_length()) if rank >> i & 1)
        return cls(members=members)

    def __len__(self) -> int:
        return len(self.members)


def enumerate_subsets(Q: int, q: int) -> Iterator[SubsetId]:
    """All C(Q, q) size-q subsets of {1..Q} in lexicographic member order."""
    from itertools import combinations

    if Q < 1:
        raise DomainError(f"dimension must be >= 1, got {Q}")
    if not 1 <= q <= Q:
        raise DomainError(f"subset size must satisfy 1 <= q <= Q, got q={q}, Q={Q}")
    for members in combinations(range(1, Q + 1), q):
        yield SubsetId(members=members)


class PartitionTable:
    """Packed table of every partition of {1..n} as rows of subset ranks.

    Row r holds one bitmask rank per block of partition r, pointing into a
    length-(2^n - 1) derivative vector (index = rank - 1).  Ranks are
    stored at 16-bit width in one flat array with CSR-style row offsets,
    which keeps the n = 11 table in the tens of megabytes.
    """

    def __init__(self, n: int, flat: np.ndarray, row_ptr: np.ndarray):
        self.n = n
        self.flat = flat
        self.row_ptr = row_ptr
        self.block_index_width = 16

    @property
    def n_rows(self) -> int:
        return len(self.row_ptr) - 1

    def row(self, r: int) -> np.ndarray:
        return self.flat[self.row_ptr[r]:self.row_ptr[r + 1]]

    def decode_row(self, r: int) -> Partition:
        blocks = [SubsetId.from_rank(int(rank)).members for rank in self.row(r)]
        return Partition(n=self.n, blocks=tuple(blocks))

    def memory_bytes(self) -> int:
        return int(self.flat.nbytes + self.row_ptr.nbytes)

    @staticmethod
    def estimate_bytes(n: int) -> int:
        return 2 * total_blocks(n) + 8 * (bell_number(n) + 1)

    def __repr__(self) -> str:
        return f"PartitionTable(n={self.n}, rows={self.n_rows}, bytes={self.memory_bytes()})"


def _memory_cap(explicit: int | None) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get("MAXSTABLE_MEMORY_CAP")
    if env:
        return int(env)
    return DEFAULT_MEMORY_CAP


def build_partition_table(n: int, memory_cap: int | None = None) -> PartitionTable:
    """Precompute the partition table for dimension n.

    The estimated memory requirement is checked against the cap before
    any allocation; construction is deterministic (RGS lexicographic row
    order, blocks by minimal element).
    """
    if not 1 <= n <= MAX_ENUM_N:
        if n > MAX_ENUM_N:
            raise ResourceGuardError(f"partition table capped at n <= {MAX_ENUM_N}")
        raise DomainError(f"build_partition_table requires n >= 1, got {n}")
    cap = _memory_cap(memory_cap)
    estimate = PartitionTable.estimate_bytes(n)
    if estimate > cap:
        raise ResourceGuardError(
            f"partition table for n={n} needs an estimated {estimate} bytes, "
            f"above the cap of {cap} bytes",
            estimate=estimate,
            cap=cap,
        )

    n_rows = bell_number(n)
    flat = np.empty(total_blocks(n), dtype=np.uint16)
    row_ptr = np.empty(n_rows + 1, dtype=np.int64)
    row_ptr[0] = 0
    pos = 0
    r = 0
    ranks = [0] * n
    for rgs in _iter_rgs(n):
        nblocks = 0
        for i in range(n):
            lab = rgs[i]
            if lab == nblocks:
                ranks[lab] = 1 << i
                nblocks += 1
            else:
                ranks[lab] |= 1 << i
        flat[pos:pos + nblocks] = ranks[:nblocks]
        pos += nblocks
        r += 1
        row_ptr[r] = pos
    assert pos == len(flat) and r == n_rows
    return PartitionTable(n=n, flat=flat, row_ptr=row_ptr)


@lru_cache(maxsize=8)
def get_partition_table(n: int) -> PartitionTable:
    """Shared immutable table per dimension (tables are reusable across fits)."""
    return build_partition_table(n)


def iter_partition_index_rows(n: int) -> Iterator[list[int]]:
    """Stream rank rows grouped by block count, without building a table.

    This is the divide-and-conquer fallback for dimensions whose table
    would not fit in memory.  It re-enumerates on every pass, which is
    far slower than a prebuilt table, so the table path is the default.
    """
    for k in range(1, n + 1):
        for part in enumerate_partitions_with_blocks(n, k):
            yield list(part.block_ranks())


def rgs_string(p: Partition) -> str:
    """Compact RGS encoding: one character per element, labels 0-9 then a-z."""
    digits = "0123456789abcdefghijklmnopqrstuvwxyz"
    return "".join(digits[lab] for lab in p.to_rgs())
