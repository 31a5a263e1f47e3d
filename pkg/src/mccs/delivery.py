"""Bit-exact simulator for coded delivery with redundancy removal.

Users are numbered 1..K and files 1..N at the API. Internally a user subset
is an int bitmask with bit ``k-1`` standing for user ``k``. File and subfile
contents are Python ints holding a fixed number of bits, most significant
bit first.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from .combinatorics import binom, distinct_count
from .placement import PlacementVector, ProblemInstance, check_feasible, per_demand_rate

Symbol = Tuple[int, int]  # (file index, subset mask)


class DecodingError(RuntimeError):
    """A user cannot recover its requested file from cache plus transcript."""


def popcount(mask: int) -> int:
    return mask.bit_count()


@lru_cache(maxsize=None)
def members(mask: int) -> Tuple[int, ...]:
    """Users (1-based) in a subset mask, ascending."""
    out = []
    k = 1
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return tuple(out)


def mask_of(users: Sequence[int]) -> int:
    m = 0
    for k in users:
        m |= 1 << (k - 1)
    return m


@lru_cache(maxsize=None)
def subsets_of_size(K: int, size: int) -> Tuple[int, ...]:
    """All ``size``-subsets of K users as masks, ascending."""
    return tuple(m for m in range(1 << K) if popcount(m) == size)


@lru_cache(maxsize=None)
def canonical_subsets(K: int) -> Tuple[int, ...]:
    """Subfile layout order: by subset size, then by ascending mask."""
    return tuple(m for l in range(K + 1) for m in subsets_of_size(K, l))


def choose_file_size(a: PlacementVector) -> int:
    """Smallest F making every a_l F an integer."""
    return math.lcm(*(Fraction(v).denominator for v in a))


@dataclass(frozen=True)
class SubfileStore:
    N: int
    K: int
    file_size: int
    level_bits: Tuple[int, ...]
    files: Dict[int, int]
    subfiles: Dict[Symbol, int]
    seed: Optional[int] = None

    def reconstruct(self, n: int, parts: Optional[Dict[int, int]] = None) -> int:
        """Concatenate file ``n``'s subfiles in canonical order."""
        parts = parts if parts is not None else {m: self.subfiles[(n, m)] for m in canonical_subsets(self.K)}
        out = 0
        for m in canonical_subsets(self.K):
            out = (out << self.level_bits[popcount(m)]) | parts[m]
        return out


Cache = Dict[Symbol, int]


def _file_contents(N: int, F: int, seed: Optional[int], fill: str) -> Dict[int, int]:
    if fill == "zeros":
        return {n: 0 for n in range(1, N + 1)}
    if fill == "ones":
        return {n: (1 << F) - 1 for n in range(1, N + 1)}
    if fill != "random":
        raise ValueError(f"unknown fill mode {fill!r}")
    rng = random.Random(seed)
    return {n: rng.getrandbits(F) if F else 0 for n in range(1, N + 1)}


def partition_and_cache(
    inst: ProblemInstance,
    a: PlacementVector,
    F: int,
    seed: Optional[int] = 0,
    fill: str = "random",
) -> Tuple[SubfileStore, Dict[int, Cache]]:
    """Split N synthetic F-bit files into subfiles and fill every user's cache.

    User k stores W_{n,S} for every file n and every subset S containing k.
    """
    if len(a) != inst.K + 1:
        raise ValueError(f"placement vector has length {len(a)}, expected {inst.K + 1}")
    if F < 1:
        raise ValueError("file size must be positive")
    bits = []
    for l, v in enumerate(a):
        size = v * F
        if size.denominator != 1 or size < 0:
            raise ValueError(f"a_{l} * F = {size} is not a non-negative integer")
        bits.append(int(size))
    K = inst.K
    layout = canonical_subsets(K)
    if sum(bits[popcount(m)] for m in layout) != F:
        raise ValueError("subfile sizes do not add up to the file size")

    files = _file_contents(inst.N, F, seed, fill)
    subfiles: Dict[Symbol, int] = {}
    for n, content in files.items():
        remaining = F
        for m in layout:
            width = bits[popcount(m)]
            remaining -= width
            subfiles[(n, m)] = (content >> remaining) & ((1 << width) - 1)

    caches: Dict[int, Cache] = {k: {} for k in range(1, K + 1)}
    for (n, m), payload in subfiles.items():
        if bits[popcount(m)] == 0:
            continue
        for k in members(m):
            caches[k][(n, m)] = payload
    store = SubfileStore(inst.N, K, F, tuple(bits), files, subfiles, seed)
    return store, caches


def cache_occupancy(store: SubfileStore, cache: Cache) -> int:
    return sum(store.level_bits[popcount(m)] for (_, m) in cache)


def leader_set(demand: Sequence[int]) -> int:
    """Lowest-indexed requester of each distinct file."""
    seen = set()
    leaders = 0
    for k, n in enumerate(demand, start=1):
        if n not in seen:
            seen.add(n)
            leaders |= 1 << (k - 1)
    return leaders


def non_redundant_subsets(K: int, leaders: int, size: int) -> List[int]:
    if not 1 <= size <= K:
        raise ValueError(f"subset size must lie in [1, {K}], got {size}")
    return [m for m in subsets_of_size(K, size) if m & leaders]


@dataclass(frozen=True)
class CodedMessage:
    subset: int
    level: int  # constituent subfiles belong to subgroup ``level``; |subset| = level + 1
    length: int
    payload: int


@dataclass
class DeliveryTranscript:
    N: int
    K: int
    demand: Tuple[int, ...]
    leader_set: int
    messages: List[CodedMessage]
    file_size: int
    level_bits: Tuple[int, ...]
    seed: Optional[int] = None
    total_bits: int = field(init=False)

    def __post_init__(self) -> None:
        self.total_bits = sum(msg.length for msg in self.messages)

    def without(self, index: int) -> "DeliveryTranscript":
        """Copy with one message removed (for mutation tests)."""
        kept = self.messages[:index] + self.messages[index + 1:]
        return DeliveryTranscript(
            self.N, self.K, self.demand, self.leader_set, kept, self.file_size, self.level_bits, self.seed
        )

    def to_text(self) -> str:
        """Line-oriented export for golden-file comparison."""
        lines = [
            f"N {self.N}",
            f"K {self.K}",
            f"demand {','.join(map(str, self.demand))}",
            f"leaders {','.join(map(str, members(self.leader_set)))}",
            f"file_bits {self.file_size}",
            f"seed {self.seed}",
            f"messages {len(self.messages)}",
        ]
        for msg in self.messages:
            users = ",".join(map(str, members(msg.subset)))
            width = max(1, (msg.length + 3) // 4)
            lines.append(f"msg {{{users}}} bits={msg.length} hex={msg.payload:0{width}x}")
        lines.append(f"total_bits {self.total_bits}")
        return "\n".join(lines) + "\n"


def build_messages(
    inst: ProblemInstance,
    a: PlacementVector,
    demand: Sequence[int],
    store: SubfileStore,
    caches: Dict[int, Cache],
    leaders: Optional[int] = None,
) -> DeliveryTranscript:
    """One XOR message per non-redundant (l+1)-subset, for every level with a_l > 0.

    The message for S is the XOR over k in S of W_{d_k, S minus k}. ``leaders``
    overrides the default leader group; it must hold exactly one requester of
    each distinct file.
    """
    K = inst.K
    if store.K != K or store.N != inst.N or len(caches) != K:
        raise ValueError("store/caches were built for a different instance")
    if len(demand) != K or any(not 1 <= n <= inst.N for n in demand):
        raise ValueError(f"demand must have {K} entries in [1, {inst.N}], got {tuple(demand)}")
    expected_bits = tuple(int(v * store.file_size) for v in a)
    if expected_bits != store.level_bits:
        raise ValueError("placement vector does not match the store's subfile sizes")

    if leaders is None:
        leaders = leader_set(demand)
    elif sorted(demand[k - 1] for k in members(leaders)) != sorted(set(demand)):
        raise ValueError("leader group must contain one requester of each distinct file")
    messages = []
    for l in range(K):
        width = store.level_bits[l]
        if width == 0:
            continue
        for S in non_redundant_subsets(K, leaders, l + 1):
            payload = 0
            for k in members(S):
                payload ^= store.subfiles[(demand[k - 1], S & ~(1 << (k - 1)))]
            messages.append(CodedMessage(S, l, width, payload))
    return DeliveryTranscript(
        inst.N, K, tuple(demand), leaders, messages, store.file_size, store.level_bits, store.seed
    )


class _Gf2Basis:
    """Row-echelon basis over GF(2), each row carrying an augmented payload.

    Rows are int bitsets over symbol indices; a row's pivot is its lowest set
    bit. Reducing a vector only touches pivots it actually hits.
    """

    def __init__(self) -> None:
        self.rows: Dict[int, Tuple[int, int]] = {}

    def reduce(self, vec: int, payload: int) -> Tuple[int, int]:
        while vec:
            low = vec & -vec
            hit = self.rows.get(low)
            if hit is None:
                break
            vec ^= hit[0]
            payload ^= hit[1]
        return vec, payload

    def add(self, vec: int, payload: int) -> None:
        while vec:
            low = vec & -vec
            hit = self.rows.get(low)
            if hit is None:
                self.rows[low] = (vec, payload)
                return
            vec ^= hit[0]
            payload ^= hit[1]

    def solve(self, vec: int) -> Optional[int]:
        """Payload of ``vec`` if it lies in the row space, else None."""
        rest, payload = self.reduce(vec, 0)
        return payload if rest == 0 else None


def decode_check(transcript: DeliveryTranscript, caches: Dict[int, Cache], user: int) -> int:
    """Recover user ``user``'s requested file from its cache and the transcript.

    For every level l, the unknowns are the symbols (n, S) with |S| = l; the
    user's cached symbols act as unit rows and each delivered (l+1)-message is
    one equation. Every needed symbol (d_k, S) with k not in S must lie in the
    row space. Raises :class:`DecodingError` otherwise.

    Cached symbols are eliminated by substitution before the remaining
    equations go through Gaussian elimination; that is exactly what pivoting
    on their unit rows would do, without materialising them.
    """
    K = transcript.K
    if not 1 <= user <= K:
        raise ValueError(f"user must lie in [1, {K}], got {user}")
    cache = caches[user]
    demand = transcript.demand
    wanted = demand[user - 1]
    me = 1 << (user - 1)
    parts: Dict[int, int] = {}

    by_level: Dict[int, List[CodedMessage]] = {}
    for msg in transcript.messages:
        by_level.setdefault(msg.level, []).append(msg)

    for l in range(K + 1):
        if transcript.level_bits[l] == 0:
            continue
        index: Dict[Symbol, int] = {}
        basis = _Gf2Basis()
        for msg in by_level.get(l, ()):
            row, payload = 0, msg.payload
            for k in members(msg.subset):
                sym = (demand[k - 1], msg.subset & ~(1 << (k - 1)))
                if sym[1] & me:
                    payload ^= cache[sym]
                else:
                    pos = index.setdefault(sym, len(index))
                    row ^= 1 << pos
            basis.add(row, payload)

        for S in subsets_of_size(K, l):
            if S & me:
                parts[S] = cache[(wanted, S)]
                continue
            pos = index.get((wanted, S))
            value = None if pos is None else basis.solve(1 << pos)
            if value is None:
                raise DecodingError(
                    f"user {user} cannot recover the subfile of file {wanted} for users "
                    f"{list(members(S))} under demand {demand}"
                )
            parts[S] = value

    out = 0
    for S in canonical_subsets(K):
        width = transcript.level_bits[S.bit_count()]
        if width:
            out = (out << width) | parts[S]
    return out


def delivered_load(transcript: DeliveryTranscript) -> Fraction:
    return Fraction(transcript.total_bits, transcript.file_size)


@dataclass
class SimulationResult:
    transcript: DeliveryTranscript
    load: Fraction
    expected_load: Fraction
    decoded: Dict[int, bool]
    failures: Dict[int, str]
    occupancy: Dict[int, int]  # filled only when this call built the caches

    @property
    def ok(self) -> bool:
        return not self.failures and self.load == self.expected_load


def simulate(
    inst: ProblemInstance,
    a: PlacementVector,
    demand: Sequence[int],
    seed: Optional[int] = 0,
    multiplier: int = 1,
    fill: str = "random",
    setup: Optional[Tuple[SubfileStore, Dict[int, Cache]]] = None,
) -> SimulationResult:
    """Run placement, delivery and decoding for one demand and check every user."""
    report = check_feasible(inst, a)
    if not report:
        raise ValueError(f"infeasible placement: {'; '.join(report.violations)}")
    if setup is None:
        setup = partition_and_cache(inst, a, choose_file_size(a) * multiplier, seed, fill)
        occupancy = {k: cache_occupancy(setup[0], c) for k, c in setup[1].items()}
    else:
        occupancy = {}
    store, caches = setup
    transcript = build_messages(inst, a, demand, store, caches)
    decoded, failures = {}, {}
    for k in range(1, inst.K + 1):
        try:
            bits = decode_check(transcript, caches, k)
        except DecodingError as exc:
            decoded[k] = False
            failures[k] = str(exc)
            continue
        decoded[k] = bits == store.files[demand[k - 1]]
        if not decoded[k]:
            failures[k] = f"user {k} decoded wrong bits for file {demand[k - 1]}"
    return SimulationResult(
        transcript=transcript,
        load=delivered_load(transcript),
        expected_load=per_demand_rate(inst, a, distinct_count(demand)),
        decoded=decoded,
        failures=failures,
        occupancy=occupancy,
    )


def non_redundant_count(K: int, n_leaders: int, size: int) -> int:
    return binom(K, size) - binom(K - n_leaders, size)
