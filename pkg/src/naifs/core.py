"""NAIFS data model: level-indexed map collections, words, compositions,
Bowen metrics, dynamical balls, blocked and shifted systems.

A schedule is a finite prefix of levels plus a periodic tail (the tail cycles
through the last ``period`` prefix levels), so level(j) is defined for every
j >= 1 and word-ensemble sizes are exact big integers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import InputError
from .maps import CompositeMap, MapBase
from .spaces import Space, coordinate_distances

WORD_CHUNK = 16  # fixed partition width; independent of thread count


def derive_seed(master: int, label: str) -> int:
    """Stable sub-seed: the master seed and a stage label hashed together."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class Word:
    """A start level m >= 1 plus one 0-based map index per level m..m+n-1."""

    start: int
    symbols: tuple[int, ...]

    def __post_init__(self):
        if self.start < 1:
            raise InputError("word start level must be >= 1")

    def __len__(self):
        return len(self.symbols)


class NaifsSchedule:
    """The sequence of map collections; level(j) for every j >= 1."""

    def __init__(self, space: Space, prefix: Sequence[Sequence[MapBase]], tail: str | tuple = "constant"):
        if not prefix:
            raise InputError("schedule needs at least one level")
        levels = []
        for lvl in prefix:
            lvl = tuple(lvl)
            if not lvl:
                raise InputError("every level must be non-empty")
            for m in lvl:
                if m.space_kind is not None and m.space_kind != space.kind:
                    raise InputError(f"map {m.describe()} does not act on {space.kind}")
                if m.dim != space.dim:
                    raise InputError(f"map {m.describe()} has wrong dimension")
            levels.append(lvl)
        if tail == "constant":
            period = 1
        elif isinstance(tail, tuple) and tail and tail[0] in ("block", "repeat-last-block"):
            period = int(tail[1])
        else:
            raise InputError("tail must be 'constant' or ('block', p)")
        if not (1 <= period <= len(levels)):
            raise InputError("tail period must be between 1 and the prefix length")
        self.space = space
        self.prefix = tuple(levels)
        self.period = period

    def level(self, j: int) -> tuple[MapBase, ...]:
        if j < 1:
            raise InputError("levels are indexed from 1")
        if j <= len(self.prefix):
            return self.prefix[j - 1]
        off = (j - len(self.prefix) - 1) % self.period
        return self.prefix[len(self.prefix) - self.period + off]

    def level_size(self, j: int) -> int:
        return len(self.level(j))

    def map_at(self, j: int, symbol: int) -> MapBase:
        lvl = self.level(j)
        if not (0 <= symbol < len(lvl)):
            raise InputError(f"symbol {symbol} out of range at level {j}")
        return lvl[symbol]

    def max_lipschitz(self) -> float:
        return max(m.lipschitz for lvl in self.prefix for m in lvl)

    def uniform_expansion(self):
        """(sigma, rho) if every scheduled map is expanding, else None."""
        infos = [m.expanding for lvl in self.prefix for m in lvl]
        if any(info is None for info in infos):
            return None
        return min(i.sigma for i in infos), min(i.rho for i in infos)

    def branch_radius(self):
        """Largest radius at which closest-preimage branch selection is
        certified for every scheduled map (None when any map lacks one)."""
        radii = [m.branch_radius for lvl in self.prefix for m in lvl]
        if any(r is None for r in radii):
            return None
        return min(radii)

    def describe(self) -> str:
        lines = [f"space={self.space.kind}^{self.space.dim}", f"period={self.period}"]
        for i, lvl in enumerate(self.prefix, start=1):
            lines.append(f"level{i}=[" + ";".join(m.describe() for m in lvl) + "]")
        return "|".join(lines)

    def system_hash(self) -> str:
        return hashlib.sha256(self.describe().encode()).hexdigest()[:16]

    def __repr__(self):
        return f"NaifsSchedule({self.describe()})"


def shifted(schedule: NaifsSchedule, k: int) -> NaifsSchedule:
    """The schedule seen from level k: level(j) of the result = level(j+k-1)."""
    if k < 1:
        raise InputError("shift index must be >= 1")
    if k == 1:
        return schedule
    last = max(len(schedule.prefix), k + schedule.period - 1)
    prefix = [schedule.level(j) for j in range(k, last + 1)]
    return NaifsSchedule(schedule.space, prefix, ("block", schedule.period))


def blocked(schedule: NaifsSchedule, n: int) -> NaifsSchedule:
    """The n-step blocked system: one composite map per n-word of each block."""
    if n < 1:
        raise InputError("block length must be >= 1")
    if n == 1:
        return schedule
    q = schedule.period // int(np.gcd(schedule.period, n % schedule.period or schedule.period))
    n_levels = -(-len(schedule.prefix) // n) + q
    prefix = []
    for j in range(1, n_levels + 1):
        start = (j - 1) * n + 1
        level_maps = []
        for word in _enumerate_words(schedule, start, n):
            factors = [schedule.map_at(start + i, word[i]) for i in range(n)]
            level_maps.append(CompositeMap(factors))
        prefix.append(level_maps)
    return NaifsSchedule(schedule.space, prefix, ("block", q))


def _enumerate_words(schedule: NaifsSchedule, m: int, n: int):
    sizes = [schedule.level_size(m + i) for i in range(n)]
    total = 1
    for s in sizes:
        total *= s
    for idx in range(total):
        yield _decode_word(idx, sizes)


def _decode_word(index: int, sizes: Sequence[int]) -> tuple[int, ...]:
    # last symbol varies fastest (C order)
    out = [0] * len(sizes)
    for pos in range(len(sizes) - 1, -1, -1):
        index, out[pos] = divmod(index, sizes[pos])
    return tuple(out)


def apply_word(schedule: NaifsSchedule, w: Word, k: int, x) -> np.ndarray:
    """phi_w^{m,k}(x); k = 0 is the identity."""
    if not (0 <= k <= len(w)):
        raise InputError(f"k={k} out of range for |w|={len(w)}")
    pt = schedule.space.canonicalize(x).reshape(1, -1)
    for i in range(k):
        pt = schedule.map_at(w.start + i, w.symbols[i]).apply(pt)
    return pt[0]


def orbit(schedule: NaifsSchedule, w: Word, x) -> np.ndarray:
    """The w-orbit [x, phi_w^{m,1}(x), ..., phi_w^{m,|w|}(x)] as (|w|+1, d)."""
    pt = schedule.space.canonicalize(x).reshape(1, -1)
    out = [pt[0]]
    for i in range(len(w)):
        pt = schedule.map_at(w.start + i, w.symbols[i]).apply(pt)
        out.append(pt[0])
    return np.array(out)


def orbit_matrix(schedule: NaifsSchedule, w: Word, k: int, pts: np.ndarray) -> np.ndarray:
    """Orbits of many points at once: (k+1, N, d) array."""
    if not (0 <= k <= len(w)):
        raise InputError(f"k={k} out of range for |w|={len(w)}")
    cur = schedule.space.canonicalize_array(pts)
    out = np.empty((k + 1,) + cur.shape)
    out[0] = cur
    for i in range(k):
        cur = schedule.map_at(w.start + i, w.symbols[i]).apply(cur)
        out[i + 1] = cur
    return out


def bowen_distance(schedule: NaifsSchedule, w: Word, k: int, x, y) -> float:
    """d_{w,k}(x,y) = max_{0<=j<=k} d(phi_w^{m,j}(x), phi_w^{m,j}(y))."""
    ox = orbit_matrix(schedule, w, k, np.asarray(x, dtype=np.float64).reshape(1, -1))
    oy = orbit_matrix(schedule, w, k, np.asarray(y, dtype=np.float64).reshape(1, -1))
    d = coordinate_distances(schedule.space, ox[:, 0, :], oy[:, 0, :])
    return float(d.max())


def in_dynamical_ball(schedule: NaifsSchedule, w: Word, k: int, center, eps: float, y) -> bool:
    """Membership in B(center; w, k, eps) (strict inequality)."""
    if not (eps > 0.0):
        raise InputError("eps must be positive")
    return bowen_distance(schedule, w, k, center, y) < eps


class WordEnsemble:
    """Iterator over I^{m,n}: exhaustive when the exact count fits the budget,
    otherwise an i.i.d.-uniform sample of exactly ``budget`` words.

    Iteration order is deterministic; chunks() exposes fixed-width partitions
    (exhaustive: index ranges; sampled: per-chunk derived seeds) so callers can
    evaluate words in parallel and still merge deterministically.
    """

    def __init__(self, schedule: NaifsSchedule, m: int, n: int, budget: int, seed: int):
        if m < 1 or n < 1:
            raise InputError("word ensembles need m, n >= 1")
        if budget < 1:
            raise InputError("budget must be >= 1")
        self.schedule = schedule
        self.m = m
        self.n = n
        self.seed = int(seed)
        self.sizes = [schedule.level_size(m + i) for i in range(n)]
        size = 1
        for s in self.sizes:
            size *= s
        self.size = size  # exact #(I^{m,n}), arbitrary precision
        self.sampled = size > budget
        self.count = budget if self.sampled else size

    @property
    def mode(self) -> str:
        return "sampled" if self.sampled else "exhaustive"

    def _chunk_words(self, chunk_index: int) -> list[Word]:
        lo = chunk_index * WORD_CHUNK
        hi = min(lo + WORD_CHUNK, self.count)
        if lo >= hi:
            return []
        if not self.sampled:
            return [Word(self.m, _decode_word(i, self.sizes)) for i in range(lo, hi)]
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=(self.seed, chunk_index))))
        draws = [rng.integers(0, s, size=hi - lo) for s in self.sizes]
        return [Word(self.m, tuple(int(draws[j][i]) for j in range(self.n))) for i in range(hi - lo)]

    def chunks(self) -> Iterator[tuple[int, list[Word]]]:
        n_chunks = -(-self.count // WORD_CHUNK)
        for c in range(n_chunks):
            yield c, self._chunk_words(c)

    def __iter__(self) -> Iterator[Word]:
        for _, ws in self.chunks():
            yield from ws

    def __len__(self):
        return self.count


def words(schedule: NaifsSchedule, m: int, n: int, budget: int, seed: int) -> WordEnsemble:
    return WordEnsemble(schedule, m, n, budget, seed)
