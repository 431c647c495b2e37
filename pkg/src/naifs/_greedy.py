"""Greedy and exact kernels over precomputed orbit matrices.

An orbit matrix has shape (k+1, N, d): row j holds the j-th orbit images of N
candidate points.  All kernels work on the Bowen (running-max) metric induced
by those rows; `wrap` selects the circle metric per coordinate.

The greedy scans exploit one fact everywhere: the Bowen distance dominates the
row-0 distance, so only candidates within eps in the base metric can ever fail
a separation test.  For 1-d grids (coordinates ascending) that base window is
located by binary search; windows are padded by 1e-12 and re-checked exactly,
so the fast path returns bit-identical results to the generic one.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn
        return deco if not (args and callable(args[0])) else args[0]

_PAD = 1e-12


def _row_dist(a: np.ndarray, B: np.ndarray, wrap: bool) -> np.ndarray:
    # a: (d,), B: (K, d) -> (K,)
    delta = np.abs(B - a)
    if wrap:
        delta = np.minimum(delta, 1.0 - delta)
    return delta.max(axis=1)


def _window_candidates(coords: np.ndarray, upto: int, x: float, eps: float, wrap: bool) -> np.ndarray:
    """Indices < upto whose base distance to x can be <= eps (sorted 1-d coords).

    The window is padded by 1e-12 so float rounding cannot exclude a true
    member; callers re-check the actual distances."""
    view = coords[:upto]
    lo = int(np.searchsorted(view, x - eps - _PAD, side="left"))
    hi = int(np.searchsorted(view, x + eps + _PAD, side="right"))
    idx = np.arange(lo, hi, dtype=np.int64)
    if wrap:
        head_hi = int(np.searchsorted(view, x + eps - 1.0 + _PAD, side="right"))
        if head_hi > 0 and lo > 0:
            idx = np.concatenate([np.arange(0, min(head_hi, lo), dtype=np.int64), idx])
        tail_lo = int(np.searchsorted(view, x - eps + 1.0 - _PAD, side="left"))
        if tail_lo < upto and tail_lo < upto:
            start = max(tail_lo, hi)
            if start < upto:
                idx = np.concatenate([idx, np.arange(start, upto, dtype=np.int64)])
    return idx


@njit(cache=True)
def _pair_not_separated(orbits, i, j, wrap, eps):
    # True iff every orbit row keeps the pair within eps
    for r in range(orbits.shape[0]):
        d = abs(orbits[r, i] - orbits[r, j])
        if wrap and d > 0.5:
            d = 1.0 - d
        if d > eps:
            return False
    return True


@njit(cache=True)
def _pair_bowen(orbits, i, j, wrap):
    out = 0.0
    for r in range(orbits.shape[0]):
        d = abs(orbits[r, i] - orbits[r, j])
        if wrap and d > 0.5:
            d = 1.0 - d
        if d > out:
            out = d
    return out


@njit(cache=True)
def _lower_bound(coords, upto, value):
    lo, hi = 0, upto
    while lo < hi:
        mid = (lo + hi) // 2
        if coords[mid] < value:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def _greedy_sep_1d(orbits, wrap, eps, pad):
    k1, N = orbits.shape
    coords = orbits[0]
    kept = np.empty(N, np.int64)
    kc = 0
    for i in range(N):
        x = coords[i]
        ok = True
        t = kc - 1
        while t >= 0:  # kept coords ascend; walk the near tail
            j = kept[t]
            if coords[j] < x - eps - pad:
                break
            if _pair_not_separated(orbits, i, j, wrap, eps):
                ok = False
                break
            t -= 1
        if ok and wrap:
            bound = x + eps - 1.0 + pad
            t = 0
            while t < kc:  # wrap-around head
                j = kept[t]
                if coords[j] > bound:
                    break
                if _pair_not_separated(orbits, i, j, wrap, eps):
                    ok = False
                    break
                t += 1
        if ok:
            kept[kc] = i
            kc += 1
    return kept[:kc]


@njit(cache=True)
def _ball_windows_1d(orbits, wrap, eps, pad):
    # candidate-window sizes per center (upper bound on ball sizes)
    k1, N = orbits.shape
    coords = orbits[0]
    starts = np.empty(N + 1, np.int64)
    starts[0] = 0
    for i in range(N):
        x = coords[i]
        lo = _lower_bound(coords, N, x - eps - pad)
        hi = lo
        while hi < N and coords[hi] <= x + eps + pad:
            hi += 1
        cnt = hi - lo
        if wrap:
            head_hi = 0
            while head_hi < N and coords[head_hi] <= x + eps - 1.0 + pad:
                head_hi += 1
            cnt += min(head_hi, lo)
            tail_lo = _lower_bound(coords, N, x - eps + 1.0 - pad)
            if max(tail_lo, hi) < N:
                cnt += N - max(tail_lo, hi)
        starts[i + 1] = starts[i] + cnt
    return starts


@njit(cache=True)
def _balls_1d(orbits, wrap, eps, pad, starts):
    k1, N = orbits.shape
    coords = orbits[0]
    flat = np.empty(starts[N], np.int64)
    dist = np.empty(starts[N], np.float64)
    counts = np.zeros(N, np.int64)
    for i in range(N):
        x = coords[i]
        pos = starts[i]
        lo = _lower_bound(coords, N, x - eps - pad)
        hi = lo
        while hi < N and coords[hi] <= x + eps + pad:
            hi += 1
        if wrap:
            head_hi = 0
            while head_hi < N and coords[head_hi] <= x + eps - 1.0 + pad:
                head_hi += 1
            for j in range(min(head_hi, lo)):
                d = _pair_bowen(orbits, i, j, wrap)
                if d <= eps:
                    flat[pos] = j
                    dist[pos] = d
                    pos += 1
        for j in range(lo, hi):
            d = _pair_bowen(orbits, i, j, wrap)
            if d <= eps:
                flat[pos] = j
                dist[pos] = d
                pos += 1
        if wrap:
            tail_lo = _lower_bound(coords, N, x - eps + 1.0 - pad)
            for j in range(max(tail_lo, hi), N):
                d = _pair_bowen(orbits, i, j, wrap)
                if d <= eps:
                    flat[pos] = j
                    dist[pos] = d
                    pos += 1
        counts[i] = pos - starts[i]
    return flat, dist, counts


def greedy_separated(orbits: np.ndarray, wrap: bool, eps: float, order: np.ndarray | None = None) -> np.ndarray:
    """Scan candidates in ``order`` (default: index order), keeping a point iff
    its Bowen distance to every kept point exceeds eps.  Returns kept positions
    (into the N axis) in the order they were kept."""
    k1, N, d = orbits.shape
    if N == 0:
        return np.empty(0, dtype=np.int64)
    if order is None and d == 1 and HAVE_NUMBA:
        return _greedy_sep_1d(np.ascontiguousarray(orbits[:, :, 0]), wrap, eps, _PAD)
    base = orbits[0]
    fast = order is None and d == 1
    scan = np.arange(N, dtype=np.int64) if order is None else np.asarray(order, dtype=np.int64)
    kept = np.empty(N, dtype=np.int64)
    kept_coords = np.empty(N) if fast else None
    kc = 0
    for i in scan:
        if kc == 0:
            kept[0] = i
            if fast:
                kept_coords[0] = base[i, 0]
            kc = 1
            continue
        if fast:
            cand = kept[_window_candidates(kept_coords, kc, base[i, 0], eps, wrap)]
        else:
            cand = kept[:kc]
        alive = cand
        for j in range(k1):
            if alive.size == 0:
                break
            dj = _row_dist(orbits[j, i], orbits[j, alive], wrap)
            alive = alive[dj <= eps]
        if alive.size == 0:
            kept[kc] = i
            if fast:
                kept_coords[kc] = base[i, 0]
            kc += 1
    return kept[:kc].copy()


def bowen_balls(orbits: np.ndarray, wrap: bool, eps: float):
    """For every point i, the indices within Bowen distance <= eps of i and
    their exact Bowen distances (so the strict-< ball can be derived)."""
    k1, N, d = orbits.shape
    if d == 1 and HAVE_NUMBA and N > 0:
        rows = np.ascontiguousarray(orbits[:, :, 0])
        starts = _ball_windows_1d(rows, wrap, eps, _PAD)
        flat, dist, counts = _balls_1d(rows, wrap, eps, _PAD, starts)
        members = [flat[starts[i]:starts[i] + counts[i]] for i in range(N)]
        dists = [dist[starts[i]:starts[i] + counts[i]] for i in range(N)]
        return members, dists
    base = orbits[0]
    fast = d == 1
    coords = base[:, 0] if fast else None
    members: list[np.ndarray] = []
    dists: list[np.ndarray] = []
    for i in range(N):
        if fast:
            cand = _window_candidates(coords, N, coords[i], eps, wrap)
        else:
            cand = np.arange(N, dtype=np.int64)
        running = _row_dist(orbits[0, i], orbits[0, cand], wrap)
        keep = running <= eps
        alive, running = cand[keep], running[keep]
        for j in range(1, k1):
            if alive.size == 0:
                break
            dj = _row_dist(orbits[j, i], orbits[j, alive], wrap)
            running = np.maximum(running, dj)
            keep = running <= eps
            alive, running = alive[keep], running[keep]
        members.append(alive.astype(np.int64))
        dists.append(running)
    return members, dists


def all_pairs_separated(orbits: np.ndarray, wrap: bool, eps: float) -> bool:
    """Cheap sufficient test that every pair of candidates is Bowen-separated
    by > eps: on sorted 1-d coordinates the minimum pairwise base distance is
    the minimum adjacent gap, and the Bowen distance dominates the base one.
    Shortcuts the fully-saturated case (all counts = N, singleton balls)."""
    k1, N, d = orbits.shape
    if N < 2 or d != 1:
        return False
    coords = orbits[0, :, 0]
    min_gap = float(np.diff(coords).min()) if N > 1 else 1.0
    if wrap:
        min_gap = min(min_gap, 1.0 - float(coords[-1] - coords[0]))
    return min_gap > eps


def bowen_matrix(orbits: np.ndarray, wrap: bool) -> np.ndarray:
    """Full pairwise Bowen distance matrix (small instances only)."""
    k1, M, d = orbits.shape
    out = np.zeros((M, M))
    for j in range(k1):
        row = orbits[j]
        delta = np.abs(row[:, None, :] - row[None, :, :])
        if wrap:
            delta = np.minimum(delta, 1.0 - delta)
        np.maximum(out, delta.max(axis=2), out)
    return out


def greedy_weighted_cover(members: list, weights: np.ndarray, n_points: int) -> list[int]:
    """Weighted greedy set cover over balls indexed by center.

    Picks the ball minimizing weight / newly-covered (ties: smaller index); a
    uniform positive rescaling of the weights cannot change the picks.  With
    unit weights this is the classic most-new-points-first greedy."""
    if n_points == 0:
        return []
    covered = np.zeros(n_points, dtype=bool)
    heap = []
    for i, mem in enumerate(members):
        if len(mem):
            heapq.heappush(heap, (weights[i] / len(mem), i, len(mem)))
    chosen: list[int] = []
    remaining = n_points
    while remaining > 0:
        if not heap:
            raise RuntimeError("cover greedy ran out of balls")  # balls contain self
        ratio, i, gain = heapq.heappop(heap)
        true_gain = int(np.count_nonzero(~covered[members[i]]))
        if true_gain == 0:
            continue
        if true_gain != gain:
            heapq.heappush(heap, (weights[i] / true_gain, i, true_gain))
            continue
        chosen.append(i)
        covered[members[i]] = True
        remaining -= true_gain
    return chosen


EXACT_LIMIT = 24


def exact_max_weight_separated(dist: np.ndarray, eps: float, weights: np.ndarray):
    """Maximum-weight eps-separated subset by branch and bound (<= 24 points).

    Conflicts are pairs at Bowen distance <= eps.  Returns (weight, indices).
    """
    M = dist.shape[0]
    if M == 0:
        return 0.0, []
    conflict = []
    for i in range(M):
        mask = 1 << i
        for j in range(M):
            if j != i and dist[i, j] <= eps:
                mask |= 1 << j
        conflict.append(mask)
    w = [float(x) for x in weights]
    # greedy seed: highest weight first
    used = 0
    seed_w, seed_set = 0.0, []
    for i in sorted(range(M), key=lambda t: (-w[t], t)):
        if not (used >> i) & 1:
            seed_set.append(i)
            seed_w += w[i]
            used |= conflict[i]
    best = [seed_w, sorted(seed_set)]

    def dfs(mask: int, cur_w: float, cur: list, rem_w: float):
        if cur_w + rem_w <= best[0]:
            return
        if mask == 0:
            if cur_w > best[0]:
                best[0] = cur_w
                best[1] = sorted(cur)
            return
        node, node_w = -1, -1.0
        mm = mask
        while mm:
            lsb = mm & -mm
            j = lsb.bit_length() - 1
            if w[j] > node_w:
                node_w = w[j]
                node = j
            mm ^= lsb
        nb = conflict[node] & mask
        removed = 0.0
        mm = nb
        while mm:
            lsb = mm & -mm
            removed += w[lsb.bit_length() - 1]
            mm ^= lsb
        cur.append(node)
        dfs(mask & ~nb, cur_w + w[node], cur, rem_w - removed)
        cur.pop()
        dfs(mask & ~(1 << node), cur_w, cur, rem_w - w[node])

    dfs((1 << M) - 1, 0.0, [], sum(w))
    return best[0], best[1]


def exact_min_weight_cover(member_masks: list[int], weights: np.ndarray, n_points: int):
    """Minimum-weight cover by the given balls via DFS over minimal covers.

    Branches on the lowest-index uncovered point; weights are positive, so only
    inclusion-minimal covers matter.  Returns (weight, chosen ball indices)."""
    if n_points == 0:
        return 0.0, []
    full = (1 << n_points) - 1
    w = [float(x) for x in weights]
    covering: list[list[int]] = [[] for _ in range(n_points)]
    for b, mask in enumerate(member_masks):
        mm = mask
        while mm:
            lsb = mm & -mm
            covering[lsb.bit_length() - 1].append(b)
            mm ^= lsb
    max_ball = max((m.bit_count() for m in member_masks), default=0)
    min_w = min(w) if w else 0.0
    best = [math.inf, None]

    def dfs(uncovered: int, cur_w: float, cur: list):
        if uncovered == 0:
            if cur_w < best[0]:
                best[0] = cur_w
                best[1] = list(cur)
            return
        bound = cur_w + math.ceil(uncovered.bit_count() / max_ball) * min_w
        if bound >= best[0]:
            return
        p = (uncovered & -uncovered).bit_length() - 1
        for b in covering[p]:
            cur.append(b)
            dfs(uncovered & ~member_masks[b], cur_w + w[b], cur)
            cur.pop()

    dfs(full, 0.0, [])
    if best[1] is None:
        raise RuntimeError("no cover found")  # impossible: balls contain self
    return best[0], sorted(best[1])


def members_to_masks(members: list) -> list[int]:
    masks = []
    for mem in members:
        m = 0
        for j in mem:
            m |= 1 << int(j)
        masks.append(m)
    return masks
