"""Specification-property tracing via inverse branches, topological-exactness
constants, and expansivity certification.

Tracing follows the constructive route: across each gap the space is covered by
images of delta-balls (topological exactness), so some preimage of the current
point lands in the previous target ball; through each window the composed
inverse branches contract back onto the target orbit.  Everything here needs a
uniformly expanding schedule; empirical verdicts are scale-stamped and never
claim a universal negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import NaifsSchedule, Word, derive_seed, orbit, orbit_matrix, words
from .errors import InputError, PreconditionError, ResolutionError
from .maps import CircleAffine, PomeauManneville
from .spaces import Grid, coordinate_distances, distance


# ---------------------------------------------------------------------------
# exactness and inverse branches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactnessReport:
    """Covering time for delta-balls: images of B(x, delta) under any word of
    length >= n are h-dense.  n is the value to use (safety-padded analytic
    one when available); n_empirical is the observed un-padded minimum."""

    n: int
    n_empirical: int | None
    n_analytic: int | None
    delta: float

    def __index__(self):
        return self.n


def _require_expanding(schedule: NaifsSchedule):
    ux = schedule.uniform_expansion()
    if ux is None:
        raise PreconditionError("schedule is not uniformly expanding")
    return ux


def _ball_sample(space, center: np.ndarray, delta: float, budget: int) -> np.ndarray:
    """Stratified sample of the open sup-ball B(center, delta).

    Grid points alias badly under integer circle maps (a dyadic lattice maps
    onto few residues), so density scans sample the continuum instead."""
    per_axis = max(2, int(round(budget ** (1.0 / space.dim))))
    offs = (np.arange(per_axis) + 0.5) / per_axis * 2.0 - 1.0  # (-1, 1) stratified
    axes = [center[i] + delta * offs for i in range(space.dim)]
    if space.dim == 1:
        pts = axes[0].reshape(-1, 1)
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    if not space.wrap:
        pts = np.clip(pts, 0.0, 1.0)
    return space.canonicalize_array(pts)


def _sample_is_dense(space, image: np.ndarray, tol: float) -> bool:
    """Does the image sample leave no gap larger than tol (up to rounding)?"""
    if space.dim == 1:
        coords = np.sort(image[:, 0])
        if coords.size == 0:
            return False
        gaps = np.diff(coords)
        max_gap = float(gaps.max()) if gaps.size else 0.0
        if space.wrap:
            max_gap = max(max_gap, 1.0 - float(coords[-1] - coords[0]))
            return max_gap <= tol + 1e-12
        return (coords[0] <= tol / 2 + 1e-12 and coords[-1] >= 1.0 - tol / 2 - 1e-12
                and max_gap <= tol + 1e-12)
    probe_axis = np.linspace(0.0, 1.0, max(4, int(2.0 / tol)), endpoint=not space.wrap)
    mesh = np.meshgrid(*([probe_axis] * space.dim), indexing="ij")
    probes = np.stack([m.reshape(-1) for m in mesh], axis=1)
    d = coordinate_distances(space, probes[:, None, :], image[None, :, :])
    return bool((d.min(axis=1) <= tol + 1e-12).all())


def exactness_N(schedule: NaifsSchedule, delta: float, grid: Grid, *, cap: int = 24,
                word_budget: int = 16, centers: int = 8, ball_points: int = 512,
                seed: int = 0, m_list=(1,)) -> ExactnessReport:
    """Smallest n (searched up to cap) such that the image of every sampled
    delta-ball under every tested word of length n is dense at the sample's own
    resolution; circle-affine schedules also get the analytic value
    ceil(log_sigma(1/(2 delta))) + 1, which the empirical scan must confirm.

    Pomeau-Manneville schedules are allowed on the empirical path (they are not
    uniformly expanding; their covering time is a measurement, not a theorem).
    """
    if not (delta > 0.0):
        raise InputError("delta must be positive")
    maps = [m for lvl in schedule.prefix for m in lvl]
    uniformly_expanding = all(m.expanding is not None for m in maps)
    if not uniformly_expanding and not all(
            m.expanding is not None or isinstance(m, PomeauManneville) for m in maps):
        raise PreconditionError("schedule is not uniformly expanding")
    analytic = None
    if uniformly_expanding and all(isinstance(m, CircleAffine) for m in maps):
        sigma = min(m.expanding.sigma for m in maps)
        analytic = max(1, math.ceil(math.log(1.0 / (2.0 * delta)) / math.log(sigma)) + 1)

    space = schedule.space
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=(seed, 0xE0))))
    center_pts = [space.canonicalize(rng.random(space.dim)) for _ in range(centers)]
    samples = [_ball_sample(space, c, delta, ball_points) for c in center_pts]
    tol = max(4.0 / ball_points, 2.0 * grid.spacing)

    def dense_at(n: int) -> bool:
        for m in m_list:
            for w in words(schedule, m, n, word_budget, derive_seed(seed, f"exactness:{m}:{n}")):
                for sample in samples:
                    image = orbit_matrix(schedule, w, n, sample)[n]
                    if not _sample_is_dense(space, image, tol):
                        return False
        return True

    n_empirical = None
    for n in range(1, cap + 1):
        if dense_at(n):
            n_empirical = n
            break
    if n_empirical is None:
        raise ResolutionError(f"no covering time <= {cap} at delta={delta}")
    if analytic is not None:
        if analytic < n_empirical:
            raise ResolutionError(
                f"analytic covering time {analytic} not confirmed (empirical {n_empirical})")
        return ExactnessReport(n=analytic, n_empirical=n_empirical, n_analytic=analytic, delta=delta)
    return ExactnessReport(n=n_empirical + 1, n_empirical=n_empirical, n_analytic=None, delta=delta)


def _level_preimages(schedule: NaifsSchedule, level: int, symbol: int, pts: list[np.ndarray]):
    m = schedule.map_at(level, symbol)
    out = []
    for p in pts:
        out.extend(m.preimages(p))
    return out


def word_preimages(schedule: NaifsSchedule, w: Word, y) -> list[np.ndarray]:
    """All preimages of y under phi_w^{m,|w|} (deterministic order)."""
    pts = [schedule.space.canonicalize(y)]
    for i in range(len(w) - 1, -1, -1):
        pts = _level_preimages(schedule, w.start + i, w.symbols[i], pts)
    key = sorted(range(len(pts)), key=lambda t: tuple(pts[t]))
    return [pts[t] for t in key]


def inverse_branch_compose(schedule: NaifsSchedule, w: Word, x, y) -> np.ndarray:
    """The unique preimage z of y under phi_w^{m,n} whose orbit shadows the
    orbit of x: d(phi_w^{m,j}(z), phi_w^{m,j}(x)) <= sigma^{j-n} d(y, phi_w^{m,n}(x)).

    The domain is the certified branch-selection ball around phi_w^{m,n}(x)
    (at least the injectivity constant rho; larger for circle-affine maps,
    whose branches are globally 1/k-contracting)."""
    sigma, rho = _require_expanding(schedule)
    radius = schedule.branch_radius() or rho
    space = schedule.space
    anchors = orbit(schedule, w, x)
    n = len(w)
    y = space.canonicalize(y)
    if distance(space, y, anchors[n]) >= radius:
        raise InputError(f"y outside the radius-{radius} ball around phi_w^{{m,n}}(x)")
    cur = y
    for j in range(n - 1, -1, -1):
        m = schedule.map_at(w.start + j, w.symbols[j])
        pre = m.preimages(cur)
        d = coordinate_distances(space, pre, anchors[j][None, :])
        order = sorted(range(pre.shape[0]), key=lambda t: (d[t], tuple(pre[t])))
        cur = pre[order[0]]
    return cur


# ---------------------------------------------------------------------------
# specification instances, tracing and verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpecInstance:
    """Targets x_1..x_s with shadowing windows [j_m, k_m] along a fixed word."""

    word: Word
    targets: tuple
    windows: tuple
    delta: float

    def __post_init__(self):
        if self.delta <= 0.0:
            raise InputError("delta must be positive")
        if len(self.targets) != len(self.windows) or not self.targets:
            raise InputError("need one window per target")
        prev_k = -1
        for idx, (j, k) in enumerate(self.windows):
            if idx == 0 and j != 0:
                raise InputError("first window must start at 0")
            if not (j <= k):
                raise InputError("windows need j <= k")
            if idx > 0 and not (prev_k < j):
                raise InputError("windows must be strictly ordered")
            prev_k = k
        if len(self.word) < self.windows[-1][1]:
            raise InputError("word too short for the last window")


@dataclass(frozen=True)
class TraceReport:
    errors: tuple
    delta: float
    passed: bool


def verify_trace(schedule: NaifsSchedule, inst: SpecInstance, x) -> TraceReport:
    """Per-window max tracing error of x against each target orbit, at delta."""
    k_last = inst.windows[-1][1]
    ox = orbit(schedule, Word(inst.word.start, inst.word.symbols[:k_last]), x)
    errors = []
    for (j, k), target in zip(inst.windows, inst.targets):
        ot = orbit(schedule, Word(inst.word.start, inst.word.symbols[:k]), target)
        err = max(
            distance(schedule.space, ox[i], ot[i]) for i in range(j, k + 1)
        )
        errors.append(float(err))
    passed = all(e <= inst.delta for e in errors)
    return TraceReport(errors=tuple(errors), delta=inst.delta, passed=passed)


def trace_specification(schedule: NaifsSchedule, inst: SpecInstance) -> np.ndarray:
    """Construct a point shadowing every window of ``inst`` along its word.

    Backward pass of the constructive argument: start at the last target's
    window center, pull back across each gap by exhaustive preimage enumeration
    (keeping a preimage inside the previous target ball), then through each
    window by composed inverse branches anchored at the target orbit."""
    sigma, rho = _require_expanding(schedule)
    radius = schedule.branch_radius() or rho
    if inst.delta > radius:
        raise PreconditionError(
            f"delta={inst.delta} exceeds the certified branch-selection radius {radius}")
    space = schedule.space
    target_orbits = [orbit(schedule, inst.word, t) for t in inst.targets]
    s = len(inst.targets)
    j_s = inst.windows[-1][0]
    cur = target_orbits[-1][j_s]
    for i in range(s - 2, -1, -1):
        j_i, k_i = inst.windows[i]
        j_next = inst.windows[i + 1][0]
        gap_word = Word(k_i + 1, inst.word.symbols[k_i:j_next])
        center = target_orbits[i][k_i]
        cands = [p for p in word_preimages(schedule, gap_word, cur)
                 if distance(space, p, center) < inst.delta]
        if not cands:
            raise ResolutionError(
                f"no preimage across gap [{k_i}, {j_next}] lands in the delta-ball of target {i}")
        cur = cands[0]
        if k_i > j_i:
            window_word = Word(j_i + 1, inst.word.symbols[j_i:k_i])
            cur = inverse_branch_compose(schedule, window_word, target_orbits[i][j_i], cur)
    report = verify_trace(schedule, inst, cur)
    if not report.passed:
        raise ResolutionError(f"constructed point fails verification: errors {report.errors}")
    return cur


def random_instances(schedule: NaifsSchedule, count: int, delta: float, gap: int, seed: int,
                     s_max: int = 4, window_max: int = 3) -> list[SpecInstance]:
    """Seeded random specification instances with the given inter-window gap."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=(seed, 0x51))))
    out = []
    dim = schedule.space.dim
    for _ in range(count):
        s = int(rng.integers(2, s_max + 1))
        windows = []
        j = 0
        for _ in range(s):
            k = j + int(rng.integers(0, window_max + 1))
            windows.append((j, k))
            j = k + gap
        k_last = windows[-1][1]
        sizes = [schedule.level_size(lv) for lv in range(1, k_last + 1)]
        symbols = tuple(int(rng.integers(0, sz)) for sz in sizes)
        targets = tuple(schedule.space.canonicalize(rng.random(dim)) for _ in range(s))
        out.append(SpecInstance(word=Word(1, symbols), targets=targets,
                                windows=tuple(windows), delta=delta))
    return out


# ---------------------------------------------------------------------------
# expansivity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansivityCertificate:
    delta: float
    gamma_table: tuple
    method: str
    system_hash: str

    def k0(self, gamma: float) -> int:
        for g, k in self.gamma_table:
            if abs(g - gamma) < 1e-15:
                return k
        raise InputError(f"gamma={gamma} not in certificate table")

    def to_dict(self) -> dict:
        return {"delta": self.delta, "gamma_table": [[g, k] for g, k in self.gamma_table],
                "method": self.method, "system_hash": self.system_hash}


@dataclass(frozen=True)
class NotExpansiveVerdict:
    delta: float
    gamma: float
    n_cap: int
    pair_budget: int
    word_budget: int
    witness: tuple

    def to_dict(self) -> dict:
        x, y, n, d = self.witness
        return {"delta": self.delta, "gamma": self.gamma, "n_cap": self.n_cap,
                "pair_budget": self.pair_budget, "word_budget": self.word_budget,
                "witness": {"x": list(x), "y": list(y), "n": n, "bowen_distance": d}}


def expansivity_check(schedule: NaifsSchedule, delta: float, gamma_list, *, n_cap: int = 12,
                      pair_budget: int = 64, word_budget: int = 16, seed: int = 0):
    """Certify delta-expansivity.

    Uniformly expanding schedules take the analytic route (valid for any
    delta <= rho): k0(gamma) = ceil(log_sigma(delta/gamma)) + 1.  Otherwise a
    seeded scan looks for gamma-separated pairs whose Bowen distance stays
    <= delta; a violation at every candidate k0 up to the cap yields a
    scale-stamped not-expansive verdict."""
    if not (delta > 0.0):
        raise InputError("delta must be positive")
    gamma_list = sorted(set(float(g) for g in gamma_list), reverse=True)
    if not gamma_list or any(g <= 0 for g in gamma_list):
        raise InputError("gamma values must be positive")
    ux = schedule.uniform_expansion()
    if ux is not None:
        sigma, rho = ux
        if delta <= rho:
            table = tuple(
                (g, max(1, math.ceil(math.log(delta / g) / math.log(sigma)) + 1))
                for g in gamma_list
            )
            return ExpansivityCertificate(delta=delta, gamma_table=table, method="analytic",
                                          system_hash=schedule.system_hash())
    # empirical scan
    space = schedule.space
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=(seed, 0xE))))
    table = []
    for gamma in gamma_list:
        pairs = []
        attempts = 0
        while len(pairs) < pair_budget and attempts < pair_budget * 100:
            attempts += 1
            a = space.canonicalize(rng.random(space.dim))
            b = space.canonicalize(rng.random(space.dim))
            if distance(space, a, b) >= gamma:
                pairs.append((a, b))
        worst_n = 0
        witness = None
        for n in range(1, n_cap + 1):
            ens = words(schedule, 1, n, word_budget, derive_seed(seed, f"expansivity:{n}"))
            for w in ens:
                for a, b in pairs:
                    ob = orbit_matrix(schedule, w, n, np.stack([a, b]))
                    d = float(coordinate_distances(space, ob[:, 0, :], ob[:, 1, :]).max())
                    if d <= delta:
                        worst_n = n
                        witness = (a, b, n, d)
        if worst_n >= n_cap:
            return NotExpansiveVerdict(delta=delta, gamma=gamma, n_cap=n_cap,
                                       pair_budget=pair_budget, word_budget=word_budget,
                                       witness=witness)
        table.append((gamma, worst_n + 1))
    return ExpansivityCertificate(delta=delta, gamma_table=tuple(table), method="empirical scan",
                                  system_hash=schedule.system_hash())
