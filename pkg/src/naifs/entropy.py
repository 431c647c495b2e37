"""Separated/spanning/cover counting, word-averaged growth tables, entropy and
asymptotic-entropy estimation, nonwandering scan, entropy-point probing.

Estimation pipeline: averaged_counts builds a table of word-averaged counts
S_n(eps), R_n(eps) on a finite grid; entropy_estimate fits the exponential
growth rate of log S_n over a clean n-window per eps and reports the rate at
the smallest usable eps.  Counts near the grid cardinality are quantization
noise, not dynamics, so the window keeps only n with S_n <= grid_size/8 and
trims trailing points while the fit residuals stay above 0.08.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._greedy import (
    EXACT_LIMIT,
    all_pairs_separated,
    bowen_balls,
    bowen_matrix,
    exact_max_weight_separated,
    exact_min_weight_cover,
    greedy_separated,
    greedy_weighted_cover,
    members_to_masks,
)
from .core import NaifsSchedule, Word, WordEnsemble, derive_seed, orbit_matrix, shifted, words
from .errors import InputError, SaturationError, UnderResolvedError
from .spaces import Grid, ball_indices, coordinate_distances

SAT_FRACTION = 0.125  # counts above grid_size/8 are dropped from fit windows
RESID_TOL = 0.08
MIN_WINDOW = 3
DISTORTION_FACTOR = 10.0


# ---------------------------------------------------------------------------
# per-word counting
# ---------------------------------------------------------------------------

def _resolve_y(grid: Grid, y_idx) -> np.ndarray:
    if y_idx is None:
        return grid.index_array()
    y = np.asarray(y_idx, dtype=np.int64)
    if y.ndim != 1:
        raise InputError("Y must be a 1-d array of grid indices")
    return np.sort(y)


def _check_word(w: Word, n: int):
    if n != len(w):
        raise InputError(f"n={n} must equal |w|={len(w)}")


def word_counts(schedule: NaifsSchedule, grid: Grid, y_idx, w: Word, n: int, eps: float,
                need_spanning: bool = True, need_cover: bool = False):
    """Greedy separated / spanning / cover counts for one word.

    Returns (separated, spanning, cover); entries not requested are None.
    The greedy separated set doubles as the spanning certificate: it is
    inclusion-maximal, hence eps-spans the candidate set.
    """
    _check_word(w, n)
    if not (eps > 0.0):
        raise InputError("eps must be positive")
    y = _resolve_y(grid, y_idx)
    orbits = orbit_matrix(schedule, w, n, grid.points[y])
    wrap = schedule.space.wrap
    m = y.size
    if all_pairs_separated(orbits, wrap, eps):
        sep = m
        span = m if need_spanning else None
        cov = m if need_cover else None
        return sep, span, cov
    kept = greedy_separated(orbits, wrap, eps)
    sep = int(kept.size)
    span = cov = None
    if need_spanning or need_cover:
        members, dists = bowen_balls(orbits, wrap, eps)
        if need_spanning:
            chosen = greedy_weighted_cover(members, np.ones(m), m)
            span = min(len(chosen), sep)
        if need_cover:
            strict = [mem[d < eps] for mem, d in zip(members, dists)]
            cov = len(greedy_weighted_cover(strict, np.ones(m), m))
    return sep, span, cov


def separated_count(schedule: NaifsSchedule, grid: Grid, y_idx, w: Word, n: int, eps: float,
                    exact: bool = False) -> int:
    """Maximal-cardinality (n,w,eps)-separated subset of Y: exact branch-and-
    bound for <= 24 candidates, greedy grid-order lower bound otherwise."""
    if exact:
        y = _resolve_y(grid, y_idx)
        if y.size > EXACT_LIMIT:
            raise InputError(f"exact mode limited to {EXACT_LIMIT} points, got {y.size}")
        _check_word(w, n)
        orbits = orbit_matrix(schedule, w, n, grid.points[y])
        dist = bowen_matrix(orbits, schedule.space.wrap)
        best_w, _ = exact_max_weight_separated(dist, eps, np.ones(y.size))
        return int(round(best_w))
    sep, _, _ = word_counts(schedule, grid, y_idx, w, n, eps, need_spanning=False)
    return sep


def spanning_count(schedule: NaifsSchedule, grid: Grid, y_idx, w: Word, n: int, eps: float,
                   exact: bool = False) -> int:
    """Minimal-cardinality subset of Y spanning Y within eps (non-strict) in the
    Bowen metric: exact DFS on <= 24 candidates, else min(greedy set cover,
    cardinality of the maximal separated set, which always spans)."""
    if exact:
        y = _resolve_y(grid, y_idx)
        if y.size > EXACT_LIMIT:
            raise InputError(f"exact mode limited to {EXACT_LIMIT} points, got {y.size}")
        _check_word(w, n)
        orbits = orbit_matrix(schedule, w, n, grid.points[y])
        dist = bowen_matrix(orbits, schedule.space.wrap)
        masks = [int(sum(1 << j for j in np.nonzero(dist[i] <= eps)[0])) for i in range(y.size)]
        best_w, _ = exact_min_weight_cover(masks, np.ones(y.size), y.size)
        return int(round(best_w))
    _, span, _ = word_counts(schedule, grid, y_idx, w, n, eps, need_spanning=True)
    return span


def cover_count(schedule: NaifsSchedule, grid: Grid, w: Word, n: int, eps: float) -> int:
    """Greedy count of dynamical eps-balls (strict radius) centered at grid
    points that cover the grid; an upper-bound surrogate for the minimal
    subcover cardinality of the eps-ball cover."""
    _, _, cov = word_counts(schedule, grid, None, w, n, eps, need_spanning=False, need_cover=True)
    return cov


# ---------------------------------------------------------------------------
# word-averaged tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CountRecord:
    eps: float
    n: int
    ensemble_size: int
    sampled: bool
    s_mean: float
    s_stderr: float
    r_mean: float
    r_stderr: float
    c_mean: float | None
    grid_size: int
    distortion: bool
    per_word_s: tuple | None = field(default=None, repr=False)


def _mean_stderr(values: np.ndarray, sampled: bool) -> tuple[float, float]:
    mean = float(values.mean())
    if not sampled or values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def _chunk_jobs(ensemble: WordEnsemble, fn, threads: int):
    chunks = list(ensemble.chunks())
    if threads <= 1:
        return [fn(ws) for _, ws in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, [ws for _, ws in chunks]))


def averaged_counts(schedule: NaifsSchedule, grid: Grid, eps_list, n_list, budget: int, seed: int,
                    y_idx=None, with_cover: bool = False, threads: int = 1,
                    keep_per_word: bool = False) -> list[CountRecord]:
    """Word-averaged separated/spanning counts S_n, R_n for each (eps, n).

    Exhaustive over I^{1,n} when its exact size fits the budget, else a seeded
    i.i.d. word sample with reported standard errors.  Per-word work runs in
    fixed-width chunks; chunk results merge in index order, so values do not
    depend on the thread count.
    """
    if not eps_list or not n_list:
        raise InputError("eps_list and n_list must be non-empty")
    eps_list = sorted(set(float(e) for e in eps_list), reverse=True)
    y = _resolve_y(grid, y_idx)
    lip = schedule.max_lipschitz()
    records = []
    for n in sorted(set(int(v) for v in n_list)):
        ens = words(schedule, 1, n, budget, seed)

        def eval_chunk(ws, n=n):
            out = []
            ones = np.ones(y.size)
            for w in ws:
                per_eps = []
                orbits = orbit_matrix(schedule, w, n, grid.points[y])
                wrap = schedule.space.wrap
                live = [eps for eps in eps_list if not all_pairs_separated(orbits, wrap, eps)]
                members = dists = None
                if live:
                    # one ball pass at the largest live eps; smaller eps filter it
                    members, dists = bowen_balls(orbits, wrap, live[0])
                for eps in eps_list:
                    if eps not in live:
                        m = y.size
                        per_eps.append((m, m, float(m) if with_cover else None))
                        continue
                    kept = greedy_separated(orbits, wrap, eps)
                    mem_eps = [m_[d <= eps] for m_, d in zip(members, dists)]
                    span = min(len(greedy_weighted_cover(mem_eps, ones, y.size)), kept.size)
                    cov = None
                    if with_cover:
                        strict = [m_[d < eps] for m_, d in zip(members, dists)]
                        cov = float(len(greedy_weighted_cover(strict, ones, y.size)))
                    per_eps.append((int(kept.size), int(span), cov))
                out.append(per_eps)
            return out

        chunk_results = _chunk_jobs(ens, eval_chunk, threads)
        per_word = [row for chunk in chunk_results for row in chunk]
        for ei, eps in enumerate(eps_list):
            s_vals = np.array([row[ei][0] for row in per_word], dtype=np.float64)
            r_vals = np.array([row[ei][1] for row in per_word], dtype=np.float64)
            s_mean, s_se = _mean_stderr(s_vals, ens.sampled)
            r_mean, r_se = _mean_stderr(r_vals, ens.sampled)
            c_mean = None
            if with_cover:
                c_vals = np.array([row[ei][2] for row in per_word], dtype=np.float64)
                c_mean = float(c_vals.mean())
            records.append(CountRecord(
                eps=eps, n=n, ensemble_size=ens.size, sampled=ens.sampled,
                s_mean=s_mean, s_stderr=s_se, r_mean=r_mean, r_stderr=r_se,
                c_mean=c_mean, grid_size=int(y.size),
                distortion=bool(lip**n * grid.spacing > eps / DISTORTION_FACTOR),
                per_word_s=tuple(int(row[ei][0]) for row in per_word) if keep_per_word else None,
            ))
    return records


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsRate:
    eps: float
    rate: float | None
    stderr: float | None
    window: tuple[int, ...]
    dropped_saturated: tuple[int, ...]
    dropped_residual: tuple[int, ...]
    usable: bool
    max_residual: float | None
    suffix_rate: float | None


def fit_window_rate(ns, log_means, log_vars, sizes, grid_size) -> EpsRate:
    """OLS slope of log-mean vs n over the clean window (see module docstring).

    log_vars carry Monte Carlo variances of the log-means (0 when exhaustive);
    the reported stderr combines fit residuals with those variances.
    """
    order = np.argsort(ns)
    ns = np.asarray(ns, dtype=np.float64)[order]
    ys = np.asarray(log_means, dtype=np.float64)[order]
    vs = np.asarray(log_vars, dtype=np.float64)[order]
    sz = np.asarray(sizes, dtype=np.float64)[order]
    # counts this small cannot be grid exhaustion even on tiny candidate sets
    cap = max(4.0, grid_size * SAT_FRACTION)
    keep = sz <= cap
    dropped_sat = tuple(int(v) for v in ns[~keep])
    ns, ys, vs = ns[keep], ys[keep], vs[keep]
    dropped_resid: list[int] = []

    def ols(nn, yy):
        nbar = nn.mean()
        sxx = float(((nn - nbar) ** 2).sum())
        slope = float(((nn - nbar) * (yy - yy.mean())).sum() / sxx)
        resid = yy - (yy.mean() + slope * (nn - nbar))
        return slope, resid, sxx

    while ns.size >= MIN_WINDOW:
        slope, resid, sxx = ols(ns, ys)
        if float(np.abs(resid).max()) <= RESID_TOL or ns.size == MIN_WINDOW:
            break
        dropped_resid.append(int(ns[-1]))
        ns, ys, vs = ns[:-1], ys[:-1], vs[:-1]
    eps = None  # filled by caller
    if ns.size < MIN_WINDOW:
        return EpsRate(eps=math.nan, rate=None, stderr=None, window=(),
                       dropped_saturated=dropped_sat, dropped_residual=tuple(dropped_resid),
                       usable=False, max_residual=None, suffix_rate=None)
    slope, resid, sxx = ols(ns, ys)
    dof = max(ns.size - 2, 1)
    resid_var = float((resid**2).sum() / dof)
    coeff = (ns - ns.mean()) / sxx
    mc_var = float((coeff**2 * vs).sum())
    stderr = math.sqrt(resid_var / sxx + mc_var)
    # alternative limsup surrogate: best mean increment over suffixes
    suffix = max(
        (ys[-1] - ys[i]) / (ns[-1] - ns[i]) for i in range(ns.size - 1)
    ) if ns.size >= 2 else None
    return EpsRate(eps=math.nan, rate=slope, stderr=stderr,
                   window=tuple(int(v) for v in ns),
                   dropped_saturated=dropped_sat, dropped_residual=tuple(dropped_resid),
                   usable=True, max_residual=float(np.abs(resid).max()),
                   suffix_rate=float(suffix) if suffix is not None else None)


@dataclass(frozen=True)
class RateEstimate:
    kind: str
    value: float
    uncertainty: float
    per_eps: tuple[EpsRate, ...]
    warnings: tuple[str, ...]
    grid_size: int
    diagnostics: tuple[tuple[str, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "uncertainty": self.uncertainty,
            "grid_size": self.grid_size,
            "diagnostics": {k: v for k, v in self.diagnostics},
            "per_eps": [
                {
                    "eps": r.eps, "rate": r.rate, "stderr": r.stderr,
                    "window": list(r.window),
                    "dropped_saturated": list(r.dropped_saturated),
                    "dropped_residual": list(r.dropped_residual),
                    "usable": r.usable, "max_residual": r.max_residual,
                    "suffix_rate": r.suffix_rate,
                }
                for r in self.per_eps
            ],
            "warnings": list(self.warnings),
        }


def _estimate_from_table(kind: str, rows, grid_size: int) -> RateEstimate:
    """rows: mapping eps -> list of (n, log_mean, log_var, size_mean)."""
    per_eps = []
    warnings = []
    for eps in sorted(rows, reverse=True):
        pts = rows[eps]
        ns = [p[0] for p in pts]
        fit = fit_window_rate(ns, [p[1] for p in pts], [p[2] for p in pts], [p[3] for p in pts], grid_size)
        fit = EpsRate(eps=eps, rate=fit.rate, stderr=fit.stderr, window=fit.window,
                      dropped_saturated=fit.dropped_saturated, dropped_residual=fit.dropped_residual,
                      usable=fit.usable, max_residual=fit.max_residual, suffix_rate=fit.suffix_rate)
        per_eps.append(fit)
        if not fit.usable:
            warnings.append(f"eps={eps}: window saturated below {MIN_WINDOW} points")
        elif fit.dropped_saturated:
            warnings.append(f"eps={eps}: dropped saturated n {list(fit.dropped_saturated)}")
    usable = [f for f in per_eps if f.usable]
    if not usable:
        raise SaturationError("all fit windows saturated; refine the grid or enlarge eps")
    chosen = usable[-1]  # smallest usable eps
    return RateEstimate(kind=kind, value=chosen.rate, uncertainty=chosen.stderr,
                        per_eps=tuple(per_eps), warnings=tuple(warnings), grid_size=grid_size)


def entropy_estimate(records: list[CountRecord]) -> RateEstimate:
    """Fitted growth rate of log S_n per eps; value at the smallest usable eps."""
    eps_values = {r.eps for r in records}
    n_values = {r.n for r in records}
    if len(eps_values) < 2:
        raise InputError("entropy_estimate needs at least 2 eps values")
    if len(n_values) < MIN_WINDOW:
        raise InputError(f"entropy_estimate needs at least {MIN_WINDOW} n values per eps")
    rows: dict[float, list] = {}
    warn_distortion = False
    for r in sorted(records, key=lambda r: (-r.eps, r.n)):
        var_log = (r.s_stderr / r.s_mean) ** 2 if r.s_mean > 0 else 0.0
        rows.setdefault(r.eps, []).append((r.n, math.log(r.s_mean), var_log, r.s_mean))
        warn_distortion = warn_distortion or r.distortion
    est = _estimate_from_table("entropy", rows, records[0].grid_size)
    if warn_distortion:
        est = RateEstimate(kind=est.kind, value=est.value, uncertainty=est.uncertainty,
                           per_eps=est.per_eps,
                           warnings=est.warnings + ("grid distortion: Lip^n * h > eps/10 on some records",),
                           grid_size=est.grid_size)
    return est


# ---------------------------------------------------------------------------
# asymptotic entropy, nonwandering set, entropy points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticEntropy:
    shifts: tuple[int, ...]
    estimates: tuple[RateEstimate, ...]
    value: float
    uncertainty: float
    chaotic: bool
    warnings: tuple[str, ...]


def asymptotic_entropy(schedule: NaifsSchedule, grid: Grid, eps_list, n_list, k_list,
                       budget: int, seed: int, threads: int = 1) -> AsymptoticEntropy:
    """Entropy of the shifted systems along k_list; the tail value estimates
    h*.  Shift-monotonicity (within fit slack) is checked and reported."""
    k_list = sorted(set(int(k) for k in k_list))
    if any(k < 1 for k in k_list):
        raise InputError("shifts must be >= 1")
    estimates = []
    for k in k_list:
        recs = averaged_counts(shifted(schedule, k), grid, eps_list, n_list, budget,
                               derive_seed(seed, f"shift:{k}"), threads=threads)
        estimates.append(entropy_estimate(recs))
    warnings = []
    for a, b in zip(range(len(k_list) - 1), range(1, len(k_list))):
        ea, eb = estimates[a], estimates[b]
        slack = 2.0 * (ea.uncertainty + eb.uncertainty) + 0.01
        if ea.value > eb.value + slack:
            warnings.append(
                f"shift monotonicity violated beyond slack: k={k_list[a]} rate {ea.value:.4f} "
                f"> k={k_list[b]} rate {eb.value:.4f}")
    final = estimates[-1]
    chaotic = final.value > 3.0 * max(final.uncertainty, 1e-12)
    return AsymptoticEntropy(shifts=tuple(k_list), estimates=tuple(estimates),
                             value=final.value, uncertainty=final.uncertainty,
                             chaotic=chaotic, warnings=tuple(warnings))


@dataclass(frozen=True)
class NonwanderingReport:
    marked: np.ndarray
    r: float
    n_max: int
    m_max: int

    @property
    def indices(self) -> np.ndarray:
        return np.nonzero(self.marked)[0]


def nonwandering_set(schedule: NaifsSchedule, grid: Grid, r: float, n_max: int, m_max: int,
                     budget: int, seed: int) -> NonwanderingReport:
    """Scale-stamped nonwandering scan: x is marked when some tested word maps
    a grid point of B(x, r) back into B(x, r).  Over-approximates the
    nonwandering set only in the r, h -> 0 limit."""
    if r < 2.0 * grid.spacing:
        raise InputError("nonwandering scan needs r >= 2h")
    space = schedule.space
    n_pts = grid.size
    balls = []
    for i in range(n_pts):
        balls.append(ball_indices(grid, grid.points[i], r, closed=False))
    marked = np.zeros(n_pts, dtype=bool)
    for m in range(1, m_max + 1):
        for n in range(1, n_max + 1):
            if marked.all():
                break
            ens = words(schedule, m, n, budget, derive_seed(seed, f"nonwandering:{m}:{n}"))
            for w in ens:
                final = orbit_matrix(schedule, w, n, grid.points)[n]
                for i in np.nonzero(~marked)[0]:
                    u = balls[i]
                    if u.size == 0:
                        continue
                    d = coordinate_distances(space, final[u], grid.points[i][None, :])
                    if bool((d < r).any()):
                        marked[i] = True
    return NonwanderingReport(marked=marked, r=float(r), n_max=n_max, m_max=m_max)


@dataclass(frozen=True)
class EntropyPointProbe:
    local: RateEstimate
    global_: RateEstimate
    gap: float
    y_size: int


def entropy_point_probe(schedule: NaifsSchedule, grid: Grid, x0, radius: float, eps_list, n_list,
                        budget: int, seed: int, threads: int = 1) -> EntropyPointProbe:
    """Entropy restricted to the closed ball around x0 versus the global one."""
    if radius < 4.0 * grid.spacing:
        raise InputError("entropy_point_probe needs radius >= 4h")
    y = ball_indices(grid, x0, radius, closed=True)
    if y.size < 16:
        raise UnderResolvedError(f"ball holds {y.size} grid points; need >= 16")
    local = entropy_estimate(averaged_counts(schedule, grid, eps_list, n_list, budget, seed,
                                             y_idx=y, threads=threads))
    glob = entropy_estimate(averaged_counts(schedule, grid, eps_list, n_list, budget, seed,
                                            threads=threads))
    return EntropyPointProbe(local=local, global_=glob, gap=abs(local.value - glob.value),
                             y_size=int(y.size))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

COUNTS_CSV_HEADER = "eps,n,ensemble_size,sampled,s_mean,s_stderr,r_mean,r_stderr,cover_mean"


def counts_csv(records: list[CountRecord]) -> str:
    lines = [COUNTS_CSV_HEADER]
    for r in sorted(records, key=lambda r: (-r.eps, r.n)):
        cover = repr(r.c_mean) if r.c_mean is not None else ""
        lines.append(
            f"{r.eps!r},{r.n},{r.ensemble_size},{str(r.sampled).lower()},"
            f"{r.s_mean!r},{r.s_stderr!r},{r.r_mean!r},{r.r_stderr!r},{cover}")
    return "\n".join(lines) + "\n"
