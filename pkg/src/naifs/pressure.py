"""Topological pressure: Birkhoff sums along words, weighted spanning infima
(Q_n), weighted separated suprema (P_n), open-cover sums (C_n), rate fits, and
the fixed-scale estimate valid under an expansivity certificate.

The sup/inf in P_n and Q_n range over all subsets, which is NP-hard to realize;
grid runs pair greedy surrogates with a documented bound direction (greedy P is
a lower bound, greedy Q and C upper bounds), and exact branch-and-bound /
minimal-cover search replaces them on instances of at most 24 points.
"""

from __future__ import annotations

import math
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
)
from .core import NaifsSchedule, Word, derive_seed, orbit_matrix, words
from .entropy import (
    DISTORTION_FACTOR,
    MIN_WINDOW,
    EpsRate,
    RateEstimate,
    _chunk_jobs,
    _estimate_from_table,
    _mean_stderr,
    _resolve_y,
    fit_window_rate,
)
from .errors import InputError, PreconditionError
from .properties import ExpansivityCertificate
from .spaces import Grid, Space, coordinate_distances


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

class Potential:
    """Continuous observable on the space, from a small named catalog."""

    def __init__(self, name: str, params: dict, fn, sup_bound: float, lipschitz: float):
        self.name = name
        self.params = dict(params)
        self._fn = fn
        self.sup_bound = float(sup_bound)
        self.lipschitz = float(lipschitz)

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        return self._fn(np.asarray(pts, dtype=np.float64))

    def evaluate_point(self, x) -> float:
        return float(self.evaluate(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])

    def describe(self) -> str:
        items = ",".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        return f"{self.name}({items})"


def make_potential(space: Space, spec) -> Potential:
    """Catalog: zero, constant(c), cos2pi, hat(center, width, height)."""
    if isinstance(spec, Potential):
        return spec
    name = spec.get("name") if isinstance(spec, dict) else spec[0]
    params = {k: v for k, v in (spec.items() if isinstance(spec, dict) else spec[1].items())
              if k != "name"}
    if name == "zero":
        return Potential("zero", {}, lambda p: np.zeros(p.shape[0]), 0.0, 0.0)
    if name == "constant":
        c = float(params["c"])
        return Potential("constant", {"c": c}, lambda p: np.full(p.shape[0], c), abs(c), 0.0)
    if name == "cos2pi":
        return Potential("cos2pi", {}, lambda p: np.cos(2.0 * math.pi * p[:, 0]), 1.0, 2.0 * math.pi)
    if name == "hat":
        center = space.canonicalize(params["center"])
        width = float(params["width"])
        height = float(params["height"])
        if width <= 0.0:
            raise InputError("hat width must be positive")

        def hat(p, center=center, width=width, height=height):
            d = coordinate_distances(space, p, center[None, :])
            return height * np.maximum(0.0, 1.0 - 2.0 * d / width)

        return Potential("hat", {"center": center.tolist(), "width": width, "height": height},
                         hat, abs(height), abs(2.0 * height / width))
    raise InputError(f"unknown potential {name!r}")


# ---------------------------------------------------------------------------
# Birkhoff sums and per-word weighted quantities
# ---------------------------------------------------------------------------

def birkhoff_sums(schedule: NaifsSchedule, w: Word, n: int, psi: Potential, pts: np.ndarray) -> np.ndarray:
    """S_{w,n} psi over many points: n+1 terms, j = 0..n along the word."""
    orbits = orbit_matrix(schedule, w, n, pts)
    return _birkhoff_from_orbits(orbits, psi)


def _birkhoff_from_orbits(orbits: np.ndarray, psi: Potential) -> np.ndarray:
    total = np.zeros(orbits.shape[1])
    for j in range(orbits.shape[0]):
        total += psi.evaluate(orbits[j])
    return total


def birkhoff_sum(schedule: NaifsSchedule, w: Word, n: int, psi: Potential, x) -> float:
    if not (0 <= n <= len(w)):
        raise InputError(f"n={n} out of range for |w|={len(w)}")
    pt = schedule.space.canonicalize(x).reshape(1, -1)
    return float(birkhoff_sums(schedule, w, n, psi, pt)[0])


def _sum_exp(values: np.ndarray) -> float:
    """sum(e^v): direct when safe (exact for zero/constant potentials), else
    peak-factored to dodge overflow."""
    if values.size == 0:
        return 0.0
    peak = float(values.max())
    if peak <= 600.0:
        return float(np.exp(values).sum())
    return math.exp(peak + math.log(float(np.exp(values - peak).sum())))


def _exact_guard(y: np.ndarray):
    if y.size > EXACT_LIMIT:
        raise InputError(f"exact mode limited to {EXACT_LIMIT} points, got {y.size}")


def weighted_separated_sup(schedule: NaifsSchedule, grid: Grid, y_idx, w: Word, n: int, eps: float,
                           psi: Potential, exact: bool = False) -> float:
    """P_n per word: sup over eps-separated subsets of sum(e^{S psi}).

    Exact: branch-and-bound maximum-weight separated subset (<= 24 points).
    Heuristic: greedy in descending weight, a lower bound."""
    val, _ = _p_quantity(schedule, grid, y_idx, w, n, eps, psi, exact)
    return val


def _p_quantity(schedule: NaifsSchedule, grid: Grid, y_idx, w: Word, n: int, eps: float,
                psi: Potential, exact: bool):
    y = _resolve_y(grid, y_idx)
    orbits = orbit_matrix(schedule, w, n, grid.points[y])
    logw = _birkhoff_from_orbits(orbits, psi)
    wrap = schedule.space.wrap
    if exact:
        _exact_guard(y)
        dist = bowen_matrix(orbits, wrap)
        best, chosen = exact_max_weight_separated(dist, eps, np.exp(logw))
        return float(best), len(chosen)
    if all_pairs_separated(orbits, wrap, eps):
        return _sum_exp(logw), int(y.size)
    order = np.argsort(-logw, kind="stable")
    kept = greedy_separated(orbits, wrap, eps, order=order)
    return _sum_exp(logw[kept]), int(kept.size)


def weighted_spanning_inf(schedule: NaifsSchedule, grid: Grid, y_idx, w: Word, n: int, eps: float,
                          psi: Potential, exact: bool = False) -> float:
    """Q_n per word: inf over eps-spanning subsets of sum(e^{S psi}).

    Exact: DFS over inclusion-minimal covers (<= 24 points).  Heuristic: the
    smaller of a weighted greedy set cover and the weighted sum over the
    grid-order greedy separated set (maximal separated sets span), both upper
    bounds on the grid-restricted infimum."""
    y = _resolve_y(grid, y_idx)
    orbits = orbit_matrix(schedule, w, n, grid.points[y])
    logw = _birkhoff_from_orbits(orbits, psi)
    wrap = schedule.space.wrap
    if exact:
        _exact_guard(y)
        dist = bowen_matrix(orbits, wrap)
        masks = [int(sum(1 << j for j in np.nonzero(dist[i] <= eps)[0])) for i in range(y.size)]
        best, _ = exact_min_weight_cover(masks, np.exp(logw), y.size)
        return float(best)
    if all_pairs_separated(orbits, wrap, eps):
        return _sum_exp(logw)
    members, _ = bowen_balls(orbits, wrap, eps)
    chosen = greedy_weighted_cover(members, np.exp(logw), y.size)
    val_cover = _sum_exp(logw[np.asarray(chosen, dtype=np.int64)])
    kept = greedy_separated(orbits, wrap, eps)
    val_cert = _sum_exp(logw[kept])
    return min(val_cover, val_cert)


def cover_pressure_sum(schedule: NaifsSchedule, grid: Grid, w: Word, n: int, eps: float,
                       psi: Potential) -> float:
    """C_n per word: greedy weighted cover by dynamical eps/2-balls (each has
    Bowen diameter < eps); ball weight e^{max S psi over its grid points}.
    Upper-bound surrogate for the infimum over (w,n,eps)-covers."""
    y = grid.index_array()
    orbits = orbit_matrix(schedule, w, n, grid.points)
    logw = _birkhoff_from_orbits(orbits, psi)
    wrap = schedule.space.wrap
    radius = eps / 2.0
    if all_pairs_separated(orbits, wrap, radius):
        return _sum_exp(logw)
    members, dists = bowen_balls(orbits, wrap, radius)
    strict = [mem[d < radius] for mem, d in zip(members, dists)]
    ball_logw = np.array([logw[mem].max() if mem.size else -math.inf for mem in strict])
    chosen = greedy_weighted_cover(strict, np.exp(ball_logw), y.size)
    return _sum_exp(ball_logw[np.asarray(chosen, dtype=np.int64)])


def variation(schedule: NaifsSchedule, grid: Grid, w: Word, n: int, eps: float,
              psi: Potential) -> float:
    """Grid surrogate for Var_{w,n}(psi, eps): max |S psi(x) - S psi(y)| over
    grid pairs with Bowen distance < eps (a lower bound on the continuum sup)."""
    orbits = orbit_matrix(schedule, w, n, grid.points)
    logw = _birkhoff_from_orbits(orbits, psi)
    wrap = schedule.space.wrap
    members, dists = bowen_balls(orbits, wrap, eps)
    best = 0.0
    for i, (mem, d) in enumerate(zip(members, dists)):
        close = mem[d < eps]
        if close.size:
            best = max(best, float(np.abs(logw[close] - logw[i]).max()))
    return best


# ---------------------------------------------------------------------------
# word-averaged pressure tables and rate fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PressureRecord:
    eps: float
    n: int
    ensemble_size: int
    sampled: bool
    q_mean: float
    q_stderr: float
    p_mean: float
    p_stderr: float
    c_mean: float | None
    c_stderr: float | None
    p_size_mean: float
    grid_size: int
    distortion: bool
    per_word_p: tuple | None = field(default=None, repr=False)


def averaged_pressure(schedule: NaifsSchedule, grid: Grid, eps_list, n_list, psi: Potential,
                      budget: int, seed: int, with_cover: bool = False, threads: int = 1,
                      keep_per_word: bool = False) -> list[PressureRecord]:
    """Word-averaged Q_n, P_n (and optionally C_n) per (eps, n), heuristic mode."""
    if not eps_list or not n_list:
        raise InputError("eps_list and n_list must be non-empty")
    eps_list = sorted(set(float(e) for e in eps_list), reverse=True)
    y = grid.index_array()
    lip = schedule.max_lipschitz()
    wrap = schedule.space.wrap
    records = []
    for n in sorted(set(int(v) for v in n_list)):
        ens = words(schedule, 1, n, budget, seed)

        def eval_chunk(ws, n=n):
            out = []
            for w in ws:
                orbits = orbit_matrix(schedule, w, n, grid.points)
                logw = _birkhoff_from_orbits(orbits, psi)
                wexp = np.exp(logw)
                live = [eps for eps in eps_list if not all_pairs_separated(orbits, wrap, eps)]
                members = dists = None
                if live:
                    members, dists = bowen_balls(orbits, wrap, live[0])
                per_eps = []
                for eps in eps_list:
                    if eps not in live:
                        # every pair separated: P, Q and the eps/2 cover all
                        # collapse to the full weighted sum over singletons
                        total = _sum_exp(logw)
                        per_eps.append((total, total, total if with_cover else None, y.size))
                        continue
                    order = np.argsort(-logw, kind="stable")
                    kept_p = greedy_separated(orbits, wrap, eps, order=order)
                    p_val = _sum_exp(logw[kept_p])
                    p_size = int(kept_p.size)
                    mem_eps = [m_[d <= eps] for m_, d in zip(members, dists)]
                    chosen = greedy_weighted_cover(mem_eps, wexp, y.size)
                    val_cover = _sum_exp(logw[np.asarray(chosen, dtype=np.int64)])
                    kept_g = greedy_separated(orbits, wrap, eps)
                    q_val = min(val_cover, _sum_exp(logw[kept_g]))
                    c_val = None
                    if with_cover:
                        radius = eps / 2.0
                        strict = [m_[d < radius] for m_, d in zip(members, dists)]
                        ball_logw = np.array([logw[mem].max() if mem.size else -math.inf
                                              for mem in strict])
                        chosen_c = greedy_weighted_cover(strict, np.exp(ball_logw), y.size)
                        c_val = _sum_exp(ball_logw[np.asarray(chosen_c, dtype=np.int64)])
                    per_eps.append((q_val, p_val, c_val, p_size))
                out.append(per_eps)
            return out

        chunk_results = _chunk_jobs(ens, eval_chunk, threads)
        per_word = [row for chunk in chunk_results for row in chunk]
        for ei, eps in enumerate(eps_list):
            q_vals = np.array([row[ei][0] for row in per_word])
            p_vals = np.array([row[ei][1] for row in per_word])
            sizes = np.array([row[ei][3] for row in per_word], dtype=np.float64)
            q_mean, q_se = _mean_stderr(q_vals, ens.sampled)
            p_mean, p_se = _mean_stderr(p_vals, ens.sampled)
            c_mean = c_se = None
            if with_cover:
                c_vals = np.array([row[ei][2] for row in per_word])
                c_mean, c_se = _mean_stderr(c_vals, ens.sampled)
            records.append(PressureRecord(
                eps=eps, n=n, ensemble_size=ens.size, sampled=ens.sampled,
                q_mean=q_mean, q_stderr=q_se, p_mean=p_mean, p_stderr=p_se,
                c_mean=c_mean, c_stderr=c_se, p_size_mean=float(sizes.mean()),
                grid_size=grid.size,
                distortion=bool(lip**n * grid.spacing > eps / DISTORTION_FACTOR),
                per_word_p=tuple(float(row[ei][1]) for row in per_word) if keep_per_word else None,
            ))
    return records


def pressure_estimate(records: list[PressureRecord]) -> RateEstimate:
    """Growth-rate fit of log P_n per eps (value at the smallest usable eps);
    the Q_n fit is carried along as a cross-check diagnostic.  Saturation is
    judged on separated-set sizes, not the weighted sums, so the window is
    potential-independent."""
    if len({r.eps for r in records}) < 2:
        raise InputError("pressure_estimate needs at least 2 eps values")
    if len({r.n for r in records}) < MIN_WINDOW:
        raise InputError(f"pressure_estimate needs at least {MIN_WINDOW} n values per eps")
    rows: dict[float, list] = {}
    q_rows: dict[float, list] = {}
    warn_distortion = False
    for r in sorted(records, key=lambda r: (-r.eps, r.n)):
        var_log = (r.p_stderr / r.p_mean) ** 2 if r.p_mean > 0 else 0.0
        rows.setdefault(r.eps, []).append((r.n, math.log(r.p_mean), var_log, r.p_size_mean))
        q_var = (r.q_stderr / r.q_mean) ** 2 if r.q_mean > 0 else 0.0
        q_rows.setdefault(r.eps, []).append((r.n, math.log(r.q_mean), q_var, r.p_size_mean))
        warn_distortion = warn_distortion or r.distortion
    est = _estimate_from_table("pressure", rows, records[0].grid_size)
    diagnostics = []
    for eps in sorted(q_rows, reverse=True):
        pts = q_rows[eps]
        fit = fit_window_rate([p[0] for p in pts], [p[1] for p in pts], [p[2] for p in pts],
                              [p[3] for p in pts], records[0].grid_size)
        if fit.usable:
            diagnostics.append((f"q_rate_eps_{eps}", fit.rate))
    warnings = est.warnings
    if warn_distortion:
        warnings = warnings + ("grid distortion: Lip^n * h > eps/10 on some records",)
    return RateEstimate(kind="pressure", value=est.value, uncertainty=est.uncertainty,
                        per_eps=est.per_eps, warnings=warnings, grid_size=est.grid_size,
                        diagnostics=tuple(diagnostics))


def fixed_scale_pressure(schedule: NaifsSchedule, grid: Grid, eps: float, psi: Potential,
                         n_list, budget: int, seed: int,
                         certificate: ExpansivityCertificate | None = None,
                         threads: int = 1) -> RateEstimate:
    """Pressure read off at the single scale eps, valid when the system holds a
    delta-expansivity certificate with eps < delta; no eps -> 0 extrapolation."""
    if certificate is None:
        raise PreconditionError("fixed-scale pressure requires an expansivity certificate")
    if certificate.system_hash != schedule.system_hash():
        raise PreconditionError("certificate was issued for a different system")
    if not (0.0 < eps < certificate.delta):
        raise PreconditionError(f"need 0 < eps < delta={certificate.delta}, got eps={eps}")
    records = averaged_pressure(schedule, grid, [eps], n_list, psi, budget, seed, threads=threads)
    pts = [(r.n, math.log(r.p_mean), (r.p_stderr / r.p_mean) ** 2 if r.p_mean > 0 else 0.0,
            r.p_size_mean) for r in records]
    fit = fit_window_rate([p[0] for p in pts], [p[1] for p in pts], [p[2] for p in pts],
                          [p[3] for p in pts], grid.size)
    if not fit.usable:
        raise InputError("fixed-scale window saturated; refine grid or shrink n range")
    fit = EpsRate(eps=eps, rate=fit.rate, stderr=fit.stderr, window=fit.window,
                  dropped_saturated=fit.dropped_saturated, dropped_residual=fit.dropped_residual,
                  usable=True, max_residual=fit.max_residual, suffix_rate=fit.suffix_rate)
    return RateEstimate(kind="fixed_scale_pressure", value=fit.rate, uncertainty=fit.stderr,
                        per_eps=(fit,), grid_size=grid.size,
                        warnings=("fixed-scale (valid under delta-expansivity)",),
                        diagnostics=(("delta", certificate.delta),))


PRESSURE_CSV_HEADER = ("eps,n,ensemble_size,sampled,q_mean,q_stderr,p_mean,p_stderr,"
                       "c_mean,c_stderr,p_size_mean")


def pressure_csv(records: list[PressureRecord]) -> str:
    lines = [PRESSURE_CSV_HEADER]
    for r in sorted(records, key=lambda r: (-r.eps, r.n)):
        c_mean = repr(r.c_mean) if r.c_mean is not None else ""
        c_se = repr(r.c_stderr) if r.c_stderr is not None else ""
        lines.append(
            f"{r.eps!r},{r.n},{r.ensemble_size},{str(r.sampled).lower()},"
            f"{r.q_mean!r},{r.q_stderr!r},{r.p_mean!r},{r.p_stderr!r},"
            f"{c_mean},{c_se},{r.p_size_mean!r}")
    return "\n".join(lines) + "\n"
