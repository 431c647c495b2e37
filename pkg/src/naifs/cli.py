"""Config-driven experiment runner.

Configs are TOML; outputs are CSV tables plus JSON estimates, certificates and
a run manifest, written atomically (temp file + rename).  A config plus its
seed reproduces byte-identical CSV/JSON payloads; the worker-thread count only
changes wall time.

Exit codes: 0 success, 1 config error, 2 precondition refusal, 3 saturation or
resolution failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .core import NaifsSchedule, derive_seed
from .entropy import (
    asymptotic_entropy,
    averaged_counts,
    counts_csv,
    entropy_estimate,
    entropy_point_probe,
    nonwandering_set,
)
from .errors import InputError, NaifsError, PreconditionError, ResolutionError, SaturationError
from .maps import make_map
from .pressure import averaged_pressure, fixed_scale_pressure, make_potential, pressure_csv, pressure_estimate
from .properties import (
    ExpansivityCertificate,
    exactness_N,
    expansivity_check,
    random_instances,
    trace_specification,
    verify_trace,
)
from .spaces import Space, grid_points

KINDS = ("entropy", "asymptotic_entropy", "pressure", "fixed_scale_pressure",
         "nonwandering", "entropy_point", "specification", "expansivity")


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_config(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise InputError("config must be a table")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise InputError(f"kind must be one of {KINDS}, got {kind!r}")
    if "seed" not in cfg:
        raise InputError("seed is mandatory")
    for key in ("space", "schedule", "grid"):
        if key not in cfg:
            raise InputError(f"missing [{key}] section")
    return cfg


def build_space(cfg: dict) -> Space:
    d = cfg["space"]
    return Space(kind=d.get("kind", "circle"), dim=int(d.get("dim", 1)))


def build_schedule(space: Space, cfg: dict) -> NaifsSchedule:
    d = cfg["schedule"]
    levels = d.get("levels")
    if not levels:
        raise InputError("schedule needs at least one [[schedule.levels]] entry")
    prefix = [[make_map(m) for m in lvl.get("maps", [])] for lvl in levels]
    tail = d.get("tail", "constant")
    if isinstance(tail, dict):
        tail = ("block", int(tail["block"]))
    elif isinstance(tail, int):
        tail = ("block", tail)
    return NaifsSchedule(space, prefix, tail)


def build_grid(space: Space, cfg: dict):
    h = cfg["grid"].get("h")
    if h is None:
        raise InputError("grid.h is required")
    grid = grid_points(space, float(h))
    eps_values = cfg.get("estimate", {}).get("eps", [])
    small = [e for e in eps_values if e <= 2.0 * grid.spacing]
    warnings = []
    if small:
        warnings.append(f"eps values {small} are not > 2h={2.0 * grid.spacing}")
    return grid, warnings


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def dump_toml(cfg: dict) -> str:
    """Serialize a config back to TOML (restricted to the config schema)."""
    lines: list[str] = []

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return repr(v)
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, list):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        if isinstance(v, dict):
            return "{" + ", ".join(f"{k} = {fmt(v[k])}" for k in v) + "}"
        raise InputError(f"cannot serialize {type(v)} to TOML")

    def emit_table(name: str, table: dict):
        scalars = {k: v for k, v in table.items() if not isinstance(v, list)
                   or not (v and isinstance(v[0], dict))}
        arrays = {k: v for k, v in table.items() if k not in scalars}
        lines.append(f"[{name}]")
        for k in scalars:
            lines.append(f"{k} = {fmt(scalars[k])}")
        lines.append("")
        for k, rows in arrays.items():
            for row in rows:
                lines.append(f"[[{name}.{k}]]")
                for kk, vv in row.items():
                    lines.append(f"{kk} = {fmt(vv)}")
                lines.append("")

    top = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    for k in top:
        lines.append(f"{k} = {fmt(top[k])}")
    lines.append("")
    for k, v in cfg.items():
        if isinstance(v, dict):
            emit_table(k, v)
    return "\n".join(lines).rstrip("\n") + "\n"


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _atomic_write(path: str, data: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(data)
    os.replace(tmp, path)


class RunOutputs:
    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files: list[dict] = []
        os.makedirs(out_dir, exist_ok=True)

    def write(self, name: str, data: str):
        path = os.path.join(self.out_dir, name)
        _atomic_write(path, data)
        self.files.append({"name": name, "sha256": hashlib.sha256(data.encode()).hexdigest()})

    def write_json(self, name: str, obj):
        self.write(name, json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n")


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _estimate_json(kind: str, system_hash: str, est) -> dict:
    d = est.to_dict()
    d["system_hash"] = system_hash
    d["kind"] = kind
    return d


def run(config_path: str, out_dir: str | None = None, threads: int | None = None,
        budget: int | None = None) -> dict:
    cfg = validate_config(load_config(config_path))
    t0 = time.monotonic()
    timings: dict[str, float] = {}
    warnings: list[str] = []

    out_dir = out_dir or cfg.get("out", "runs/" + cfg["kind"])
    threads = threads or int(os.environ.get("NAIFS_THREADS", cfg.get("threads", 1)))
    budget = budget or int(cfg.get("budget", 1024))
    seed = int(cfg["seed"])

    space = build_space(cfg)
    schedule = build_schedule(space, cfg)
    grid, grid_warnings = build_grid(space, cfg)
    warnings.extend(grid_warnings)
    est_cfg = cfg.get("estimate", {})
    eps_list = [float(e) for e in est_cfg.get("eps", [])]
    n_list = list(est_cfg.get("n", []))
    if "n_range" in est_cfg:
        lo, hi = est_cfg["n_range"]
        n_list = list(range(int(lo), int(hi) + 1))
    kind = cfg["kind"]
    outputs = RunOutputs(out_dir)
    summary = ""

    t_stage = time.monotonic()
    if kind == "entropy":
        records = averaged_counts(schedule, grid, eps_list, n_list, budget, seed,
                                  with_cover=bool(est_cfg.get("with_cover", False)),
                                  threads=threads)
        timings["counts"] = time.monotonic() - t_stage
        est = entropy_estimate(records)
        warnings.extend(est.warnings)
        outputs.write("counts.csv", counts_csv(records))
        outputs.write_json("estimate.json", _estimate_json("entropy", schedule.system_hash(), est))
        summary = f"entropy = {est.value:.4f} +/- {est.uncertainty:.4f}"
    elif kind == "asymptotic_entropy":
        k_list = list(cfg.get("shifts", {}).get("k", [1, 2, 3]))
        result = asymptotic_entropy(schedule, grid, eps_list, n_list, k_list, budget, seed,
                                    threads=threads)
        timings["shifts"] = time.monotonic() - t_stage
        warnings.extend(result.warnings)
        lines = ["k,value,uncertainty"]
        for k, est in zip(result.shifts, result.estimates):
            lines.append(f"{k},{est.value!r},{est.uncertainty!r}")
        outputs.write("shifts.csv", "\n".join(lines) + "\n")
        outputs.write_json("estimate.json", {
            "kind": "asymptotic_entropy", "system_hash": schedule.system_hash(),
            "value": result.value, "uncertainty": result.uncertainty,
            "chaotic": result.chaotic,
            "per_shift": [{"k": k, "estimate": est.to_dict()}
                          for k, est in zip(result.shifts, result.estimates)],
            "warnings": list(result.warnings),
        })
        summary = (f"asymptotic entropy = {result.value:.4f} +/- {result.uncertainty:.4f}"
                   f" (chaotic: {result.chaotic})")
    elif kind == "pressure":
        psi = make_potential(space, cfg.get("potential", {"name": "zero"}))
        records = averaged_pressure(schedule, grid, eps_list, n_list, psi, budget, seed,
                                    with_cover=bool(est_cfg.get("with_cover", False)),
                                    threads=threads)
        timings["pressure"] = time.monotonic() - t_stage
        est = pressure_estimate(records)
        warnings.extend(est.warnings)
        if psi.lipschitz == 0.0 and psi.name not in ("zero", "constant"):
            warnings.append("potential without a Lipschitz bound: C_n comparison unsupported")
        outputs.write("pressure.csv", pressure_csv(records))
        outputs.write_json("estimate.json", _estimate_json("pressure", schedule.system_hash(), est))
        summary = f"pressure({psi.name}) = {est.value:.4f} +/- {est.uncertainty:.4f}"
    elif kind == "fixed_scale_pressure":
        psi = make_potential(space, cfg.get("potential", {"name": "zero"}))
        fcfg = cfg.get("fixed_scale", {})
        delta = float(fcfg.get("delta", 0.0))
        eps = float(fcfg.get("eps", 0.0))
        gammas = [float(g) for g in fcfg.get("gammas", [delta / 8 if delta else 0.01])]
        cert = expansivity_check(schedule, delta, gammas,
                                 seed=derive_seed(seed, "expansivity"))
        if not isinstance(cert, ExpansivityCertificate):
            raise PreconditionError("schedule failed the expansivity scan at this scale")
        est = fixed_scale_pressure(schedule, grid, eps, psi, n_list, budget, seed,
                                   certificate=cert, threads=threads)
        timings["fixed_scale"] = time.monotonic() - t_stage
        warnings.extend(est.warnings)
        outputs.write_json("certificate.json", cert.to_dict())
        outputs.write_json("estimate.json",
                           _estimate_json("fixed_scale_pressure", schedule.system_hash(), est))
        summary = f"fixed-scale pressure({psi.name}) = {est.value:.4f}"
    elif kind == "nonwandering":
        ncfg = cfg.get("nonwandering", {})
        report = nonwandering_set(schedule, grid, float(ncfg.get("r", 4 * grid.spacing)),
                                  int(ncfg.get("n_max", 4)), int(ncfg.get("m_max", 2)),
                                  budget, seed)
        timings["nonwandering"] = time.monotonic() - t_stage
        lines = ["index,marked"]
        for i in range(grid.size):
            lines.append(f"{i},{str(bool(report.marked[i])).lower()}")
        outputs.write("omega.csv", "\n".join(lines) + "\n")
        outputs.write_json("report.json", {
            "kind": "nonwandering", "system_hash": schedule.system_hash(),
            "r": report.r, "n_max": report.n_max, "m_max": report.m_max,
            "marked_count": int(report.marked.sum()), "grid_size": grid.size,
        })
        summary = f"nonwandering-marked {int(report.marked.sum())}/{grid.size} at r={report.r}"
    elif kind == "entropy_point":
        pcfg = cfg.get("entropy_point", {})
        probe = entropy_point_probe(schedule, grid, pcfg.get("x0", [0.0]),
                                    float(pcfg.get("radius", 0.1)), eps_list, n_list,
                                    budget, seed, threads=threads)
        timings["probe"] = time.monotonic() - t_stage
        outputs.write_json("probe.json", {
            "kind": "entropy_point", "system_hash": schedule.system_hash(),
            "local": probe.local.to_dict(), "global": probe.global_.to_dict(),
            "gap": probe.gap, "ball_points": probe.y_size,
        })
        summary = f"entropy point gap = {probe.gap:.4f}"
    elif kind == "specification":
        scfg = cfg.get("specification", {})
        delta = float(scfg.get("delta", 0.125))
        exact = exactness_N(schedule, delta, grid, seed=derive_seed(seed, "exactness"))
        instances = random_instances(schedule, int(scfg.get("count", 20)), delta,
                                     exact.n, derive_seed(seed, "instances"),
                                     s_max=int(scfg.get("s_max", 4)))
        results = []
        for inst in instances:
            x = trace_specification(schedule, inst)
            rep = verify_trace(schedule, inst, x)
            results.append({"passed": rep.passed, "errors": list(rep.errors),
                            "windows": [list(wi) for wi in inst.windows]})
        timings["tracing"] = time.monotonic() - t_stage
        passed = sum(1 for r in results if r["passed"])
        outputs.write_json("spec_report.json", {
            "kind": "specification", "system_hash": schedule.system_hash(),
            "delta": delta, "gap": exact.n, "exactness": {
                "n": exact.n, "empirical": exact.n_empirical, "analytic": exact.n_analytic},
            "instances": results, "pass_rate": passed / len(results),
        })
        summary = f"specification traces verified {passed}/{len(results)} at delta={delta}"
    elif kind == "expansivity":
        ecfg = cfg.get("expansivity", {})
        delta = float(ecfg.get("delta", 0.125))
        gammas = [float(g) for g in ecfg.get("gammas", [delta / 8])]
        result = expansivity_check(schedule, delta, gammas,
                                   seed=derive_seed(seed, "expansivity"))
        timings["expansivity"] = time.monotonic() - t_stage
        if isinstance(result, ExpansivityCertificate):
            outputs.write_json("certificate.json", result.to_dict())
            summary = f"expansive at delta={delta} ({result.method})"
        else:
            outputs.write_json("verdict.json", result.to_dict())
            summary = f"not expansive at delta={delta} within scan caps"
    else:  # pragma: no cover
        raise InputError(f"unhandled kind {kind}")

    outputs.write("config.toml", dump_toml(cfg))
    manifest = {
        "config_hash": config_hash(cfg),
        "version": __version__,
        "kind": kind,
        "system_hash": schedule.system_hash(),
        "wall_time_s": time.monotonic() - t0,
        "timings": timings,
        "warnings": warnings,
        "outputs": list(outputs.files),  # payload files only, not the manifest
        "summary": summary,
    }
    outputs.write_json("manifest.json", manifest)
    print(summary)
    return manifest


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def report(manifest_dir: str, out_dir: str | None = None) -> str:
    """Merge manifests under a directory into one summary table + plot data."""
    rows = []
    plot = []
    found = False
    for root, _dirs, files in sorted(os.walk(manifest_dir)):
        if "manifest.json" not in files:
            continue
        found = True
        try:
            with open(os.path.join(root, "manifest.json")) as fh:
                man = json.load(fh)
        except (json.JSONDecodeError, OSError) as exc:
            print(f"warning: skipping corrupt manifest in {root}: {exc}", file=sys.stderr)
            continue
        value = uncertainty = ""
        est_path = os.path.join(root, "estimate.json")
        if os.path.exists(est_path):
            with open(est_path) as fh:
                est = json.load(fh)
            value, uncertainty = est.get("value", ""), est.get("uncertainty", "")
            for per in est.get("per_eps", []):
                if per.get("usable"):
                    plot.append((os.path.relpath(root, manifest_dir), man["kind"], "eps",
                                 per["eps"], per["rate"]))
            for per in est.get("per_shift", []):
                plot.append((os.path.relpath(root, manifest_dir), man["kind"], "shift",
                             per["k"], per["estimate"]["value"]))
        rows.append((os.path.relpath(root, manifest_dir), man["kind"],
                     man.get("system_hash", ""), value, uncertainty,
                     ";".join(man.get("warnings", []))))
    if not found:
        raise InputError(f"no manifests under {manifest_dir}")
    out_dir = out_dir or manifest_dir
    lines = ["run,kind,system,value,uncertainty,warnings"]
    for r in rows:
        lines.append(",".join(json.dumps(str(c))[1:-1] if i == 5 else str(c)
                              for i, c in enumerate(r)))
    table = "\n".join(lines) + "\n"
    _atomic_write(os.path.join(out_dir, "summary.csv"), table)
    plines = ["run,kind,axis,x,rate"]
    for p in plot:
        plines.append(",".join(str(c) for c in p))
    _atomic_write(os.path.join(out_dir, "plotdata.csv"), "\n".join(plines) + "\n")
    print(f"{len(rows)} runs -> summary.csv, plotdata.csv")
    return table


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="naifs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--budget", type=int, default=None)
    p_rep = sub.add_parser("report", help="merge run manifests into a summary")
    p_rep.add_argument("dir")
    p_rep.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            run(args.config, out_dir=args.out, threads=args.threads, budget=args.budget)
        else:
            report(args.dir, out_dir=args.out)
    except (InputError, FileNotFoundError, tomllib.TOMLDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except PreconditionError as exc:
        print(f"precondition refused: {exc}", file=sys.stderr)
        return 2
    except (SaturationError, ResolutionError) as exc:
        print(f"resolution failure: {exc}", file=sys.stderr)
        return 3
    except NaifsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
