import json
import math
import os

import pytest

from naifs.cli import config_hash, dump_toml, load_config, main, report, run

ENTROPY_CONFIG = """\
kind = "entropy"
seed = 7
budget = 8

[space]
kind = "circle"

[grid]
h = 0.00048828125

[estimate]
eps = [0.0625, 0.03125]
n = [2, 3, 4, 5, 6, 7]

[schedule]
tail = "constant"

[[schedule.levels]]
maps = [{family = "circle_affine", params = {k = 2, b = 0.0}}]
"""


def write_config(tmp_path, text, name="config.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_run_entropy_and_rerun_identical(tmp_path):
    cfg = write_config(tmp_path, ENTROPY_CONFIG)
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    man1 = run(cfg, out_dir=str(out1))
    man2 = run(cfg, out_dir=str(out2))
    for name in ("counts.csv", "estimate.json", "config.toml"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    h1 = {f["name"]: f["sha256"] for f in man1["outputs"]}
    h2 = {f["name"]: f["sha256"] for f in man2["outputs"]}
    assert h1 == h2
    with open(out1 / "estimate.json") as fh:
        est = json.load(fh)
    assert est["value"] == pytest.approx(math.log(2), abs=0.07)
    assert (out1 / "manifest.json").exists()


def test_threads_do_not_change_payloads(tmp_path):
    cfg = write_config(tmp_path, ENTROPY_CONFIG)
    outs = []
    for t in (1, 4):
        out = tmp_path / f"t{t}"
        run(cfg, out_dir=str(out), threads=t)
        outs.append((out / "counts.csv").read_bytes())
    assert outs[0] == outs[1]


def test_cli_exit_codes(tmp_path, capsys):
    bad = write_config(tmp_path, "kind = \"nope\"\nseed = 1\n", "bad.toml")
    assert main(["run", bad]) == 1
    missing = str(tmp_path / "missing.toml")
    assert main(["run", missing]) == 1

    rotation_spec = """\
kind = "specification"
seed = 3
budget = 8

[space]
kind = "circle"

[grid]
h = 0.00390625

[specification]
delta = 0.125
count = 3

[schedule]
tail = "constant"

[[schedule.levels]]
maps = [{family = "circle_affine", params = {k = 2, b = 0.0}}, {family = "rotation", params = {alpha = 0.3}}]
"""
    rot = write_config(tmp_path, rotation_spec, "rot.toml")
    assert main(["run", rot, "--out", str(tmp_path / "rot")]) == 2

    saturated = ENTROPY_CONFIG.replace("h = 0.00048828125", "h = 0.0625")
    sat = write_config(tmp_path, saturated, "sat.toml")
    assert main(["run", sat, "--out", str(tmp_path / "sat")]) == 3


def test_config_roundtrip(tmp_path):
    cfg = load_config(write_config(tmp_path, ENTROPY_CONFIG))
    text = dump_toml(cfg)
    path2 = tmp_path / "rt.toml"
    path2.write_text(text)
    cfg2 = load_config(str(path2))
    assert cfg2 == cfg
    assert config_hash(cfg2) == config_hash(cfg)
    # serialization is itself a fixed point
    assert dump_toml(cfg2) == text


def test_specification_run(tmp_path):
    spec_cfg = """\
kind = "specification"
seed = 3
budget = 8

[space]
kind = "circle"

[grid]
h = 0.00390625

[specification]
delta = 0.125
count = 5

[schedule]
tail = "constant"

[[schedule.levels]]
maps = [{family = "circle_affine", params = {k = 2, b = 0.0}}, {family = "circle_affine", params = {k = 3, b = 0.0}}]
"""
    cfg = write_config(tmp_path, spec_cfg, "spec.toml")
    out = tmp_path / "spec"
    run(cfg, out_dir=str(out))
    with open(out / "spec_report.json") as fh:
        rep = json.load(fh)
    assert rep["pass_rate"] == 1.0
    assert rep["exactness"]["n"] == 3


def test_expansivity_and_fixed_scale_runs(tmp_path):
    exp_cfg = """\
kind = "expansivity"
seed = 5
budget = 8

[space]
kind = "circle"

[grid]
h = 0.00390625

[expansivity]
delta = 0.125
gammas = [0.015625]

[schedule]
tail = "constant"

[[schedule.levels]]
maps = [{family = "circle_affine", params = {k = 2, b = 0.0}}]
"""
    cfg = write_config(tmp_path, exp_cfg, "exp.toml")
    out = tmp_path / "exp"
    run(cfg, out_dir=str(out))
    with open(out / "certificate.json") as fh:
        cert = json.load(fh)
    assert cert["method"] == "analytic"
    assert cert["gamma_table"] == [[0.015625, 4]]

    fs_cfg = exp_cfg.replace('kind = "expansivity"', 'kind = "fixed_scale_pressure"')
    fs_cfg = fs_cfg.replace("[expansivity]", "[fixed_scale]")
    fs_cfg = fs_cfg.replace("gammas = [0.015625]", "gammas = [0.015625]\neps = 0.0625")
    fs_cfg = fs_cfg.replace("h = 0.00390625", "h = 0.00048828125")
    fs_cfg += "\n[estimate]\nn = [2, 3, 4, 5, 6, 7]\n"
    cfg2 = write_config(tmp_path, fs_cfg, "fs.toml")
    out2 = tmp_path / "fs"
    run(cfg2, out_dir=str(out2))
    with open(out2 / "estimate.json") as fh:
        est = json.load(fh)
    assert est["kind"] == "fixed_scale_pressure"
    assert est["value"] == pytest.approx(math.log(2), abs=0.07)


def test_report_merges_runs(tmp_path, capsys):
    cfg = write_config(tmp_path, ENTROPY_CONFIG)
    run(cfg, out_dir=str(tmp_path / "runs" / "a"))
    pressure_cfg = ENTROPY_CONFIG.replace('kind = "entropy"', 'kind = "pressure"')
    pressure_cfg += "\n[potential]\nname = \"zero\"\n"
    cfg2 = write_config(tmp_path, pressure_cfg, "p.toml")
    run(cfg2, out_dir=str(tmp_path / "runs" / "b"))
    table = report(str(tmp_path / "runs"))
    lines = table.strip().split("\n")
    assert lines[0].startswith("run,kind,system,value")
    assert len(lines) == 3
    vals = [float(line.split(",")[3]) for line in lines[1:]]
    assert vals[0] == pytest.approx(vals[1], abs=1e-12)  # P_top(0) = h_top
    assert (tmp_path / "runs" / "summary.csv").exists()
    assert (tmp_path / "runs" / "plotdata.csv").exists()


def test_report_empty_dir_errors(tmp_path):
    os.makedirs(tmp_path / "empty", exist_ok=True)
    assert main(["report", str(tmp_path / "empty")]) == 1


def test_nonwandering_run(tmp_path):
    nw_cfg = """\
kind = "nonwandering"
seed = 2
budget = 8

[space]
kind = "interval"

[grid]
h = 0.00390625

[nonwandering]
r = 0.0078125
n_max = 4
m_max = 2

[schedule]
tail = "constant"

[[schedule.levels]]
maps = [{family = "interval_affine", params = {a = 0.5, b = 0.0}}]
"""
    cfg = write_config(tmp_path, nw_cfg, "nw.toml")
    out = tmp_path / "nw"
    run(cfg, out_dir=str(out))
    with open(out / "report.json") as fh:
        rep = json.load(fh)
    assert 1 <= rep["marked_count"] <= 5
