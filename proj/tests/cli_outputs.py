#!/usr/bin/env python3
"""Runs every subcommand on small configs and checks exit codes, CSV layout
and JSON outputs against docs/schemas."""
import csv
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

CLI = Path(sys.argv[1])
ROOT = Path(sys.argv[2])
SCHEMAS = ROOT / "docs" / "schemas"
CONFIGS = ROOT / "configs"

FAST = [
    "--set", "numerics.bins=512",
    "--set", "numerics.burn_in=60",
    "--set", "numerics.n_samples=2",
    "--set", "numerics.k_schedule=[5,20]",
    "--set", "numerics.k_max=20",
    "--set", "numerics.t_grid=[0.0,0.5,1.0]",
    "--set", "numerics.bisection_tol=0.02",
    "--set", "numerics.n_omega=2",
    "--set", "numerics.eps_schedule=[0.01]",
    "--set", "numerics.n_iter_schedule=[10]",
    "--set", "numerics.n_out=10",
]

CSV_HEADERS = {
    "cylinders.csv": ["code", "depth", "lo", "hi", "diam", "deriv_at_mid"],
    "measures.csv": ["offset", "cell_lo", "cell_hi", "mass"],
    "pressure_curve.csv": ["t", "k", "value", "stderr", "n_birkhoff", "n_samples"],
    "dim.csv": ["sample", "estimator", "depth_or_delta", "value"],
}

failures = []


def check(cond, msg):
    if not cond:
        failures.append(msg)
        print("FAIL", msg)


def run(args, out, expect=0):
    p = subprocess.run([str(CLI), *args, "--out", str(out)], capture_output=True, text=True)
    check(p.returncode == expect,
          f"{' '.join(args[:2])}: exit {p.returncode}, expected {expect}: {p.stderr.strip()}")
    return p


def schema_for(name):
    return json.loads((SCHEMAS / name.replace(".json", ".schema.json")).read_text())


def check_tree(out):
    seen = set()
    for f in sorted(out.rglob("*")):
        if f.suffix == ".json":
            doc = json.loads(f.read_text())
            try:
                jsonschema.validate(doc, schema_for(f.name))
            except jsonschema.ValidationError as e:
                check(False, f"{f.name}: {e.message} at {list(e.absolute_path)}")
            seen.add(f.name)
        elif f.suffix == ".csv":
            lines = f.read_text().splitlines()
            check(lines[0].startswith("# config_hash="), f"{f.name}: missing hash line")
            rows = list(csv.reader(lines[1:]))
            check(rows[0] == CSV_HEADERS[f.name], f"{f.name}: header {rows[0]}")
            check(len(rows) > 1, f"{f.name}: no data rows")
            check(all(len(r) == len(rows[0]) for r in rows), f"{f.name}: ragged rows")
            seen.add(f.name)
        elif f.is_file() and f.name != "report.txt":
            check(False, f"unexpected file {f}")
    return seen


with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "runs"
    cc = str(CONFIGS / "cookie_cutter.json")
    ex = str(CONFIGS / "example.json")
    fc = str(CONFIGS / "full_cover.json")
    for cfg in sorted(CONFIGS.glob("*.json")):
        run(["validate", str(cfg)], out)
    run(["cylinders", ex], out)
    run(["conformal", ex, *FAST, "--set", "numerics.dump_measures=true"], out)
    run(["pressure-curve", cc, *FAST], out)
    run(["bowen", cc, *FAST], out)
    run(["dim", cc, *FAST], out)
    run(["bowen-check", cc, *FAST], out)
    run(["report", cc, *FAST], out)
    p = run(["bowen", fc, *FAST], out)
    bowen = [json.loads(f.read_text()) for f in out.rglob("bowen.json")]
    check(any(b["full_cover"] and b["b_T"] == 1.0 for b in bowen), "full cover bowen b_T != 1")

    seen = check_tree(out)
    for name in ["validation.json", "cylinders.json", "conformal.json", "pressure_curve.json",
                 "bowen.json", "dim.json", "bowen_check.json", "report.json", "config.json",
                 *CSV_HEADERS]:
        check(name in seen, f"{name} never produced")

    bad = Path(tmp) / "bad"
    p = run(["pressure-curve", cc, "--set", "numerics.t_grid=[1.0,0.5,0.0]"], bad, expect=3)
    check("t_grid" in p.stderr, f"descending t_grid error does not name the key: {p.stderr!r}")
    p = run(["bowen", cc, "--set", "numerics.bins=-4"], bad, expect=3)
    check("numerics.bins" in p.stderr, f"bins error does not name the key: {p.stderr!r}")
    p = run(["validate", cc, "--set", "family.colour=1"], bad, expect=3)
    check("family.colour" in p.stderr, f"unknown key not named: {p.stderr!r}")
    run(["validate", str(Path(tmp) / "missing.json")], bad, expect=3)
    check(not bad.exists(), "failed runs left output behind")

    broken = Path(tmp) / "broken.json"
    broken.write_text(json.dumps({
        "family": {"kind": "cookie_cutter", "intervals": [{"lo": 0.0, "hi": 0.4}, {"lo": 0.3, "hi": 1.0}]},
        "base": {"kind": "dirac", "param": 0.0, "seed": 1}}))
    run(["validate", str(broken)], bad, expect=3)

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
