"""Runs the CLI on small configs: exit codes, schema validity, determinism."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

cli, schema_path, here = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
schema = json.loads(schema_path.read_text())
failures = []


def run(*args):
    return subprocess.run([cli, *args], capture_output=True, text=True)


def expect(cond, what):
    if not cond:
        failures.append(what)
        print("FAIL", what)


def report(cfg, out, *extra):
    r = run("report", "--config", str(here / cfg), "--out", str(out), "-q", *extra)
    doc = json.loads((out / "report.json").read_text())
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as e:
        expect(False, f"{cfg}: schema: {e.message}")
    return r, doc


def body(doc):
    return {k: v for k, v in doc.items() if k not in ("runtime_ms", "metadata")}


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    r, a = report("small.cfg", tmp / "a")
    expect(r.returncode == 0, f"passing suite exit code {r.returncode}")
    expect(a["verdict"] == "pass", "passing suite verdict")
    header = (tmp / "a" / "region.csv").read_text().splitlines()[0]
    expect(header == "a,b,p,admissible", f"region csv header {header}")

    _, b = report("small.cfg", tmp / "b")
    expect(json.dumps(body(a), sort_keys=True) == json.dumps(body(b), sort_keys=True), "rerun differs")

    r, f = report("failing.cfg", tmp / "f")
    expect(r.returncode == 1, f"failing suite exit code {r.returncode}")
    expect(f["verdict"] == "fail", "failing suite verdict")
    expect("error" in f["runs"][0], "error recorded for the broken run")
    expect(f["checks"][0]["max_residual"] == "inf", "error residual encoded as inf")

    r, o = report("small.cfg", tmp / "o", "--tol", "1e-30")
    expect(r.returncode == 1 and o["verdict"] == "fail", "--tol override reaches every run")

    r = run("report", "--config", str(here / "bad.cfg"))
    expect(r.returncode == 2, f"bad config exit code {r.returncode}")
    expect("config:4:1" in r.stderr, f"bad config position: {r.stderr.strip()}")

    r = run("report", "--grid", "1")
    expect(r.returncode == 2, "--grid 1 rejected")
    r = run("nonsense")
    expect(r.returncode == 2, "unknown subcommand exit code")

    r = run("check-pde", "--general-rank", "--config", str(here / "small.cfg"), "--out", str(tmp / "g"), "-q")
    g = json.loads((tmp / "g" / "report.json").read_text())
    expect(r.returncode == 0 and g["runs"] == [], "general-rank filter on a config without block runs")

    r = run("region", "--config", str(here / "small.cfg"), "--out", str(tmp / "r"), "--format", "csv", "-q")
    expect(r.returncode == 0 and not (tmp / "r" / "report.json").exists(), "csv-only output")
    expect((tmp / "r" / "region.csv").exists(), "region csv written")

print("cli checks:", "ok" if not failures else f"{len(failures)} failed")
sys.exit(1 if failures else 0)
