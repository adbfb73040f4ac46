"""Runs the CLI on the shipped samples and validates every JSON document against its schema."""

import json
import pathlib
import subprocess
import sys

import jsonschema

cli = sys.argv[1]
root = pathlib.Path(sys.argv[2])
schemas = root / "schemas"
samples = root / "samples"
failures = []


def schema(name):
    return json.loads((schemas / name).read_text())


def validate(doc, name, label):
    try:
        jsonschema.validate(doc, schema(name))
    except jsonschema.ValidationError as e:
        failures.append(f"{label}: {e.message}")


def run(args, expect):
    p = subprocess.run([cli, *args], capture_output=True, text=True)
    if p.returncode != expect:
        failures.append(f"{' '.join(args)}: exit {p.returncode}, expected {expect}\n{p.stderr}")
    return p.stdout


for path in sorted(schemas.glob("*.json")):
    jsonschema.Draft202012Validator.check_schema(json.loads(path.read_text()))

inputs = {
    "oscillator_candidate.json": "candidate.json",
    "zero_candidate.json": "candidate.json",
    "corrupted_candidate.json": "candidate.json",
    "oscillator_simulate.json": "simulate_job.json",
    "oscillator_solveg.json": "solveg_job.json",
    "painleve_solveg.json": "solveg_job.json",
    "painleve1.json": "specfun_job.json",
}
for sample, name in inputs.items():
    validate(json.loads((samples / sample).read_text()), name, sample)

jobs = [
    (["kernel", "--chart", "elliptic", "--select", "F2"], 0, "kernel_report.json"),
    (["kernel", "--chart", "polar", "--select", "F1,F3", "--method", "sampled", "--seed", "3"], 0, "kernel_report.json"),
    (["reduce", "--chart", "cartesian", "--A", "A120=1", "--target", "V2", "--fix", "x=1"], 0, "ode_spec.json"),
    (["reduce", "--chart", "polar", "--A", "A300=1,A120=1", "--target", "R", "--fix", "th=1/2"], 0, "ode_spec.json"),
    (["check", "--candidate", str(samples / "oscillator_candidate.json")], 0, "check_report.json"),
    (["check", "--candidate", str(samples / "corrupted_candidate.json")], 1, "check_report.json"),
    (["compat", "--chart", "parabolic", "--random", "2", "--seed", "11"], 0, "compat_report.json"),
    (["solveg", "--job", str(samples / "oscillator_solveg.json")], 0, "solveg_report.json"),
]
for args, code, name in jobs:
    first = run(args, code)
    try:
        doc = json.loads(first)
    except json.JSONDecodeError as e:
        failures.append(f"{' '.join(args)}: not JSON ({e})")
        continue
    validate(doc, name, " ".join(args))
    if run(args, code) != first:
        failures.append(f"{' '.join(args)}: output differs between identical runs")

run(["kernel", "--chart", "nowhere", "--select", "F2"], 2)
run(["kernel", "--chart", "polar", "--select", "F7"], 2)
run(["reduce", "--chart", "cartesian", "--A", "A999=1", "--target", "V2", "--fix", "x=1"], 2)
run(["check", "--candidate", str(samples / "missing.json")], 2)
run(["specfun", "--kind", "P9"], 2)

for f in failures:
    print("FAIL", f)
print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
