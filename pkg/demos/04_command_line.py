"""
Driving the command-line tool
=============================

The same computations from model files, as a script or test harness would.
Equivalent shell commands:

    gaussflow check --input demos/models/chain3.json
    gaussflow te --input demos/models/scalar_pair.json --s 6 --t 7
    gaussflow split-w --input demos/models/chain3.json --s 3 --t 4 --format json
"""

import contextlib
import io
from pathlib import Path

from gaussflow.cli import main

models = Path(__file__).resolve().parent / "models"


def run(*argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        status = main(list(argv))
    return status, buf.getvalue()


status, out = run("check", "--input", str(models / "chain3.json"))
print("check chain3, exit", status)
print(out)

# exit status 2 and a one-line diagnostic on stderr
status, out = run("check", "--input", str(models / "h2_violation.json"))
print("check h2_violation, exit", status)
print(out)

status, out = run("di", "--input", str(models / "scalar_pair.json"), "--t", "5",
                  "--step", "0.01", "--bits")
lines = out.splitlines()
print(lines[0], "...", lines[-1], f"({len(lines) - 1} rows)")

status, out = run("oracle-compare", "--input", str(models / "scalar_pair.json"),
                  "--s", "6", "--t", "7", "--oracle-dt", "0.01")
print(out.splitlines()[0])
print(out.splitlines()[-1])
