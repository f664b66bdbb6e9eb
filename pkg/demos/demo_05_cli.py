"""
Running experiments from the command line
=========================================

Every experiment is also available through the ``tweezergate`` command,
driven by a YAML config. This script calls the same entry point in-process
and reads back the plot-ready CSV tables.
"""

import csv
import tempfile
from pathlib import Path

from tweezergate.cli import main

out = Path(tempfile.mkdtemp()) / "gate"

# %%
# Equivalent shell command:
# ``tweezergate gate --set gate.nbar=0.2 --out <dir>``
code = main(["gate", "--set", "gate.nbar=0.2", "--out", str(out)])
print("exit code", code)

# %%
# The summary table holds one row per control state.
with open(out / "gate_summary.csv", newline="") as fh:
    for row in csv.DictReader(fh):
        print(row["case"], "phi =", row["phi_rad"], "fidelity =", row["fidelity"])
