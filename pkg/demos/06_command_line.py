"""The full command-line pipeline in a scratch directory.

Equivalent to running the ``shockpanel`` console script step by step.
"""

import sys
import tempfile
from pathlib import Path

from shockpanel.cli import run

with tempfile.TemporaryDirectory() as tmp:
    d = Path(tmp)
    p = str(d / "panel.csv")
    for argv in (
        ["simulate", "--seed", "5", "--out", p],
        ["smooth", "--in", p, "--out", str(d / "smooth.csv")],
        ["classify", "--in", p, "--smoother", str(d / "smooth.csv"), "--out", str(d / "classes.csv")],
        ["estimate", "--in", p, "--out", str(d / "est.json")],
        ["report", str(d / "est.json"), "--out-dir", str(d / "report")],
    ):
        print("shockpanel", " ".join(a.replace(tmp, ".") for a in argv))
        if run(argv) != 0:
            sys.exit(1)
    print((d / "report" / "est_pvalues.csv").read_text())
