"""
Files and the command line
==========================

The ``mctf`` command wraps the library. This script drives it in-process
through :func:`mctf.cli.main` and writes everything to a temporary folder.
The same calls work from a shell, e.g.
``mctf synth --shape 20,20,20 --ranks 2,2,2 --seed 7 --out truth.tns``.
"""

import csv
import json
import tempfile
from pathlib import Path

from mctf.cli import main

work = Path(tempfile.mkdtemp())
truth = work / "truth.tns"

main(["synth", "--shape", "20,20,20", "--ranks", "2,2,2", "--seed", "7",
      "--noise", "0.01", "--out", str(truth)])
main(["mask", "--input", str(truth), "--sr", "0.3", "--seed", "1", "--out", str(work / "m.msk")])
main(["complete", "--input", str(truth), "--mask", str(work / "m.msk"), "--variant", "ncmctf",
      "--ranks", "2,2,2", "--ref", str(truth), "--out", str(work / "est.tns"),
      "--trace-out", str(work / "trace.csv")])

record = json.loads((work / "est.tns.json").read_text())
print("iterations", record["iterations"], "converged", record["converged"])
# ERGAS divides by band means, which are near zero for this synthetic data
print("quality", {k: round(v, 4) for k, v in record["quality"].items() if isinstance(v, float)})

# a small grid: every (input, sr, variant, seed) cell becomes one row
(work / "spec.json").write_text(json.dumps({
    "inputs": ["truth.tns"], "sr": [0.1, 0.3], "variants": ["mctf", "ncmctf"],
    "seeds": [0], "ranks": [2, 2, 2], "config": {"lam": 10.0, "rho": 1e-6},
    "out": "table.csv", "curves_dir": "curves",
}))
main(["experiment", "--spec", str(work / "spec.json")])
for row in csv.DictReader((work / "table.csv").open()):
    print(row["sr"], row["variant"], row["psnr"], row["ssim"])
print("outputs in", work)
