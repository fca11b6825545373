"""
The command-line pipeline
=========================

Drives the ``fairfis`` entry point in-process: simulate data, train a tree,
score it with a bar chart, and summarise replicates. Outputs land in a
temporary directory whose path is printed.
"""

import tempfile
from pathlib import Path

from fairfis.cli import main

out = Path(tempfile.mkdtemp(prefix="fairfis-demo-"))
data = out / "sim.csv"
flags = ["--data", str(data), "--target", "y", "--protected", "z"]

main(["simulate", "--scenario", "linear", "--n", "1000", "--out", str(data)])
main(["train", *flags, "--model", "tree", "--max-depth", "5", "--out", str(out / "tree.json")])
main(["importance", "--model-file", str(out / "tree.json"), *flags, "--metric", "eqop",
      "--out", str(out / "scores.csv"), "--svg", str(out / "scores.svg")])
main(["replicate", "--model", "tree", "--reps", "10", "--out", str(out / "replicates.csv")])

print(f"\noutputs in {out}:")
for path in sorted(out.iterdir()):
    print(" ", path.name)
print((out / "scores.csv").read_text())
