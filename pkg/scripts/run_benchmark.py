#!/usr/bin/env python3
"""Run the standard synthetic benchmark end to end through the CLI.

Generates one year of labeled hourly data, runs out-of-fold DFNN detection,
evaluates against the injection labels, and writes a DFNN-vs-KNN comparison
table.  All artifacts land in the output directory (default ./benchmark_out).
"""

import argparse
import pathlib
import sys

from enerdetect.cli import main as enerdetect


def run(argv):
    print("+ enerdetect " + " ".join(argv))
    rc = enerdetect(argv)
    if rc != 0:
        sys.exit(rc)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out-dir", default="benchmark_out")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = out / "data.csv"
    labels = out / "labels.csv"
    seed = str(args.seed)

    run(["--seed", seed, "generate",
         "--out", str(data), "--labels", str(labels),
         "--clean-out", str(out / "clean.csv")])
    run(["--seed", seed, "detect", "--data", str(data),
         "--layers", "128,128,128", "--epochs", "8", "--dropout", "0.2",
         "--out", str(out / "report.csv"), "--json-out", str(out / "report.json")])
    run(["--seed", seed, "sweep", "--data", str(data), "--model", "knn",
         "--global-scores", "--out", str(out / "threshold_curve.csv")])
    run([ "evaluate", "--report", str(out / "report.csv"),
         "--labels", str(labels), "--out", str(out / "metrics.json")])
    run(["--seed", seed, "compare", "--data", str(data), "--labels", str(labels),
         "--layers", "128,128,128", "--epochs", "8", "--dropout", "0.2",
         "--out", str(out / "comparison.csv")])
    print(f"artifacts in {out}/")


if __name__ == "__main__":
    main()
