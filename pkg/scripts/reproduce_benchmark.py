"""Run the small-set benchmark (iris, wine, cancer, blood) through the CLI.

Usage: python scripts/reproduce_benchmark.py [--out DIR] [--config FILE] [--data NAMES]

Writes per-data-set benchmark JSON, CV tables and f1_time_summary.csv. blood is
read from $HYPERNN_DATA_DIR and is reported as a failure when missing.
"""
import argparse
import sys
from pathlib import Path

from hypernn.cli import main

ROOT = Path(__file__).resolve().parents[1]


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--out", default=str(ROOT / "runs" / "benchmark_small"))
    p.add_argument("--config", default=str(ROOT / "configs" / "desk.txt"))
    p.add_argument("--data", default="iris,wine,cancer,blood")
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--threads", default="1")
    return p.parse_args()


if __name__ == "__main__":
    a = parse_args()
    sys.exit(main(["benchmark", "--data", a.data, "--config", a.config, "--seeds", a.seeds,
                   "--threads", a.threads, "--out", a.out]))
