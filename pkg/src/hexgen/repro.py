"""Long-running comparison of square and hexagonal models on full datasets.

Trains every requested (family, lattice) pair for the given number of
epochs and prints one CSV row per model with the batch PSNR.  Hours of CPU
time at the default settings; not part of the test suite.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import cli


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="repro_table3", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--datasets", nargs="+", default=["mnist"])
    p.add_argument("--families", nargs="+", default=["swwae", "acgan"])
    p.add_argument("--lattices", nargs="+", default=["square", "hex"])
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--data-root", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="repro")
    args = p.parse_args(argv)
    rows = []
    for ds in args.datasets:
        for fam in args.families:
            for lat in args.lattices:
                run = Path(args.out) / f"{ds}_{fam}_{lat}"
                argv_run = ["train", "--family", fam, "--lattice", lat, "--dataset", ds, "--epochs",
                            str(args.epochs), "--seed", str(args.seed), "--out", str(run)]
                if args.data_root:
                    argv_run += ["--data-root", args.data_root]
                code = cli.main(argv_run)
                if code:
                    return code
                header, row = (run / "report.csv").read_text().splitlines()[:2]
                rows.append(f"{ds},{row}")
    print("dataset," + header)
    print("\n".join(rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
