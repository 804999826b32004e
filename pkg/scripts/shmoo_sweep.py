"""Max fault rate over cell size, bits per cell and write scheme (CSV)."""

import argparse
from pathlib import Path

from fefetsim.fault import DEFAULT_DOMAIN_GRID, shmoo, shmoo_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", default=",".join(map(str, DEFAULT_DOMAIN_GRID)))
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/shmoo.csv"))
    args = ap.parse_args()
    rows = shmoo([int(x) for x in args.grid.split(",")], (1, 2, 3), ("single", "verify"),
                 args.samples, args.seed, threads=args.threads)
    text = shmoo_csv(rows)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text)
    print(text, end="")


if __name__ == "__main__":
    main()
