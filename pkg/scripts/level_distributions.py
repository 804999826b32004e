"""Per-level read-current histograms for single-pulse and write-verify at several cell sizes."""

import argparse
import json
from pathlib import Path

from fefetsim.config import MemConfig
from fefetsim.programming import population_stats


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--domains", default="50,150,200")
    ap.add_argument("--bpc", type=int, default=2)
    ap.add_argument("--cells", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results/level_distributions.json"))
    args = ap.parse_args()
    out = {}
    for n in map(int, args.domains.split(",")):
        for scheme in ("single", "verify"):
            stats = population_stats(MemConfig().with_(n, args.bpc, scheme), args.cells, args.seed)
            out[f"{n}d_{scheme}"] = stats.to_dict()
            print(f"{n:>4}d {scheme:<6} mean pulses {stats.mean_pulses:.2f}  "
                  f"latency {stats.mean_latency * 1e6:.3f} us")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
