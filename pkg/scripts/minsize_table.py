"""Minimum cell size meeting the accuracy budget, per workload, scheme and bits per cell."""

import argparse
from pathlib import Path

from fefetsim.config import MemConfig
from fefetsim.fault import DEFAULT_DOMAIN_GRID
from fefetsim.workloads import (
    ClassifierTask,
    erdos_renyi,
    load_edge_list,
    min_cell_size_sweep,
    minsize_csv,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--graph", type=Path, help="edge list; default is a random graph")
    ap.add_argument("--directed", action="store_true")
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--replicates", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results/minsize.csv"))
    args = ap.parse_args()
    if args.graph:
        with args.graph.open(encoding="utf-8") as fh:
            graph = load_edge_list(fh, args.directed)
    else:
        graph = erdos_renyi(96, 0.04, 1)
    rows = (min_cell_size_sweep("classifier", MemConfig(), DEFAULT_DOMAIN_GRID, args.epsilon,
                                args.replicates, args.seed, task=ClassifierTask.synthetic(42))
            + min_cell_size_sweep("graph", MemConfig(), DEFAULT_DOMAIN_GRID, args.epsilon,
                                  args.replicates, args.seed, graph=graph))
    text = minsize_csv(rows)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text)
    print(text, end="")


if __name__ == "__main__":
    main()
