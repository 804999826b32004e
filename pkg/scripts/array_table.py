"""Array-level metrics for 1/2/3-bit cells at each optimization target."""

import argparse
import json
from pathlib import Path

from fefetsim.array import OPT_TARGETS, array_config_for, optimize_array
from fefetsim.config import MemConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--capacity-mb", type=float, default=4.0)
    ap.add_argument("--domains", type=int, default=150)
    ap.add_argument("--cells", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results/array_table.json"))
    args = ap.parse_args()
    table = {}
    for bpc in (1, 2, 3):
        cfg = array_config_for(MemConfig().with_(args.domains, bpc, "verify"),
                               args.capacity_mb, args.cells, args.seed)
        for target in OPT_TARGETS:
            org, m = optimize_array(cfg, target)
            table[f"{bpc}b_{target}"] = {**org.to_dict(), **m.to_dict()}
            print(f"{bpc}b {target:<12} area {m.area_mm2:.3f} mm2  read {m.read_latency_ns:.3f} ns"
                  f"  {m.read_energy_pj_per_bit:.3f} pJ/b  density {m.density_mb_per_mm2:.2f}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(table, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
