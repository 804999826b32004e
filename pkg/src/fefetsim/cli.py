"""Command-line front end.

Commands: program-stats, shmoo, array, inject, minsize.  Each command is a
pure function of (config, flags, input files, seed) to output bytes.
Exit codes: 0 ok, 1 usage/config error, 2 input-data error, 3 infeasible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .array import (
    OPT_TARGETS,
    InfeasibleError,
    Organization,
    array_config_for,
    evaluate_array,
    optimize_array,
)
from .config import SCHEMES, ConfigError, ExperimentConfig
from .fault import DEFAULT_DOMAIN_GRID, shmoo, shmoo_csv
from .programming import CalibrationError, population_stats
from .workloads import (
    WORKLOADS,
    ClassifierTask,
    InputError,
    erdos_renyi,
    inject_classifier,
    inject_graph,
    load_edge_list,
    load_tensor,
    min_cell_size_sweep,
    minsize_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _str_list(text: str) -> list:
    vals = [v.strip() for v in text.split(",") if v.strip()]
    bad = [v for v in vals if v not in SCHEMES]
    if bad or not vals:
        raise argparse.ArgumentTypeError(f"schemes must be from {SCHEMES}")
    return vals


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment file")
    common.add_argument("--seed", type=_u64, help="master seed (overrides config)")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--threads", type=int, help="worker threads (env FEFETSIM_THREADS)")
    common.add_argument("--domains", type=int, help="cell size override")
    common.add_argument("--bpc", type=int, choices=(1, 2, 3), help="bits per cell override")
    common.add_argument("--scheme", choices=SCHEMES, help="programming scheme override")

    p = _Parser(prog="fefetsim", description="Multi-level FeFET memory simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("program-stats", parents=[common], help="level distributions (JSON)")
    s.add_argument("--cells", type=int, default=1500, help="cells per level")

    s = sub.add_parser("shmoo", parents=[common], help="fault-rate sweep (CSV)")
    s.add_argument("--grid", type=_int_list, help="domain grid, e.g. 50,100,200")
    s.add_argument("--bpc-set", type=_int_list, help="bits-per-cell set, e.g. 1,2,3")
    s.add_argument("--schemes", type=_str_list, help="e.g. single,verify")
    s.add_argument("--samples", type=int, help="samples per level")

    s = sub.add_parser("array", parents=[common], help="array characteristics (JSON)")
    s.add_argument("--opt", choices=OPT_TARGETS, help="optimization target")
    s.add_argument("--capacity-mb", type=float, help="array capacity in MB")
    s.add_argument("--cells", type=int, default=1500, help="cells per level for write stats")

    s = sub.add_parser("inject", parents=[common], help="workload fault injection (JSON)")
    s.add_argument("--workload", choices=WORKLOADS, help="graph or classifier")
    s.add_argument("--graph", type=Path, help="SNAP edge-list file")
    s.add_argument("--directed", action="store_true", default=None)
    s.add_argument("--tensor", type=Path, help="f32 weight tensor manifest (classifier)")
    s.add_argument("--queries", type=int, help="BFS queries")

    s = sub.add_parser("minsize", parents=[common], help="minimum cell size table (CSV)")
    s.add_argument("--workload", choices=WORKLOADS, help="graph or classifier")
    s.add_argument("--graph", type=Path, help="SNAP edge-list file")
    s.add_argument("--directed", action="store_true", default=None)
    s.add_argument("--grid", type=_int_list, help="domain grid")
    s.add_argument("--epsilon", type=float, help="relative error threshold")
    s.add_argument("--replicates", type=int, help="replicates per grid point")
    s.add_argument("--queries", type=int, help="BFS queries")
    return p


# --- helpers -------------------------------------------------------------------


def _resolve_threads(args, exp: ExperimentConfig) -> int:
    if args.threads is not None:
        n = args.threads
    elif os.environ.get("FEFETSIM_THREADS"):
        try:
            n = int(os.environ["FEFETSIM_THREADS"])
        except ValueError:
            raise ConfigError("FEFETSIM_THREADS must be an integer") from None
    else:
        n = exp.threads or 1
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def _load(args):
    exp = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    mem = exp.mem.with_(args.domains, args.bpc, args.scheme)
    seed = exp.master_seed if args.seed is None else args.seed
    return exp, mem, seed, _resolve_threads(args, exp)


def _base_dir(args) -> Path:
    return args.config.parent if args.config else Path(".")


def _input_path(args, flag_value, key: str, exp) -> Path | None:
    if flag_value is not None:
        return flag_value
    if key in exp.workload:
        return _base_dir(args) / exp.workload[key]
    return None


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        out.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from exc


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _wl(exp, key, default):
    return exp.workload.get(key, default)


def _load_graph(args, exp, seed):
    path = _input_path(args, args.graph, "graph", exp)
    directed = args.directed if args.directed is not None else bool(_wl(exp, "directed", False))
    if path is None:
        return erdos_renyi(int(_wl(exp, "n_nodes", 128)), float(_wl(exp, "edge_prob", 0.05)),
                           seed, directed)
    try:
        with open(path, encoding="utf-8") as fh:
            return load_edge_list(fh, directed)
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read graph {path}: {exc}") from exc
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _classifier_task(args, exp, seed):
    task = ClassifierTask.synthetic(
        seed,
        n_classes=int(_wl(exp, "n_classes", 10)),
        dim=int(_wl(exp, "dim", 64)),
        n_train=int(_wl(exp, "n_train", 2000)),
        n_test=int(_wl(exp, "n_test", 2000)),
        ridge_lambda=float(_wl(exp, "ridge_lambda", 1.0)),
    )
    path = _input_path(args, getattr(args, "tensor", None), "tensor", exp)
    if path is not None:
        w = load_tensor(path)
        if w.shape != task.weights.shape:
            raise InputError(f"{path}: weight shape {list(w.shape)} does not match "
                             f"expected {list(task.weights.shape)}")
        task = replace(task, weights=w)
    return task


def _workload_kind(args, exp) -> str:
    kind = args.workload or _wl(exp, "kind", None)
    if kind not in WORKLOADS:
        raise UsageError(f"--workload must be one of {WORKLOADS}")
    return kind


# --- commands --------------------------------------------------------------------


def cmd_program_stats(args) -> str:
    exp, mem, seed, threads = _load(args)
    if args.cells < 1:
        raise UsageError("--cells must be >= 1")
    stats = population_stats(mem, args.cells, seed, threads)
    return _json({"master_seed": seed, **stats.to_dict()})


def cmd_shmoo(args) -> str:
    exp, mem, seed, threads = _load(args)
    grid = args.grid or ([args.domains] if args.domains else list(DEFAULT_DOMAIN_GRID))
    bpcs = args.bpc_set or ([args.bpc] if args.bpc else [1, 2, 3])
    schemes = args.schemes or ([args.scheme] if args.scheme else ["single", "verify"])
    samples = args.samples or exp.samples
    if samples < 1:
        raise UsageError("--samples must be >= 1")
    rows = shmoo(grid, bpcs, schemes, samples, seed, base=mem, threads=threads)
    return shmoo_csv(rows)


def cmd_array(args) -> str:
    exp, mem, seed, threads = _load(args)
    a = exp.array
    target = args.opt or a.get("opt", "read_edp")
    if target not in OPT_TARGETS:
        raise ConfigError(f"[array].opt must be one of {OPT_TARGETS}")
    capacity = args.capacity_mb or float(a.get("capacity_mb", 4.0))
    org = None
    fixed = [k for k in ("subarray_rows", "subarray_cols", "n_banks") if k in a]
    if fixed:
        if len(fixed) != 3:
            raise ConfigError("[array] organization needs subarray_rows, subarray_cols, n_banks")
        org = Organization(int(a["subarray_rows"]), int(a["subarray_cols"]), int(a["n_banks"]))
    cfg = array_config_for(mem, capacity, args.cells, seed, int(a.get("word_width", 64)),
                           organization=org, threads=threads)
    if "layout_factor" in a:
        cfg = replace(cfg, periphery=replace(cfg.periphery,
                                             layout_factor=float(a["layout_factor"])))
    if org is None:
        org, metrics = optimize_array(cfg, target)
    else:
        metrics = evaluate_array(cfg)
    return _json({
        "master_seed": seed,
        "capacity_mb": capacity,
        "word_width": cfg.word_width,
        "bits_per_cell": cfg.bits_per_cell,
        "n_domains": cfg.n_domains,
        "scheme": mem.scheme_name,
        "opt": "fixed" if fixed else target,
        "mean_pulses": cfg.write.mean_pulses,
        "organization": org.to_dict(),
        "metrics": metrics.to_dict(),
    })


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"{args.command} requires --seed")


def cmd_inject(args) -> str:
    _require_seed(args)
    exp, mem, seed, threads = _load(args)
    kind = _workload_kind(args, exp)
    if kind == "graph":
        graph = _load_graph(args, exp, seed)
        n_queries = args.queries or int(_wl(exp, "n_queries", 32))
        rep = inject_graph(graph, mem, seed, n_queries, threads=threads)
    else:
        rep = inject_classifier(_classifier_task(args, exp, seed), mem, seed, threads)
    return _json({"master_seed": seed, "n_domains": mem.device.n_domains,
                  "bits_per_cell": mem.adc.bits_per_cell, "scheme": mem.scheme_name,
                  **rep.to_dict()})


def cmd_minsize(args) -> str:
    _require_seed(args)
    exp, mem, seed, threads = _load(args)
    kind = _workload_kind(args, exp)
    grid = args.grid or list(_wl(exp, "domain_grid", DEFAULT_DOMAIN_GRID))
    eps = args.epsilon if args.epsilon is not None else float(_wl(exp, "epsilon", 0.01))
    reps = args.replicates or int(_wl(exp, "replicates", exp.replicates))
    graph = _load_graph(args, exp, seed) if kind == "graph" else None
    task = _classifier_task(args, exp, seed) if kind == "classifier" else None
    schemes = [args.scheme] if args.scheme else ["single", "verify"]
    bpcs = [args.bpc] if args.bpc else [1, 2, 3]
    try:
        rows = min_cell_size_sweep(kind, mem, grid, eps, reps, seed, graph=graph, task=task,
                                   schemes=schemes, bpc_set=bpcs,
                                   n_queries=args.queries or int(_wl(exp, "n_queries", 32)),
                                   threads=threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return minsize_csv(rows)


COMMANDS = {
    "program-stats": cmd_program_stats,
    "shmoo": cmd_shmoo,
    "array": cmd_array,
    "inject": cmd_inject,
    "minsize": cmd_minsize,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = COMMANDS[args.command](args)
        _emit(text, args.out)
    except (UsageError, ConfigError) as exc:
        print(f"fefetsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"fefetsim: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleError, CalibrationError) as exc:
        print(f"fefetsim: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"fefetsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
