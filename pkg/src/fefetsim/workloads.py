"""Fault injection into application data stored as MLC levels.

Two workloads share one pipeline (bits -> levels -> program -> sense -> bits):
graph BFS queries over a dense adjacency bit matrix, and a ridge-regression
linear classifier whose 8-bit quantized weights are stored.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import rng
from .config import MemConfig
from .fault import read_back

UNREACHABLE = np.iinfo(np.int64).max
WORKLOADS = ("graph", "classifier")
MINSIZE_HEADER = ["bpc", "scheme", "workload", "min_domains"]


class InputError(ValueError):
    """Malformed workload input (edge list, tensor manifest, ...)."""


# --- graphs --------------------------------------------------------------------


@dataclass
class Graph:
    n_nodes: int
    directed: bool
    adjacency: np.ndarray  # bool (n, n); [u, v] is edge u -> v
    ids: np.ndarray = None  # original id of each compact node

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=bool)
        if self.adjacency.shape != (self.n_nodes, self.n_nodes):
            raise ValueError("adjacency must be n_nodes x n_nodes")
        if self.ids is None:
            self.ids = np.arange(self.n_nodes)

    @property
    def n_bits(self) -> int:
        return self.n_nodes * self.n_nodes

    def to_bits(self) -> np.ndarray:
        return self.adjacency.reshape(-1).astype(np.uint8)

    def with_bits(self, bits) -> "Graph":
        """Same nodes, adjacency replaced by row-major ``bits`` (as read back, unsymmetrized)."""
        adj = np.asarray(bits[: self.n_bits], dtype=bool).reshape(self.n_nodes, self.n_nodes)
        return Graph(self.n_nodes, self.directed, adj, self.ids)


def load_edge_list(stream, directed: bool = False) -> Graph:
    """Parse a SNAP-style edge list; ids are compacted in ascending order."""
    src, dst = [], []
    for lineno, line in enumerate(stream, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 2:
            raise InputError(f"line {lineno}: expected two node ids, got {s!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise InputError(f"line {lineno}: node ids must be integers, got {s!r}") from None
        if u < 0 or v < 0:
            raise InputError(f"line {lineno}: node ids must be non-negative")
        src.append(u)
        dst.append(v)
    if not src:
        raise InputError("edge list contains no edges")
    ids, inv = np.unique(np.array(src + dst, dtype=np.int64), return_inverse=True)
    u, v = inv[: len(src)], inv[len(src):]
    adj = np.zeros((len(ids), len(ids)), dtype=bool)
    adj[u, v] = True
    if not directed:
        adj[v, u] = True
    return Graph(len(ids), directed, adj, ids)


def erdos_renyi(n_nodes: int, edge_prob: float, master_seed: int, directed: bool = False) -> Graph:
    g = rng.generator(master_seed, rng.DATA, n_nodes)
    adj = g.random((n_nodes, n_nodes)) < edge_prob
    np.fill_diagonal(adj, False)
    if not directed:
        adj = np.triu(adj, 1)
        adj = adj | adj.T
    return Graph(n_nodes, directed, adj)


def clustered_graph(n_nodes: int, n_clusters: int, p_in: float, p_out: float,
                    master_seed: int) -> Graph:
    """Undirected planted-partition graph: dense clusters, sparse bridges."""
    g = rng.generator(master_seed, rng.DATA, n_nodes, n_clusters)
    label = np.arange(n_nodes) % n_clusters
    p = np.where(label[:, None] == label[None, :], p_in, p_out)
    adj = np.triu(g.random((n_nodes, n_nodes)) < p, 1)
    return Graph(n_nodes, False, adj | adj.T)


def bfs_distances(graph: Graph, source: int) -> np.ndarray:
    """Hop counts from ``source`` along directed edges; ``UNREACHABLE`` if none."""
    if not 0 <= source < graph.n_nodes:
        raise ValueError("source out of range")
    adj = graph.adjacency
    dist = np.full(graph.n_nodes, UNREACHABLE, dtype=np.int64)
    dist[source] = 0
    frontier = np.zeros(graph.n_nodes, dtype=bool)
    frontier[source] = True
    visited = frontier.copy()
    d = 0
    while frontier.any():
        d += 1
        frontier = adj[frontier].any(axis=0) & ~visited
        dist[frontier] = d
        visited |= frontier
    return dist


def query_sources(n_nodes: int, n_queries: int, master_seed: int) -> np.ndarray:
    g = rng.generator(master_seed, rng.QUERY, n_nodes)
    return np.sort(g.choice(n_nodes, size=min(n_queries, n_nodes), replace=False))


def graph_query_score(golden: Graph, faulty: Graph, n_queries: int, master_seed: int) -> float:
    """Mean fraction of nodes whose BFS distance matches the golden graph's."""
    if golden.n_nodes != faulty.n_nodes:
        raise ValueError("graphs differ in node count")
    if n_queries < 1:
        raise ValueError("n_queries must be >= 1")
    scores = [np.mean(bfs_distances(golden, s) == bfs_distances(faulty, s))
              for s in query_sources(golden.n_nodes, n_queries, master_seed)]
    return float(np.mean(scores))


# --- MLC encoding ----------------------------------------------------------------


def encode_levels(bits, bits_per_cell: int) -> np.ndarray:
    """Group bits MSB-first into cell levels, zero-padding the tail."""
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    if len(bits) and (bits.min() < 0 or bits.max() > 1):
        raise ValueError("bits must be 0/1")
    pad = -len(bits) % bits_per_cell
    groups = np.concatenate([bits, np.zeros(pad, dtype=np.int64)]).reshape(-1, bits_per_cell)
    weights = 1 << np.arange(bits_per_cell - 1, -1, -1)
    return groups @ weights


def decode_levels(levels, bits_per_cell: int, n_bits: int | None = None) -> np.ndarray:
    levels = np.asarray(levels, dtype=np.int64).reshape(-1)
    if len(levels) and (levels.min() < 0 or levels.max() >= 1 << bits_per_cell):
        raise ValueError(f"level out of range for {bits_per_cell} bits per cell")
    shifts = np.arange(bits_per_cell - 1, -1, -1)
    bits = ((levels[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)
    return bits if n_bits is None else bits[:n_bits]


@dataclass
class FaultCounts:
    bit_error_rate: float
    level_error_rate: float
    confusion: np.ndarray  # counts[stored, read]
    n_bits: int
    n_cells: int


def store_and_readback(bits, mem: MemConfig, master_seed: int, threads: int = 1):
    """Push ``bits`` through program/sense on fresh cells ``0..n_cells-1``."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    bpc = mem.adc.bits_per_cell
    levels = encode_levels(bits, bpc)
    m = mem.adc.n_levels
    confusion = np.zeros((m, m), dtype=np.int64)
    if len(levels) == 0:
        return bits.copy(), FaultCounts(0.0, 0.0, confusion, 0, 0)
    read, _ = read_back(mem, levels, np.arange(len(levels)), master_seed, threads)
    np.add.at(confusion, (levels, read), 1)
    out = decode_levels(read, bpc, len(bits))
    return out, FaultCounts(
        bit_error_rate=float(np.mean(out != bits)),
        level_error_rate=float(np.mean(read != levels)),
        confusion=confusion,
        n_bits=len(bits),
        n_cells=len(levels),
    )


# --- quantization ----------------------------------------------------------------


@dataclass
class QuantizedTensor:
    codes: np.ndarray  # uint8, flat row-major
    shape: tuple
    scale: float
    zero_point: int
    offset: float = 0.0  # holds the value of a constant tensor (scale 0)

    def dequantize(self) -> np.ndarray:
        q = self.codes.astype(np.float64) - self.zero_point
        return (self.scale * q + self.offset).reshape(self.shape)

    def to_bits(self) -> np.ndarray:
        return np.unpackbits(self.codes.astype(np.uint8))

    def with_bits(self, bits) -> "QuantizedTensor":
        codes = np.packbits(np.asarray(bits, dtype=np.uint8)[: 8 * len(self.codes)])
        return QuantizedTensor(codes, self.shape, self.scale, self.zero_point, self.offset)


def quantize_affine(values, n_bits: int = 8) -> QuantizedTensor:
    if n_bits != 8:
        raise ValueError("only 8-bit codes are supported")
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    flat = v.reshape(-1)
    lo, hi = (float(flat.min()), float(flat.max())) if flat.size else (0.0, 0.0)
    qmax = (1 << n_bits) - 1
    if hi == lo:
        return QuantizedTensor(np.zeros(flat.size, dtype=np.uint8), v.shape, 0.0, 0, lo)
    scale = (hi - lo) / qmax
    zp = int(round(-lo / scale))
    codes = np.clip(np.round(flat / scale) + zp, 0, qmax).astype(np.uint8)
    return QuantizedTensor(codes, v.shape, scale, zp)


def load_tensor(manifest_path) -> np.ndarray:
    """Read a raw little-endian f32 tensor described by a JSON manifest."""
    path = Path(manifest_path)
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read tensor manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(meta, dict) or meta.get("dtype") != "f32":
        raise InputError(f"{path}: manifest must have dtype 'f32'")
    shape = meta.get("shape")
    if not isinstance(shape, list) or not all(isinstance(d, int) and d >= 0 for d in shape):
        raise InputError(f"{path}: shape must be a list of non-negative integers")
    data = path.parent / str(meta.get("data", ""))
    try:
        raw = data.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read tensor data {data}: {exc}") from exc
    n = int(np.prod(shape)) if shape else 1
    if len(raw) != 4 * n:
        raise InputError(f"{data}: expected {4 * n} bytes for shape {shape}, got {len(raw)}")
    arr = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{data}: tensor contains non-finite values")
    return arr


# --- synthetic classifier ----------------------------------------------------------


@dataclass
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    n_classes: int


def make_blobs(n_classes: int = 10, dim: int = 64, n_train: int = 2000, n_test: int = 2000,
               master_seed: int = 0, separation: float = 0.3) -> Dataset:
    """Unit-variance Gaussian classes around seeded random means."""
    if min(n_classes, dim, n_train, n_test) < 1:
        raise ValueError("dataset sizes must be positive")
    means = separation * rng.generator(master_seed, rng.CLASS_MEANS).standard_normal(
        (n_classes, dim))
    g = rng.generator(master_seed, rng.SAMPLES)

    def split(n):
        y = np.arange(n) % n_classes
        return means[y] + g.standard_normal((n, dim)), y

    x_tr, y_tr = split(n_train)
    x_te, y_te = split(n_test)
    return Dataset(x_tr, y_tr, x_te, y_te, n_classes)


def _with_bias(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((len(x), 1))])


def train_ridge(ds: Dataset, ridge_lambda: float = 1.0) -> np.ndarray:
    """One-vs-all ridge weights, shape (dim + 1, n_classes); last row is the bias."""
    if ridge_lambda <= 0:
        raise ValueError("ridge_lambda must be positive")
    x = _with_bias(ds.x_train)
    y = np.eye(ds.n_classes)[ds.y_train]
    a = x.T @ x + ridge_lambda * np.eye(x.shape[1])
    return scipy.linalg.solve(a, x.T @ y, assume_a="pos")


def classifier_accuracy(weights: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.argmax(_with_bias(x) @ weights, axis=1) == y))


# --- injection reports -------------------------------------------------------------


@dataclass
class InjectionReport:
    workload: str
    bit_error_rate: float
    level_error_rate: float
    confusion: np.ndarray
    metric_before: float
    metric_after: float
    n_bits: int
    n_cells: int
    extra: dict = field(default_factory=dict)

    @property
    def relative_error(self) -> float:
        if self.metric_before == 0:
            return 0.0 if self.metric_after == 0 else float("-inf")
        return 1.0 - self.metric_after / self.metric_before

    def to_dict(self) -> dict:
        return {
            "workload": self.workload,
            "bit_error_rate": self.bit_error_rate,
            "level_error_rate": self.level_error_rate,
            "confusion_counts": self.confusion.tolist(),
            "metric_before": self.metric_before,
            "metric_after": self.metric_after,
            "relative_error": self.relative_error,
            "n_bits": self.n_bits,
            "n_cells": self.n_cells,
            **self.extra,
        }


def _report(workload, counts: FaultCounts, before, after, **extra) -> InjectionReport:
    return InjectionReport(workload, counts.bit_error_rate, counts.level_error_rate,
                           counts.confusion, before, after, counts.n_bits, counts.n_cells,
                           extra)


def inject_graph(graph: Graph, mem: MemConfig, master_seed: int, n_queries: int = 32,
                 query_seed: int | None = None, threads: int = 1) -> InjectionReport:
    bits_out, counts = store_and_readback(graph.to_bits(), mem, master_seed, threads)
    faulty = graph.with_bits(bits_out)
    qs = master_seed if query_seed is None else query_seed
    before = graph_query_score(graph, graph, n_queries, qs)
    after = graph_query_score(graph, faulty, n_queries, qs)
    return _report("graph", counts, before, after, n_nodes=graph.n_nodes,
                   n_queries=min(n_queries, graph.n_nodes))


@dataclass
class ClassifierTask:
    dataset: Dataset
    weights: np.ndarray

    @classmethod
    def synthetic(cls, master_seed: int = 42, n_classes: int = 10, dim: int = 64,
                  n_train: int = 2000, n_test: int = 2000, ridge_lambda: float = 1.0):
        ds = make_blobs(n_classes, dim, n_train, n_test, master_seed)
        return cls(ds, train_ridge(ds, ridge_lambda))

    def accuracy(self, weights=None) -> float:
        w = self.weights if weights is None else weights
        return classifier_accuracy(w, self.dataset.x_test, self.dataset.y_test)


def inject_classifier(task: ClassifierTask, mem: MemConfig, master_seed: int,
                      threads: int = 1) -> InjectionReport:
    """Store 8-bit quantized weights; baseline is the quantized (fault-free) accuracy."""
    q = quantize_affine(task.weights)
    bits_out, counts = store_and_readback(q.to_bits(), mem, master_seed, threads)
    before = task.accuracy(q.dequantize())
    after = task.accuracy(q.with_bits(bits_out).dequantize())
    return _report("classifier", counts, before, after,
                   float_accuracy=task.accuracy(), n_weights=int(task.weights.size))


# --- minimum cell size ---------------------------------------------------------------


@dataclass
class MinSizeRow:
    bpc: int
    scheme: str
    workload: str
    min_domains: int | None  # None: no grid point passes
    mean_relative_error: list = field(default_factory=list)  # per scanned grid point


def replicate_seed(master_seed: int, r: int) -> int:
    return int(rng.hash64(master_seed, rng.DATA, r))


def min_cell_size_sweep(workload: str, base: MemConfig, domain_grid, epsilon: float,
                        replicates: int, master_seed: int, graph: Graph | None = None,
                        task: ClassifierTask | None = None, schemes=("single", "verify"),
                        bpc_set=(1, 2, 3), n_queries: int = 32, threads: int = 1) -> list:
    """Smallest grid size per (scheme, bpc) whose mean relative error is below ``epsilon``.

    Grid points are scanned in ascending order and the scan stops at the first pass.
    Replicate ``r`` uses the same cell seed for every configuration.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if workload not in WORKLOADS:
        raise ValueError(f"workload must be one of {WORKLOADS}")
    if replicates < 1 or not domain_grid:
        raise ValueError("need replicates >= 1 and a non-empty domain grid")
    if workload == "graph" and graph is None:
        raise ValueError("graph workload needs a graph")
    if workload == "classifier" and task is None:
        task = ClassifierTask.synthetic()
    seeds = [replicate_seed(master_seed, r) for r in range(replicates)]

    def rel_error(mem, seed):
        if workload == "graph":
            rep = inject_graph(graph, mem, seed, n_queries, master_seed, threads)
        else:
            rep = inject_classifier(task, mem, seed, threads)
        return rep.relative_error

    rows = []
    for bpc in bpc_set:
        for scheme in schemes:
            row = MinSizeRow(bpc, scheme, workload, None)
            for n in sorted(domain_grid):
                mem = base.with_(n, bpc, scheme)
                err = float(np.mean([rel_error(mem, s) for s in seeds]))
                row.mean_relative_error.append((n, err))
                if err < epsilon:
                    row.min_domains = n
                    break
            rows.append(row)
    return rows


def minsize_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MINSIZE_HEADER)
    for r in rows:
        w.writerow([r.bpc, r.scheme, r.workload,
                    "none" if r.min_domains is None else r.min_domains])
    return buf.getvalue()
