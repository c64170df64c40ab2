"""
Kernel Benchmarks
==================
Throughput of the two per-frame memory kernels on fixed sizes:

  gcf        16×16 grid, k = 2 (768 nodes), d = 32, default windows
  sgru_step  d = 32

Inputs are seeded; only wall-clock time varies between runs.
"""

from __future__ import annotations

import logging
import time
from typing import Callable

import numpy as np

from longmem import GruParams, sgru_step
from stgraph import AdjacencyParams, GraphConfig, build_graph, edge_weights, gcf, node_features, normalize

logger = logging.getLogger("worker.bench")

BENCH_GRID = 16
BENCH_K = 2
BENCH_D = 32


def _ops_per_second(fn: Callable[[], object], min_seconds: float) -> float:
    fn()  # warm-up
    calls = 0
    started = time.perf_counter()
    while True:
        fn()
        calls += 1
        elapsed = time.perf_counter() - started
        if elapsed >= min_seconds:
            return calls / elapsed


def bench_gcf(min_seconds: float = 1.0, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    cfg = GraphConfig(k=BENCH_K, w=BENCH_GRID, h=BENCH_GRID)
    graph = build_graph(cfg)
    X = node_features([rng.standard_normal((BENCH_GRID, BENCH_GRID, BENCH_D)) for _ in range(cfg.frames)])
    scale = 1.0 / np.sqrt(BENCH_D)
    adjacency = AdjacencyParams(
        W1=rng.standard_normal((BENCH_D, BENCH_D)) * scale,
        W2=rng.standard_normal((BENCH_D, BENCH_D)) * scale,
    )
    norm = normalize(graph, edge_weights(graph, X, adjacency))
    return _ops_per_second(lambda: gcf(norm, X), min_seconds)


def bench_sgru(min_seconds: float = 1.0, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    params = GruParams(W=rng.standard_normal((BENCH_D, 2 * BENCH_D)) / np.sqrt(2 * BENCH_D))
    x, h = rng.standard_normal(BENCH_D), rng.standard_normal(BENCH_D)
    return _ops_per_second(lambda: sgru_step(x, h, params), min_seconds)


def run_bench(min_seconds: float = 1.0) -> dict[str, float]:
    results = {"gcf": bench_gcf(min_seconds), "sgru_step": bench_sgru(min_seconds)}
    for name, rate in results.items():
        logger.info(f"{name}: {rate:.1f} ops/sec")
    return results
