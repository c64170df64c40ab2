"""
Shared Test Fixtures — Dual Temporal Memory Segmentation
==========================================================
Provides seeded generators, tiny on-disk datasets, tiny model configs and the
dense reference implementations the sparse kernels are checked against.

Usage:
  pytest tests/ -v
  pytest tests/ -v -m slow      # seeded training / ablation runs
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure the repository packages are importable
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from scipy.special import expit  # noqa: E402

from segnet import ModelConfig  # noqa: E402
from stgraph import GraphConfig, STGraph  # noqa: E402
from vosdata.pgm import write_mask, write_pgm  # noqa: E402


# ── Dense references ────────────────────────────────────────────────────


def dense_adjacency(graph: STGraph, values: np.ndarray) -> np.ndarray:
    """N×N matrix with `values` at the stored (row, col) positions."""
    n = graph.node_count
    A = np.zeros((n, n), dtype=np.float64)
    A[graph.rows, graph.indices] = values
    return A


def dense_normalized(graph: STGraph, values: np.ndarray) -> np.ndarray:
    """D̃^{-1/2}(A + I)D̃^{-1/2} formed densely."""
    A_tilde = dense_adjacency(graph, values) + np.eye(graph.node_count)
    inv_sqrt = 1.0 / np.sqrt(A_tilde.sum(axis=1))
    return inv_sqrt[:, None] * A_tilde * inv_sqrt[None, :]


def dense_edge_weights(graph: STGraph, X: np.ndarray, W1: np.ndarray, W2: np.ndarray) -> np.ndarray:
    """Full N×N sigmoid similarity, sampled at the stored positions."""
    full = expit((X @ W1.T) @ (X @ W2.T).T)
    return full[graph.rows, graph.indices]


def brute_force_edges(cfg: GraphConfig) -> set[tuple[int, int]]:
    """Every (i, j) pair satisfying the window predicate, by an O(N²) double loop."""
    def position(node: int) -> tuple[int, int, int]:
        frame, rest = divmod(node, cfg.w * cfg.h)
        return (frame, *divmod(rest, cfg.w))

    edges = set()
    for i in range(cfg.node_count):
        fi, ri, ci = position(i)
        for j in range(cfg.node_count):
            fj, rj, cj = position(j)
            dr, dc = rj - ri, cj - ci
            if fj == fi:
                ok = (i != j) and abs(dr) <= cfg.hs // 2 and abs(dc) <= cfg.ws // 2
            elif fj == fi + 1 or (cfg.temporal_mode == "bidirectional" and fj == fi - 1):
                ok = abs(dr) <= cfg.ht // 2 and abs(dc) <= cfg.wt // 2
            else:
                ok = False
            if ok:
                edges.add((i, j))
    return edges


# ── On-disk datasets ────────────────────────────────────────────────────


def write_dataset(root: Path, sequences: dict[str, tuple[np.ndarray, np.ndarray]]) -> Path:
    """Write {name: (frames T×H×W uint8, masks T×H×W {0,1})} in the dataset layout."""
    for name, (frames, masks) in sequences.items():
        for t in range(frames.shape[0]):
            write_pgm(root / name / "frames" / f"{t + 1:05d}.pgm", frames[t])
            write_mask(root / name / "masks" / f"{t + 1:05d}.pgm", masks[t])
    return root


def square_masks(frames: int, size: int = 8, side: int = 4) -> np.ndarray:
    """A side×side square moving one pixel right per frame (wrapping)."""
    masks = np.zeros((frames, size, size), dtype=np.uint8)
    for t in range(frames):
        cols = [(t + c) % size for c in range(side)]
        masks[t][np.ix_(range(side), cols)] = 1
    return masks


# ── Fixtures ────────────────────────────────────────────────────────────


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model_cfg():
    """cin 1, d 4, k 1: small enough for full gradient checks."""
    return ModelConfig(cin=1, d=4, graph=GraphConfig(k=1))


@pytest.fixture
def tiny_sequence_arrays():
    """Five 8×8 frames with a bright moving square and its masks."""
    generator = np.random.default_rng(7)
    masks = square_masks(5)
    background = generator.integers(20, 100, size=masks.shape)
    foreground = generator.integers(170, 240, size=masks.shape)
    frames = np.where(masks > 0, foreground, background).astype(np.uint8)
    return frames, masks


@pytest.fixture
def tiny_dataset(tmp_path, tiny_sequence_arrays):
    """Two sequences (5 frames, 8×8) on disk; returns the dataset root."""
    frames, masks = tiny_sequence_arrays
    return write_dataset(
        tmp_path / "data",
        {"alpha": (frames, masks), "beta": (frames[:, :, ::-1].copy(), masks[:, :, ::-1].copy())},
    )
