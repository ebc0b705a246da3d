"""Chunked, seed-scheduled Monte Carlo execution.

Paths are split into fixed chunks; chunk c of a run with base seed s draws
its noise from a generator keyed by (s, c), so a path's randomness is a pure
function of (seed, path index) regardless of worker count.  Policy
comparisons that share a seed therefore share noise path by path (common
random numbers).  Chunk results are reduced in chunk order and means use
compensated summation, so the reported numbers are independent of
parallelism to the last bit.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import NonFiniteSample

_TARGET_CHUNK_ELEMS = 60_000_000  # keeps a chunk's noise block under ~0.5 GB


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 20_000
    seed: int = 0
    workers: int = 1
    max_chunk: int = 4096

    def with_seed(self, seed: int) -> "MCConfig":
        return replace(self, seed=int(seed))

    def with_paths(self, n_paths: int) -> "MCConfig":
        return replace(self, n_paths=int(n_paths))


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def chunk_plan(n_paths: int, elems_per_path: int, cfg: MCConfig):
    """Deterministic (start, size, chunk_index) triples for a run."""
    size = max(1, min(cfg.max_chunk, _TARGET_CHUNK_ELEMS // max(1, elems_per_path)))
    plan = []
    start = 0
    ci = 0
    while start < n_paths:
        n = min(size, n_paths - start)
        plan.append((start, n, ci))
        start += n
        ci += 1
    return plan


def chunk_generator(seed: int, chunk_index: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(
            np.random.SeedSequence((int(seed), int(stream), int(chunk_index)))
        )
    )


def draw_noise(seed: int, chunk_index: int, n: int, m: int, n_modes: int,
               stream: int = 0) -> np.ndarray:
    return chunk_generator(seed, chunk_index, stream).standard_normal((n, m, n_modes))


_task = None
_task_args = None


def _init_worker(task, task_args):
    global _task, _task_args
    _task = task
    _task_args = task_args


def _run_one(item):
    start, n, ci = item
    return _task(_task_args, start, n, ci)


def run_chunks(task, task_args, n_paths: int, elems_per_path: int, cfg: MCConfig):
    """Run `task(task_args, start, n, chunk_index) -> dict[str, (n,) array]`.

    Returns the per-path arrays concatenated in path order.  With
    cfg.workers > 1 the chunks run in separate processes; results are
    identical either way.
    """
    plan = chunk_plan(n_paths, elems_per_path, cfg)
    if cfg.workers > 1 and len(plan) > 1:
        with ProcessPoolExecutor(
            max_workers=min(cfg.workers, len(plan)),
            initializer=_init_worker,
            initargs=(task, task_args),
        ) as pool:
            parts = list(pool.map(_run_one, plan, chunksize=1))
    else:
        parts = [task(task_args, start, n, ci) for start, n, ci in plan]
    out = {}
    for key in parts[0]:
        out[key] = np.concatenate([p[key] for p in parts])
    return out


def mean_se(values: np.ndarray) -> tuple[float, float]:
    """Compensated mean and standard error of a per-path sample."""
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NonFiniteSample(f"{np.count_nonzero(~np.isfinite(v))} non-finite samples")
    n = len(v)
    mean = math.fsum(v) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in v) / (n - 1)
    return mean, math.sqrt(var / n)
