"""
Offline curvature store for interval batches.

Ricci vectors and observed curvatures are computed once per
(interval, side, seed), kept in an LRU cache and persisted as one JSON
file per entry so later runs and the training loop read them back.
"""

import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import psutil
import torch
from cachetools import LRUCache
from pydantic import BaseModel, Field

from .curvature import (
    SIDES,
    build_cooccurrence_subgraph,
    observed_curvature,
    ricci_vector,
)
from .errors import GraphTooSmallError, SinError
from .geometry import as_tensor
from .logging_config import get_logger, log_cache_event, log_curvature_computation

CACHE_FORMAT_VERSION = 2
SIDE_CODES = {"user": 0, "item": 1}


class CurvatureRecord(BaseModel):
    """Curvature summary of one interval side."""
    format_version: int = CACHE_FORMAT_VERSION
    interval: Union[int, str]
    side: str
    seed: int
    alpha: float
    K: int
    sample_ratio: float
    max_edges: int
    iterations: int
    fingerprint: str
    n_nodes: int
    n_edges: int
    ricci: List[float]
    kappa_observed: float
    observed: bool = Field(description="False when the subgraph was too small for an estimate")
    elapsed_ms: float = Field(default=0.0, exclude=True)

    def ricci_tensor(self) -> torch.Tensor:
        return as_tensor(self.ricci)


def derived_seed(seed: int, interval: Union[int, str], side: str) -> int:
    """Independent seed for one (interval, side) from the run seed."""
    tag = interval if isinstance(interval, int) else -1 - sum(map(ord, str(interval)))
    entropy = [seed, tag & 0xFFFFFFFF, SIDE_CODES[side]]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


class CurvatureStore:
    """
    Computes, caches and persists per-interval curvature records.

    Records may be computed concurrently; LRU access and file writes are
    serialised by locks.
    """

    def __init__(
        self,
        directory: Optional[Union[str, Path]] = None,
        alpha: float = 0.5,
        K: int = 1,
        sample_ratio: float = 0.2,
        seed: int = 0,
        width: int = 64,
        max_edges: int = 256,
        iterations: int = 10,
        cache_size: int = 512,
        workers: int = 1
    ):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self.alpha = alpha
        self.K = K
        self.sample_ratio = sample_ratio
        self.seed = seed
        self.width = width
        self.max_edges = max_edges
        self.iterations = iterations
        self.workers = max(1, workers)

        self.cache: LRUCache = LRUCache(maxsize=cache_size)
        self.cache_stats = {
            "hits": 0,
            "misses": 0,
            "disk_hits": 0,
            "evictions": 0
        }
        self.performance_metrics = {
            "computations": 0,
            "total_compute_ms": 0.0,
            "start_time": time.time()
        }
        self._cache_lock = threading.Lock()
        self._write_lock = threading.Lock()

        self.logger = get_logger(__name__, {"component": "curvature_store"})
        self.logger.info(
            "CurvatureStore initialized",
            extra={
                "cache_dir": str(self.directory) if self.directory else None,
                "cache_max_size": cache_size,
                "sample_ratio": sample_ratio
            }
        )

    @classmethod
    def from_config(cls, config: Any, directory: Optional[Union[str, Path]] = None) -> "CurvatureStore":
        """Build a store from a RunConfig."""
        return cls(
            directory=directory,
            alpha=config.alpha,
            K=config.K,
            sample_ratio=config.sample_ratio,
            seed=config.seed,
            width=config.ricci_width,
            max_edges=config.max_edges,
            iterations=config.curvature_iterations,
            cache_size=config.cache_size,
            workers=config.workers
        )

    def _key(self, interval: Union[int, str], side: str) -> str:
        label = f"{interval:05d}" if isinstance(interval, int) else str(interval)
        return f"curv_{side}_{label}_s{self.seed}"

    def path_for(self, interval: Union[int, str], side: str) -> Optional[Path]:
        if self.directory is None:
            return None
        return self.directory / f"{self._key(interval, side)}.json"

    def get(self, batch: Any, side: str, interval: Optional[Union[int, str]] = None) -> CurvatureRecord:
        """
        Curvature record of one batch side: memory, then disk, then computed.

        Args:
            batch: IntervalBatch (or any object with users/items arrays)
            side: "user" or "item"
            interval: Override of the batch index used as the cache key
        """
        if side not in SIDES:
            raise SinError(f"Unknown side: {side}", code="INVALID_SIDE", details={"side": side})
        interval = batch.index if interval is None else interval
        key = self._key(interval, side)
        fingerprint = batch.fingerprint()

        record = None
        with self._cache_lock:
            cached = self.cache.get(key)
            if cached is not None and self._matches(cached, fingerprint):
                self.cache_stats["hits"] += 1
                record = cached
            else:
                self.cache_stats["misses"] += 1
        log_cache_event(self.logger, key, hit=record is not None)
        if record is not None:
            return record

        record = self._read(interval, side)
        if record is not None and self._matches(record, fingerprint):
            with self._cache_lock:
                self.cache_stats["disk_hits"] += 1
        else:
            record = self._compute(batch, side, interval, fingerprint)
            with self._write_lock:
                self._write(record)
        with self._cache_lock:
            self._cache_record(key, record)
        return record

    def _matches(self, record: CurvatureRecord, fingerprint: str) -> bool:
        return (
            record.fingerprint == fingerprint
            and record.alpha == self.alpha
            and record.K == self.K
            and record.sample_ratio == self.sample_ratio
            and record.max_edges == self.max_edges
            and record.iterations == self.iterations
            and len(record.ricci) == self.width
        )

    def _compute(self, batch: Any, side: str, interval: Union[int, str], fingerprint: str) -> CurvatureRecord:
        start = time.time()
        seed = derived_seed(self.seed, interval, side)
        graph = build_cooccurrence_subgraph(
            batch.users, batch.items, side,
            K=self.K, sample_ratio=self.sample_ratio, seed=seed
        )
        ricci = ricci_vector(
            graph, alpha=self.alpha, max_edges=self.max_edges, seed=seed,
            width=self.width, interval=interval if isinstance(interval, int) else None,
            workers=self.workers
        )
        try:
            kappa = observed_curvature(graph, iterations=self.iterations, seed=seed)
            observed = True
        except GraphTooSmallError:
            kappa, observed = 0.0, False

        elapsed_ms = (time.time() - start) * 1000
        with self._cache_lock:
            self.performance_metrics["computations"] += 1
            self.performance_metrics["total_compute_ms"] += elapsed_ms
        log_curvature_computation(self.logger, interval, side, graph.number_of_edges(), kappa, elapsed_ms)

        return CurvatureRecord(
            interval=interval,
            side=side,
            seed=self.seed,
            alpha=self.alpha,
            K=self.K,
            sample_ratio=self.sample_ratio,
            max_edges=self.max_edges,
            iterations=self.iterations,
            fingerprint=fingerprint,
            n_nodes=graph.number_of_nodes(),
            n_edges=graph.number_of_edges(),
            ricci=ricci.values,
            kappa_observed=kappa,
            observed=observed,
            elapsed_ms=elapsed_ms
        )

    def _read(self, interval: Union[int, str], side: str) -> Optional[CurvatureRecord]:
        path = self.path_for(interval, side)
        if path is None or not path.is_file():
            return None
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            self.logger.warning(f"Unreadable curvature cache file {path}: {e}")
            return None
        if payload.get("format_version") != CACHE_FORMAT_VERSION:
            self.logger.warning(
                f"Ignoring curvature cache file {path} with format version {payload.get('format_version')}"
            )
            return None
        return CurvatureRecord(**payload)

    def _write(self, record: CurvatureRecord) -> None:
        path = self.path_for(record.interval, record.side)
        if path is None:
            return
        text = json.dumps(record.model_dump(), sort_keys=True, indent=1)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(text + "\n", encoding="utf-8")
        os.replace(tmp, path)

    def _cache_record(self, key: str, record: CurvatureRecord) -> None:
        old_size = len(self.cache)
        replacing = key in self.cache
        self.cache[key] = record
        if not replacing and old_size == self.cache.maxsize:
            self.cache_stats["evictions"] += 1

    def warm(self, batches: Iterable[Any], sides: Tuple[str, ...] = SIDES) -> List[CurvatureRecord]:
        """Precompute every (batch, side) record, on a thread pool when workers > 1."""
        jobs = [(batch, side) for batch in batches for side in sides]
        self.logger.info(f"Warming curvature store with {len(jobs)} entries", extra={"workers": self.workers})
        if self.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(lambda job: self.get(*job), jobs))
        return [self.get(batch, side) for batch, side in jobs]

    def get_cache_stats(self) -> Dict[str, Any]:
        """Get cache statistics for monitoring."""
        total = self.cache_stats["hits"] + self.cache_stats["misses"]
        return {
            "size": len(self.cache),
            "max_size": self.cache.maxsize,
            "hits": self.cache_stats["hits"],
            "misses": self.cache_stats["misses"],
            "disk_hits": self.cache_stats["disk_hits"],
            "evictions": self.cache_stats["evictions"],
            "hit_ratio": self.cache_stats["hits"] / total if total else 0.0
        }

    def get_performance_metrics(self) -> Dict[str, Any]:
        """Compute totals and process memory."""
        process = psutil.Process(os.getpid())
        computations = self.performance_metrics["computations"]
        return {
            "computations": computations,
            "total_compute_ms": self.performance_metrics["total_compute_ms"],
            "mean_compute_ms": self.performance_metrics["total_compute_ms"] / computations if computations else 0.0,
            "uptime_s": time.time() - self.performance_metrics["start_time"],
            "rss_mb": process.memory_info().rss / (1024 * 1024),
            "cache_hit_ratio": self.get_cache_stats()["hit_ratio"]
        }
