"""Experiment configuration, orchestration and CSV reports."""

from __future__ import annotations

import csv
import io
import json
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy

from picnet.errors import ConfigurationError
from picnet.measures import ContextQuery, pair_metric
from picnet.partition import (
    RegionReport,
    assign_cells,
    build_approximator,
    build_partition_net,
    greedy_packing,
    region_statistics,
)
from picnet.harness.samples import generate_samples
from picnet.harness.targets import target_library


@dataclass(frozen=True)
class ExperimentConfig:
    C: int
    N: int
    d: int
    M: int
    D: int
    num_samples: int
    seed: int
    delta: tuple[float, ...]
    delta_star: tuple[float, ...]
    q: float = 1.0
    target_name: str = "mean_shift"
    moment_p: float = 1.0

    def __post_init__(self):
        for name in ("C", "N", "d", "M", "D", "num_samples"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
        if self.C < self.N:
            raise ConfigurationError(f"need C >= N, got C={self.C}, N={self.N}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        delta = _as_tuple(self.delta, "delta")
        delta_star = _as_tuple(self.delta_star, "delta_star")
        if len(delta_star) == 1 and len(delta) > 1:
            delta_star = delta_star * len(delta)
        if len(delta) == 1 and len(delta_star) > 1:
            delta = delta * len(delta_star)
        if len(delta) != len(delta_star):
            raise ConfigurationError("delta and delta_star lists differ in length")
        for a, b in zip(delta, delta_star):
            if not 0 < b < a:
                raise ConfigurationError(f"need 0 < delta_star < delta, got {b}, {a}")
        if not self.moment_p >= 1:
            raise ConfigurationError("moment_p must be at least 1")
        if not self.q > 0:
            raise ConfigurationError("q must be positive")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "delta_star", delta_star)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigurationError("experiment config must be a JSON object")
        obj = dict(obj)
        if "target" in obj:
            obj["target_name"] = obj.pop("target")
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        missing = {"C", "N", "d", "M", "D", "num_samples", "seed", "delta", "delta_star"} - set(obj)
        if missing:
            raise ConfigurationError(f"missing config keys: {', '.join(sorted(missing))}")
        return cls(**obj)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"malformed JSON config: {exc}") from None
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["delta"] = list(self.delta)
        out["delta_star"] = list(self.delta_star)
        out["target"] = out.pop("target_name")
        return out


def _as_tuple(value, name: str) -> tuple[float, ...]:
    values = value if isinstance(value, (list, tuple)) else [value]
    if not values:
        raise ConfigurationError(f"{name} is empty")
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be a number or a list of numbers") from None


@dataclass
class Report:
    config: ExperimentConfig
    rows: list[RegionReport]
    metadata: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RegionReport.CSV_COLUMNS)
        for row in self.rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row.csv_row()])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"config": self.config.to_dict(), "rows": [asdict(r) for r in self.rows],
                "metadata": self.metadata, "timings": self.timings}


def read_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and set(RegionReport.CSV_COLUMNS) - set(rows[0]):
        raise ConfigurationError("report CSV lacks required columns")
    return [{k: (int(v) if k == "K" else float(v)) for k, v in r.items()} for r in rows]


def pairwise_distances(samples: Sequence[ContextQuery], threads: int = 1) -> np.ndarray:
    """Symmetric pair_metric matrix, rows computed on a thread pool."""
    n = len(samples)

    def row(i):
        return [pair_metric(samples[i], samples[j]) for j in range(i + 1, n)]

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        upper = list(pool.map(row, range(n)))
    out = np.zeros((n, n))
    for i, vals in enumerate(upper):
        out[i, i + 1:] = vals
        out[i + 1:, i] = vals
    return out


def run_experiment(config: ExperimentConfig, threads: int = 1, samples=None) -> Report:
    """One report row per (delta, delta_star) pair on a single seeded sample set."""
    t0 = time.perf_counter()
    samples = generate_samples(config) if samples is None else samples
    f = target_library(config.target_name, config.M, config.D, config.C)
    timings = {"samples": time.perf_counter() - t0}
    t0 = time.perf_counter()
    dist = pairwise_distances(samples, threads)
    timings["distances"] = time.perf_counter() - t0
    rows = []
    for delta, delta_star in zip(config.delta, config.delta_star):
        t0 = time.perf_counter()
        packing = greedy_packing(samples, delta, delta_star, distances=dist)
        assignment = assign_cells(packing, samples, distances=dist[:, list(packing.indices)])
        partition = build_partition_net(packing) if packing.K > 1 else None
        f_hat = build_approximator(packing, f, partition)
        rows.append(region_statistics(packing, samples, f, f_hat, p=config.moment_p, q=config.q,
                                      partition=partition, assignment=assignment))
        timings[f"delta={delta!r},delta_star={delta_star!r}"] = time.perf_counter() - t0
    metadata = {"python": platform.python_version(), "numpy": np.__version__,
                "scipy": scipy.__version__, "machine": platform.machine(), "threads": threads}
    return Report(config, rows, metadata, timings)
