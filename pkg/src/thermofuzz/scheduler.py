"""Seed pool and mutation-rule scheduling.

Seeds are picked by drawing a random 10% subset of the pool and taking its
best performer. Rules are sampled in proportion to their cumulative
contribution, clamped at zero and smoothed by ``EPSILON`` so that every rule
keeps a nonzero chance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._rng import generator
from .graph import ModelGraph, load_graph, save_graph
from .tensors import input_mean

__all__ = [
    "EPSILON",
    "INITIAL_PERFORMANCE",
    "N_RULES",
    "RuleStats",
    "SeedRecord",
    "load_pool",
    "maybe_admit",
    "performance_of",
    "rule_probabilities",
    "save_pool",
    "select_rule",
    "select_seed",
    "subset_size",
    "update_contribution",
]

N_RULES = 8
EPSILON = 0.01
SUBSET_FRACTION = 0.1
# neutral prior for bundled seeds: the heavy-inconsistency threshold
INITIAL_PERFORMANCE = 0.15

BUG_VERDICTS = ("crash", "nan", "heavy_inconsistency")


@dataclass(frozen=True)
class SeedRecord:
    model: ModelGraph
    performance: float
    origin: str = "initial"  # initial | generated
    triggered: frozenset = frozenset()
    id: str = ""

    def __post_init__(self) -> None:
        if not math.isfinite(self.performance):
            raise ValueError(f"performance must be finite, got {self.performance}")
        if not self.id:
            object.__setattr__(self, "id", self.model.content_hash())


@dataclass(frozen=True)
class RuleStats:
    contribution: tuple[float, ...] = field(default=(0.0,) * N_RULES)

    def __post_init__(self) -> None:
        c = tuple(float(x) for x in self.contribution)
        if len(c) != N_RULES:
            raise ValueError(f"expected {N_RULES} contributions, got {len(c)}")
        if not all(math.isfinite(x) for x in c):
            raise ValueError("contributions must be finite")
        object.__setattr__(self, "contribution", c)

    @property
    def n(self) -> int:
        return N_RULES

    def __getitem__(self, rule: int) -> float:
        return self.contribution[int(rule) - 1]


def subset_size(pool_size: int) -> int:
    return max(1, math.ceil(SUBSET_FRACTION * pool_size))


def select_seed(pool: Sequence[SeedRecord], rng_seed: int) -> SeedRecord:
    """Best performer of a uniform random 10% subset (ties: earliest in pool)."""
    if not pool:
        raise ValueError("cannot select from an empty seed pool")
    rng = generator(rng_seed)
    picked = np.sort(rng.choice(len(pool), size=subset_size(len(pool)), replace=False))
    best = max(picked, key=lambda i: (pool[i].performance, -i))
    return pool[int(best)]


def performance_of(verdict: str, inputs: Sequence[np.ndarray], mae: float) -> float:
    """Input mean for crashes and NaNs, the output MAE otherwise."""
    if mae < 0:
        raise ValueError("mae must be >= 0")
    if verdict in ("crash", "nan"):
        return input_mean(inputs)
    return float(mae)


def update_contribution(stats: RuleStats, rule: int, perf_new: float, perf_seed: float) -> RuleStats:
    c = list(stats.contribution)
    c[int(rule) - 1] += perf_new - perf_seed
    return RuleStats(tuple(c))


def rule_probabilities(stats: RuleStats, allowed: Iterable[int] | None = None,
                       epsilon: float = EPSILON) -> np.ndarray:
    """Selection probability of rules 1..8 (index 0 is rule 1)."""
    w = np.maximum(np.asarray(stats.contribution), 0.0) + epsilon
    if allowed is not None:
        mask = np.zeros(N_RULES, dtype=bool)
        mask[[int(r) - 1 for r in allowed]] = True
        w = np.where(mask, w, 0.0)
    return w / w.sum()


def select_rule(stats: RuleStats, rng_seed: int, allowed: Iterable[int] | None = None) -> int:
    p = rule_probabilities(stats, allowed)
    return int(generator(rng_seed).choice(N_RULES, p=p)) + 1


def maybe_admit(pool: list[SeedRecord], model: ModelGraph, verdict: str, performance: float,
                duplicate: bool = False) -> list[SeedRecord]:
    """Pool with ``model`` appended if it exposed a (non-duplicate) bug."""
    if verdict not in BUG_VERDICTS or duplicate:
        return pool
    record = SeedRecord(model, performance, "generated", frozenset({verdict}))
    if any(r.id == record.id for r in pool):
        return pool
    return [*pool, record]


# ---------------------------------------------------------------------------
# persistence: <dir>/index.json plus one graph file per record


def save_pool(pool: Sequence[SeedRecord], directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = []
    for rec in pool:
        path = directory / f"{rec.id}.json"
        if not path.exists():
            save_graph(rec.model, path)
        index.append({
            "id": rec.id,
            "performance": rec.performance,
            "origin": rec.origin,
            "triggered": sorted(rec.triggered),
        })
    with open(directory / "index.json", "w") as fh:
        json.dump(index, fh, indent=1)
        fh.write("\n")


def load_pool(directory: str | Path) -> list[SeedRecord]:
    """Read a pool directory; without ``index.json`` every graph file is an
    initial seed with the neutral prior."""
    directory = Path(directory)
    index_path = directory / "index.json"
    if not index_path.exists():
        files = sorted(p for p in directory.glob("*.json"))
        return [SeedRecord(load_graph(p), INITIAL_PERFORMANCE) for p in files]
    with open(index_path) as fh:
        index = json.load(fh)
    return [
        SeedRecord(
            load_graph(directory / f"{row['id']}.json"),
            float(row["performance"]),
            row.get("origin", "initial"),
            frozenset(row.get("triggered", ())),
            row["id"],
        )
        for row in index
    ]
