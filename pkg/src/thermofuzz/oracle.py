"""Differential verdicts between the reference and degraded executors."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .executors import ExecutionTrace

__all__ = [
    "CrashArchive",
    "HEAVY_INCONSISTENCY_MAE",
    "Verdict",
    "cosine_similarity",
    "dedup_crash",
    "detect",
    "mae",
    "normalize_log",
]

HEAVY_INCONSISTENCY_MAE = 0.15
DUPLICATE_SIMILARITY = 1.0 - 1e-9

PASS, CRASH, NAN, HEAVY, INVALID = "pass", "crash", "nan", "heavy_inconsistency", "invalid"


@dataclass(frozen=True)
class Verdict:
    kind: str
    mae: float = 0.0
    normalized_log: tuple[str, ...] = ()
    duplicate: bool = False

    @property
    def is_bug(self) -> bool:
        return self.kind in (CRASH, NAN, HEAVY)


def mae(x: np.ndarray, y: np.ndarray) -> float:
    """Mean absolute elementwise difference.

    The sum is correctly rounded, so the result does not depend on
    summation order.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.size == 0:
        return 0.0
    return math.fsum(np.abs(x - y).ravel().tolist()) / x.size


def normalize_log(lines: Iterable[dict]) -> tuple[str, ...]:
    """Keep only ``kind:event`` tokens, dropping times, temperatures and ids."""
    return tuple(f"{line['kind']}:{line['event']}" for line in lines)


def cosine_similarity(a: Sequence[str], b: Sequence[str]) -> float:
    ca, cb = Counter(a), Counter(b)
    if not ca or not cb:
        return 1.0 if not ca and not cb else 0.0
    dot = sum(ca[t] * cb[t] for t in ca.keys() & cb.keys())
    na = math.sqrt(sum(v * v for v in ca.values()))
    nb = math.sqrt(sum(v * v for v in cb.values()))
    return dot / (na * nb)


@dataclass
class CrashArchive:
    """Normalized crash logs seen so far, with first-seen metadata."""

    entries: list[tuple[tuple[str, ...], dict]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def is_duplicate(self, tokens: Sequence[str]) -> bool:
        return any(cosine_similarity(tokens, old) >= DUPLICATE_SIMILARITY for old, _ in self.entries)

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for tokens, meta in self.entries:
                fh.write(json.dumps({"tokens": list(tokens), **meta}, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CrashArchive":
        archive = cls()
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    tokens = tuple(row.pop("tokens"))
                    archive.entries.append((tokens, row))
        return archive


def dedup_crash(tokens: Sequence[str], history: CrashArchive, meta: dict | None = None) -> bool:
    """True if an archived log has cosine similarity 1 with ``tokens``;
    otherwise archive ``tokens`` and return False."""
    tokens = tuple(tokens)
    if history.is_duplicate(tokens):
        return True
    history.entries.append((tokens, dict(meta or {})))
    return False


def _has_nan(outputs: Sequence[np.ndarray]) -> bool:
    return any(np.isnan(o).any() for o in outputs)


def detect(ref: ExecutionTrace, deg: ExecutionTrace, history: CrashArchive | None = None,
           meta: dict | None = None) -> Verdict:
    """Classify one differential run.

    Precedence: invalid reference, crash/timeout, NaN, heavy inconsistency
    (MAE strictly above 0.15), pass.
    """
    if not ref.ok or not all(np.isfinite(o).all() for o in ref.outputs):
        return Verdict(INVALID)
    if not deg.ok:
        tokens = normalize_log(deg.log)
        dup = dedup_crash(tokens, history if history is not None else CrashArchive(), meta)
        return Verdict(CRASH, normalized_log=tokens, duplicate=dup)
    if _has_nan(deg.outputs):
        return Verdict(NAN)
    x = np.concatenate([o.ravel() for o in ref.outputs])
    y = np.concatenate([o.ravel() for o in deg.outputs])
    err = mae(x, y)
    return Verdict(HEAVY if err > HEAVY_INCONSISTENCY_MAE else PASS, mae=err)
