"""Fuzzing campaign loop, event log, report and replay.

Each iteration selects a seed and a rule, mutates, generates inputs, runs
both executors with the GPU at the scenario temperature reached after
``iteration * tick`` simulated seconds, classifies the difference and
updates the heuristics. All randomness comes from
``(master_seed, scenario_id, iteration)``.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import derive_seeds
from .executors import ExecutionTrace, FaultConfig, fault_event_count, load_fault_config, run_degraded, run_reference
from .graph import UNIVERSE, ModelGraph, coverage, graph_categories, load_graph, SENSITIVE_CATEGORIES
from .mutation import MAX_EDGES, NoEligibleSite, apply_rule
from .oracle import CrashArchive, Verdict, detect
from .scheduler import (
    INITIAL_PERFORMANCE,
    RuleStats,
    SeedRecord,
    load_pool,
    maybe_admit,
    performance_of,
    save_pool,
    select_rule,
    select_seed,
    update_contribution,
)
from .starters import starter_graphs
from .tensors import gen_inputs
from .thermal import GpuProfile, ThermalScenario, default_profile, load_profile, standard_scenarios

__all__ = [
    "CampaignConfig",
    "ReplayResult",
    "build_report",
    "load_config",
    "replay",
    "rerender_report",
    "run_campaign",
]

OUT_DIR_ENV = "THERMOFUZZ_OUT"
SEED_STREAMS = ("select_seed", "select_rule", "mutate", "inputs", "degraded")
# performance is capped so that overflowing outputs stay finite in the pool
PERFORMANCE_CAP = 1e6


@dataclass(frozen=True)
class CampaignConfig:
    out_dir: str = "campaign-out"
    profile: str | None = None  # path; None means the bundled RTX 4090D profile
    faults: str | None = None  # path; None means the default fault model
    scenarios: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    iterations_per_scenario: int = 500
    master_seed: int = 0
    seed_pool: str | None = None  # directory; None means the bundled starters
    rules: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    tick: float = 1.0
    max_edges: int = MAX_EDGES

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenarios", tuple(int(s) for s in self.scenarios))
        object.__setattr__(self, "rules", tuple(int(r) for r in self.rules))
        if self.iterations_per_scenario < 1:
            raise ValueError("iterations_per_scenario must be >= 1")
        if not self.scenarios or any(s not in range(1, 7) for s in self.scenarios):
            raise ValueError(f"scenarios must be a nonempty subset of 1..6, got {self.scenarios}")
        if not self.rules or any(r not in range(1, 9) for r in self.rules):
            raise ValueError(f"rules must be a nonempty subset of 1..8, got {self.rules}")
        if not self.tick > 0:
            raise ValueError("tick must be > 0")

    @property
    def output_dir(self) -> Path:
        return Path(os.environ.get(OUT_DIR_ENV) or self.out_dir)

    @classmethod
    def from_json(cls, d: dict, base: Path | None = None) -> "CampaignConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if base is not None:
            for key in ("profile", "faults", "seed_pool", "out_dir"):
                if d.get(key) is not None and not Path(d[key]).is_absolute():
                    d[key] = str(base / d[key])
        return cls(**d)


def load_config(path: str | Path) -> CampaignConfig:
    path = Path(path)
    with open(path) as fh:
        return CampaignConfig.from_json(json.load(fh), base=path.parent)


def _load_inputs(config: CampaignConfig) -> tuple[GpuProfile, FaultConfig, list[SeedRecord]]:
    profile = load_profile(config.profile) if config.profile else default_profile()
    faults = load_fault_config(config.faults) if config.faults else FaultConfig()
    if config.seed_pool:
        pool = load_pool(config.seed_pool)
    else:
        pool = [SeedRecord(g, INITIAL_PERFORMANCE) for g in starter_graphs().values()]
    if not pool:
        raise ValueError("seed pool is empty")
    return profile, faults, pool


def case_seeds(master_seed: int, scenario: int, iteration: int) -> dict[str, int]:
    return dict(zip(SEED_STREAMS, derive_seeds(master_seed, scenario, iteration, n=len(SEED_STREAMS))))


def _checksum(record: dict) -> str:
    keys = ("scenario", "iteration", "t_start", "seed_id", "rule", "seeds")
    blob = json.dumps({k: record[k] for k in keys}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class _Case:
    mutant: ModelGraph
    inputs: list[np.ndarray]
    ref: ExecutionTrace
    deg: ExecutionTrace


def _execute(seed_model: ModelGraph, rule: int, seeds: dict[str, int], scenario: ThermalScenario,
             t_start: float, profile: GpuProfile, faults: FaultConfig, max_edges: int) -> _Case:
    mutant = apply_rule(seed_model, rule, seeds["mutate"], max_edges)
    inputs = gen_inputs(mutant, seeds["inputs"])
    ref = run_reference(mutant, inputs)
    deg = run_degraded(mutant, inputs, scenario, profile, faults, seeds["degraded"], t_start=t_start)
    return _Case(mutant, inputs, ref, deg)


def run_campaign(config: CampaignConfig, write: bool = True) -> dict:
    """Run every configured scenario in order and return the report.

    With ``write`` the report, event log, crash archive, bug traces and the
    final seed pool are written to the output directory.
    """
    profile, faults, pool = _load_inputs(config)
    scenarios = {s.id: s for s in standard_scenarios(profile)}
    stats = RuleStats()
    archive = CrashArchive()
    events: list[dict] = []
    bug_traces: list[dict] = []

    for sid in config.scenarios:
        scenario = scenarios[sid]
        local_archive = CrashArchive()
        for it in range(config.iterations_per_scenario):
            case_id = f"s{sid}-i{it:05d}"
            seeds = case_seeds(config.master_seed, sid, it)
            t_start = it * config.tick
            seed_rec = select_seed(pool, seeds["select_seed"])
            rule = select_rule(stats, seeds["select_rule"], config.rules)
            record = {
                "case": case_id, "order": len(events), "scenario": sid, "iteration": it,
                "t_start": t_start, "seed_id": seed_rec.id, "rule": rule, "seeds": seeds,
            }
            record["checksum"] = _checksum(record)
            try:
                case = _execute(seed_rec.model, rule, seeds, scenario, t_start, profile, faults, config.max_edges)
            except NoEligibleSite:
                record["status"] = "no_site"
                record["contribution"] = list(stats.contribution)
                events.append(record)
                continue

            meta = {"case": case_id, "order": record["order"]}
            verdict = detect(case.ref, case.deg, archive, meta)
            local_dup = False
            if verdict.kind == "crash":
                local_dup = local_archive.is_duplicate(verdict.normalized_log)
                if not local_dup:
                    local_archive.entries.append((verdict.normalized_log, meta))
            record.update({
                "status": "invalid" if verdict.kind == "invalid" else "ok",
                "model_hash": case.mutant.content_hash(),
                "categories": sorted(graph_categories(case.mutant)),
                "edges": len(case.mutant.edges),
                "verdict": verdict.kind,
                "mae": verdict.mae,
                "mae_hex": float(verdict.mae).hex(),
                "duplicate": verdict.duplicate,
                "scenario_duplicate": local_dup,
                "deg_status": case.deg.status,
                "fault_events": fault_event_count(case.deg),
            })
            if verdict.kind != "invalid":
                perf = min(performance_of(verdict.kind, case.inputs, verdict.mae), PERFORMANCE_CAP)
                stats = update_contribution(stats, rule, perf, seed_rec.performance)
                pool = maybe_admit(pool, case.mutant, verdict.kind, perf, verdict.duplicate)
                record["performance"] = perf
                record["seed_performance"] = seed_rec.performance
            record["contribution"] = list(stats.contribution)
            record["pool_size"] = len(pool)
            events.append(record)
            if verdict.is_bug:
                bug_traces.extend({"case": case_id, **line} for line in case.deg.log)

    report = build_report(events, config, scenarios)
    if write:
        out = config.output_dir
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "report.json", report)
        _write_json(out / "campaign.json", {
            "config": _config_json(config),
            "profile": profile.to_json(),
            "faults": faults.to_json(),
        })
        with open(out / "events.jsonl", "w") as fh:
            for rec in events:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        with open(out / "traces.jsonl", "w") as fh:
            for line in bug_traces:
                fh.write(json.dumps(line, sort_keys=True) + "\n")
        archive.save(out / "crashes.jsonl")
        save_pool(pool, out / "pool")
    return report


def _config_json(config: CampaignConfig) -> dict:
    d = asdict(config)
    d["scenarios"] = list(config.scenarios)
    d["rules"] = list(config.rules)
    return d


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_report(events: Sequence[dict], config: CampaignConfig,
                 scenarios: dict[int, ThermalScenario] | None = None) -> dict:
    """Aggregate an event log into per-scenario and campaign-wide counts."""
    if scenarios is None:
        scenarios = {s.id: s for s in standard_scenarios(default_profile())}
    per: dict[int, dict] = {}
    nan_models: set[str] = set()
    heavy_models: set[str] = set()
    unique_crashes = 0
    corpus: list[set[str]] = []
    for sid in config.scenarios:
        per[sid] = {
            "id": sid, "name": scenarios[sid].name,
            "t_initial": scenarios[sid].t_initial, "t_env": scenarios[sid].t_env,
            "iterations": 0, "no_site": 0, "invalid": 0,
            "crashes": 0, "nans": 0, "heavy_inconsistencies": 0, "fault_verdicts": 0,
            "_nan": set(), "_heavy": set(),
        }
    for ev in events:
        row = per[ev["scenario"]]
        row["iterations"] += 1
        if ev["status"] == "no_site":
            row["no_site"] += 1
            continue
        corpus.append(set(ev["categories"]))
        if ev["status"] == "invalid":
            row["invalid"] += 1
            continue
        kind = ev["verdict"]
        if kind in ("crash", "nan", "heavy_inconsistency"):
            row["fault_verdicts"] += 1
        if kind == "crash":
            row["crashes"] += not ev["scenario_duplicate"]
            unique_crashes += not ev["duplicate"]
        elif kind == "nan":
            row["_nan"].add(ev["model_hash"])
            nan_models.add(ev["model_hash"])
        elif kind == "heavy_inconsistency":
            row["_heavy"].add(ev["model_hash"])
            heavy_models.add(ev["model_hash"])
    rows = []
    for sid in config.scenarios:
        row = per[sid]
        row["nans"] = len(row.pop("_nan"))
        row["heavy_inconsistencies"] = len(row.pop("_heavy"))
        rows.append(row)
    op_cov, sens_cov = coverage(corpus, UNIVERSE)
    covered = set().union(*corpus) if corpus else set()
    last = events[-1]["contribution"] if events else [0.0] * 8
    pool_size = max((ev.get("pool_size", 0) for ev in events), default=0)
    return {
        "config": {
            "master_seed": config.master_seed,
            "iterations_per_scenario": config.iterations_per_scenario,
            "scenarios": list(config.scenarios),
            "rules": list(config.rules),
            "tick": config.tick,
        },
        "scenarios": rows,
        "totals": {
            "crashes": unique_crashes,
            "nans": len(nan_models),
            "heavy_inconsistencies": len(heavy_models),
            "unique_bugs": unique_crashes + len(nan_models) + len(heavy_models),
            "fault_verdicts": sum(r["fault_verdicts"] for r in rows),
        },
        "coverage": {
            "operator": op_cov,
            "temperature_sensitive": sens_cov,
            "covered": sorted(covered & set(UNIVERSE)),
            "missing_sensitive": sorted(set(SENSITIVE_CATEGORIES) - covered),
        },
        "contribution": {str(i + 1): c for i, c in enumerate(last)},
        "final_pool_size": pool_size,
    }


def _read_events(out: Path) -> list[dict]:
    with open(out / "events.jsonl") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _read_campaign(out: Path) -> tuple[CampaignConfig, GpuProfile, FaultConfig]:
    with open(out / "campaign.json") as fh:
        doc = json.load(fh)
    return (
        CampaignConfig(**doc["config"]),
        GpuProfile.from_json(doc["profile"]),
        FaultConfig.from_json(doc["faults"]),
    )


def rerender_report(out_dir: str | Path) -> dict:
    """Rebuild ``report.json`` from the event log in ``out_dir``."""
    out = Path(out_dir)
    config, profile, _ = _read_campaign(out)
    report = build_report(_read_events(out), config, {s.id: s for s in standard_scenarios(profile)})
    _write_json(out / "report.json", report)
    return report


@dataclass
class ReplayResult:
    ref: ExecutionTrace
    deg: ExecutionTrace
    verdict: Verdict
    checksum_ok: bool
    matches_log: bool
    notes: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter((self.ref, self.deg, self.verdict))


def replay(case_id: str, out_dir: str | Path) -> ReplayResult:
    """Re-run one logged case from its recorded seeds.

    Iterating the result yields ``(ref, deg, verdict)``.
    """
    out = Path(out_dir)
    events = _read_events(out)
    try:
        record = next(ev for ev in events if ev["case"] == case_id)
    except StopIteration:
        raise KeyError(f"unknown case id {case_id!r}") from None
    config, profile, faults = _read_campaign(out)
    notes = []
    checksum_ok = _checksum(record) == record["checksum"]
    if record["seeds"] != case_seeds(config.master_seed, record["scenario"], record["iteration"]):
        checksum_ok = False
        notes.append("logged seeds differ from the seeds derived from the master seed")
    if not checksum_ok:
        notes.append("metadata checksum mismatch")
    if record["status"] == "no_site":
        raise ValueError(f"case {case_id} had no eligible mutation site; nothing to replay")

    seed_model = load_graph(out / "pool" / f"{record['seed_id']}.json")
    scenario = {s.id: s for s in standard_scenarios(profile)}[record["scenario"]]
    case = _execute(seed_model, record["rule"], record["seeds"], scenario, record["t_start"],
                    profile, faults, config.max_edges)
    archive = CrashArchive()
    if (out / "crashes.jsonl").exists():
        full = CrashArchive.load(out / "crashes.jsonl")
        archive.entries = [e for e in full.entries if e[1].get("order", -1) < record["order"]]
    verdict = detect(case.ref, case.deg, archive, {"case": case_id, "order": record["order"]})
    matches = (
        verdict.kind == record.get("verdict")
        and float(verdict.mae).hex() == record.get("mae_hex")
        and verdict.duplicate == record.get("duplicate")
        and case.mutant.content_hash() == record.get("model_hash")
    )
    if not matches:
        notes.append("replayed verdict differs from the logged one")
    return ReplayResult(case.ref, case.deg, verdict, checksum_ok, matches, notes)
