"""Acceptance suite: one test per headline criterion.

Each test prints a PASS/FAIL line with the measured quantity, then asserts.
Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see the lines
interleaved with pytest's own output).
"""

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chisquare

from thermofuzz.campaign import CampaignConfig, run_campaign
from thermofuzz.dvfs import frequency
from thermofuzz.executors import FaultConfig, run_degraded, run_reference
from thermofuzz.graph import validate
from thermofuzz.mutation import NoEligibleSite, apply_rule
from thermofuzz.oracle import CrashArchive, cosine_similarity, dedup_crash, detect, mae
from thermofuzz.scheduler import RuleStats, rule_probabilities, select_rule, update_contribution
from thermofuzz.starters import starter_graphs
from thermofuzz.tensors import gen_inputs
from thermofuzz.thermal import (
    ThermalState,
    constant_scenario,
    default_profile,
    standard_scenarios,
    step,
    temperature_at,
)

PROFILE = default_profile()
STARTERS = list(starter_graphs().values())


def check(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_thermal_closed_form_vs_euler(capsys):
    start = time.perf_counter()
    dt, steps_per_second = 0.01, 100
    worst = 0.0
    for sc in standard_scenarios(PROFILE):
        temp = sc.t_initial
        for second in range(1, 601):
            for _ in range(steps_per_second):
                temp += -PROFILE.k * (temp - sc.t_env) * dt
            worst = max(worst, abs(temp - temperature_at(PROFILE, sc, float(second))))
    elapsed = time.perf_counter() - start
    check(capsys, "thermal closed form vs Euler", worst < 0.5 and elapsed < 5.0,
          f"max |error| {worst:.4f} C (tol 0.5), runtime {elapsed:.2f} s (limit 5)")


def test_thermal_semigroup(capsys):
    rng = np.random.default_rng(2024)
    scenarios = standard_scenarios(PROFILE)
    worst = 0.0
    for _ in range(1000):
        sc = scenarios[rng.integers(len(scenarios))]
        t1, t2 = rng.uniform(1e-3, 600.0, 2)
        mid = step(ThermalState(0.0, sc.t_initial), sc, PROFILE, t1)
        end = step(mid, sc, PROFILE, t2)
        direct = temperature_at(PROFILE, sc, t1 + t2)
        worst = max(worst, abs(end.temperature - direct) / max(abs(direct), 1e-300))
    check(capsys, "thermal semigroup", worst <= 1e-9, f"max relative gap {worst:.3e} over 1000 splits (tol 1e-9)")


def test_dvfs_boundary_exactness(capsys):
    fb = PROFILE.f_base
    exact = (
        frequency(PROFILE, PROFILE.t_nominal) == fb
        and frequency(PROFILE, PROFILE.t_max) == 0.85 * fb
        and frequency(PROFILE, PROFILE.t_min) == 1.05 * fb
    )
    sweep = np.linspace(PROFILE.t_min, PROFILE.t_max, 10_000)
    freqs = np.array([frequency(PROFILE, t) for t in sweep])
    monotone = bool(np.all(np.diff(freqs) <= 0))
    check(capsys, "DVFS boundary exactness", exact and monotone,
          f"endpoints exact={exact}, non-increasing over 10000 points={monotone}")


def test_mutation_validity(capsys):
    rng = np.random.default_rng(7)
    invalid = applied = skipped = 0
    topo_changed = precision_cases = 0
    rule1_bad = rule1_cases = 0
    while applied < 10_000:
        g = STARTERS[rng.integers(len(STARTERS))]
        rule = int(rng.integers(1, 9))
        try:
            m = apply_rule(g, rule, int(rng.integers(2**63)))
        except NoEligibleSite:
            skipped += 1
            continue
        applied += 1
        invalid += bool(validate(m))
        if rule in (3, 4):
            precision_cases += 1
            same = (sorted((e.id, e.srcs, e.dst) for e in m.edges.values())
                    == sorted((e.id, e.srcs, e.dst) for e in g.edges.values())) and m.vertices == g.vertices
            topo_changed += not same
        if rule == 1:
            rule1_cases += 1
            rule1_bad += m.count("gemm_conv") != g.count("gemm_conv") + 1
    ok = invalid == 0 and topo_changed == 0 and rule1_bad == 0 and rule1_cases > 0 and precision_cases > 0
    check(capsys, "mutation validity", ok,
          f"{invalid} invalid of {applied} applied ({skipped} draws had no site); rules 3/4 topology changes {topo_changed}/{precision_cases}; "
          f"rule 1 miscounts {rule1_bad}/{rule1_cases}")


def test_heuristic_correctness(capsys):
    stats = RuleStats((3.0, 0.0, -1.0, 0.5, 0.0, 2.0, 0.0, 0.02))
    n = 100_000
    counts = np.bincount([select_rule(stats, s) - 1 for s in range(n)], minlength=8)
    w = np.maximum(np.array(stats.contribution), 0.0) + 0.01
    expected = w / w.sum()
    assert np.allclose(rule_probabilities(stats), expected, rtol=0, atol=1e-15)
    # low-probability rules are merged so every expected count is at least 5
    big = expected * n >= 5
    obs = np.append(counts[big], counts[~big].sum())
    exp = np.append(expected[big] * n, expected[~big].sum() * n)
    if exp[-1] == 0:
        obs, exp = obs[:-1], exp[:-1]
    p_value = chisquare(obs, exp).pvalue

    pyrng = random.Random(11)
    mismatches = 0
    for _ in range(100):
        contrib = tuple(pyrng.uniform(-10, 10) for _ in range(8))
        rule = pyrng.randint(1, 8)
        new, old = pyrng.uniform(0, 5), pyrng.uniform(0, 5)
        out = update_contribution(RuleStats(contrib), rule, new, old)
        hand = list(contrib)
        hand[rule - 1] = hand[rule - 1] + (new - old)
        mismatches += out.contribution != tuple(hand)
    check(capsys, "heuristic correctness", p_value > 0.01 and mismatches == 0,
          f"chi-square p={p_value:.4f} (must exceed 0.01); update mismatches {mismatches}/100")


def _brute_mae(x, y):
    diffs = [abs(a - b) for a, b in zip(x.ravel().tolist(), y.ravel().tolist())]
    return float(sum(map(Fraction, diffs), Fraction(0))) / len(diffs)


def test_oracle_correctness(capsys):
    rng = np.random.default_rng(99)
    mismatches = 0
    for _ in range(1000):
        shape = tuple(rng.integers(1, 6, size=rng.integers(1, 4)))
        x = rng.normal(0, rng.uniform(0.01, 100), shape)
        y = x + rng.normal(0, rng.uniform(0.001, 1), shape)
        mismatches += mae(x, y) != _brute_mae(x, y)

    from thermofuzz.executors import ExecutionTrace

    def ok(v):
        return ExecutionTrace("ok", [np.asarray(v, dtype=float)])

    at_threshold = detect(ok([0.0, 0.0]), ok([0.15, 0.15])).kind
    above = detect(ok([0.0, 0.0]), ok([0.15, np.nextafter(0.15, 1.0)])).kind
    strict = at_threshold == "pass" and above == "heavy_inconsistency"

    archive = CrashArchive()
    log = ("lstm:exec", "lstm:jitter_skip", "lstm:timeout")
    near = ("lstm:exec",) * 40 + ("lstm:timeout",)
    near2 = ("lstm:exec",) * 41 + ("lstm:timeout",)
    first, again = dedup_crash(log, archive), dedup_crash(log, archive)
    kept = cosine_similarity(near, near2) < 1 - 1e-9 and not dedup_crash(near, archive) \
        and not dedup_crash(near2, archive)
    dedup_ok = first is False and again is True and kept
    check(capsys, "oracle correctness", mismatches == 0 and strict and dedup_ok,
          f"mae mismatches {mismatches}/1000; MAE=0.15 -> {at_threshold}, just above -> {above}; dedup ok={dedup_ok}")


def test_nominal_equivalence(capsys):
    rng = np.random.default_rng(5)
    nominal = constant_scenario(PROFILE.t_nominal)
    mutants = []
    while len(mutants) < 200:
        g = STARTERS[rng.integers(len(STARTERS))]
        for _ in range(int(rng.integers(1, 6))):
            try:
                g = apply_rule(g, int(rng.integers(1, 9)), int(rng.integers(2**63)))
            except NoEligibleSite:
                pass
        mutants.append(g)
    differ = 0
    for i, g in enumerate(mutants):
        x = gen_inputs(g, i)
        ref = run_reference(g, x)
        deg = run_degraded(g, x, nominal, PROFILE, FaultConfig(), i, t_start=float(rng.uniform(0, 500)))
        same = ref.ok and deg.ok and ref.outputs[0].tobytes() == deg.outputs[0].tobytes()
        differ += not same
    check(capsys, "nominal equivalence", differ == 0, f"{differ}/200 mutants differ from the reference")


@pytest.fixture(scope="module")
def trend_reports():
    start = time.perf_counter()
    reports = [run_campaign(CampaignConfig(master_seed=s), write=False) for s in range(1, 11)]
    return reports, time.perf_counter() - start


def test_scenario_trend(capsys, trend_reports):
    reports, elapsed = trend_reports
    counts = np.array([[row["fault_verdicts"] for row in r["scenarios"]] for r in reports], dtype=float)
    wide = counts[:, [0, 3]].mean()
    narrow = counts[:, [1, 2, 4, 5]].mean()
    per = ", ".join(f"s{i + 1}={m:.1f}" for i, m in enumerate(counts.mean(axis=0)))
    check(capsys, "scenario trend", wide > narrow and elapsed < 600,
          f"mean fault verdicts {{1,4}}={wide:.1f} vs {{2,3,5,6}}={narrow:.1f} ({per}); "
          f"10 campaigns in {elapsed:.0f} s (limit 600)")


def test_coverage_and_ablation(capsys, trend_reports):
    reports, _ = trend_reports
    full = [r["coverage"]["temperature_sensitive"] for r in reports]
    ablation = run_campaign(CampaignConfig(master_seed=1, rules=(8,)), write=False)
    ablated = ablation["coverage"]["temperature_sensitive"]
    check(capsys, "coverage and rule ablation", min(full) == 1.0 and ablated < 0.5,
          f"sensitive coverage over 10 default campaigns min={min(full):.0%}; "
          f"rule 8 only {ablated:.0%} (must be < 50%)")


def test_determinism(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_campaign(CampaignConfig(out_dir=str(a), master_seed=123))
    run_campaign(CampaignConfig(out_dir=str(b), master_seed=123))
    same = (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    check(capsys, "determinism", same, f"report.json byte-identical across two runs: {same}")
