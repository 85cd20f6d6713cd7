import json
import pytest

from thermofuzz.campaign import (
    CampaignConfig,
    build_report,
    load_config,
    replay,
    rerender_report,
    run_campaign,
)
from thermofuzz.cli import main
from thermofuzz.oracle import CrashArchive


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    config = CampaignConfig(out_dir=str(out), scenarios=(1, 3, 4), iterations_per_scenario=40, master_seed=3)
    report = run_campaign(config)
    return config, report, out


def _events(out):
    return [json.loads(line) for line in (out / "events.jsonl").read_text().splitlines()]


@pytest.mark.parametrize("bad", [dict(iterations_per_scenario=0), dict(scenarios=(7,)), dict(scenarios=()),
                                 dict(rules=(0,)), dict(tick=0.0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        CampaignConfig(**bad)


def test_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"out_dir": "o", "iterations_per_scenario": 3, "scenarios": [2]}))
    cfg = load_config(path)
    assert cfg.out_dir == str(tmp_path / "o")
    assert cfg.scenarios == (2,)
    path.write_text(json.dumps({"iterations": 3}))
    with pytest.raises(ValueError):
        load_config(path)


def test_output_dir_env_override(monkeypatch, tmp_path):
    monkeypatch.setenv("THERMOFUZZ_OUT", str(tmp_path / "env"))
    assert CampaignConfig(out_dir="ignored").output_dir == tmp_path / "env"


def test_outputs_written(small_run):
    _, report, out = small_run
    for name in ("report.json", "campaign.json", "events.jsonl", "traces.jsonl", "crashes.jsonl", "pool/index.json"):
        assert (out / name).exists(), name
    assert json.loads((out / "report.json").read_text()) == report
    assert [row["id"] for row in report["scenarios"]] == [1, 3, 4]
    assert sum(row["iterations"] for row in report["scenarios"]) == 120


def test_event_log_order_and_ids(small_run):
    _, _, out = small_run
    events = _events(out)
    assert [ev["order"] for ev in events] == list(range(len(events)))
    assert events[0]["case"] == "s1-i00000"
    assert [ev["t_start"] for ev in events[:3]] == [0.0, 1.0, 2.0]


def test_unique_bug_accounting(small_run):
    _, report, out = small_run
    events = _events(out)
    crashes = CrashArchive.load(out / "crashes.jsonl")
    nan_models = {ev["model_hash"] for ev in events if ev.get("verdict") == "nan"}
    heavy_models = {ev["model_hash"] for ev in events if ev.get("verdict") == "heavy_inconsistency"}
    assert report["totals"]["unique_bugs"] == len(crashes) + len(nan_models) + len(heavy_models)


def test_rerender_matches(small_run):
    _, report, out = small_run
    before = (out / "report.json").read_bytes()
    assert rerender_report(out) == report
    assert (out / "report.json").read_bytes() == before


def test_replay_every_case(small_run):
    _, _, out = small_run
    for ev in _events(out):
        if ev["status"] == "no_site":
            continue
        result = replay(ev["case"], out)
        assert result.checksum_ok and result.matches_log, (ev["case"], result.notes)
        ref, deg, verdict = result
        assert verdict.kind == ev["verdict"]
        assert float(verdict.mae).hex() == ev["mae_hex"]


def test_replay_unknown_case(small_run):
    with pytest.raises(KeyError):
        replay("s9-i99999", small_run[2])


def test_replay_flags_tampering(small_run, tmp_path):
    import shutil

    _, _, out = small_run
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    events = _events(copy)
    target = next(ev for ev in events if ev["status"] == "ok")
    target["seeds"]["mutate"] += 1
    (copy / "events.jsonl").write_text("".join(json.dumps(ev, sort_keys=True) + "\n" for ev in events))
    result = replay(target["case"], copy)
    assert not result.checksum_ok
    assert "metadata checksum mismatch" in result.notes


def test_rule_liveness_in_500_iterations(monkeypatch):
    from thermofuzz import campaign

    captured = []
    original = campaign.build_report

    def spy(events, cfg, scenarios=None):
        captured.extend(events)
        return original(events, cfg, scenarios)

    monkeypatch.setattr(campaign, "build_report", spy)
    run_campaign(CampaignConfig(scenarios=(2,), iterations_per_scenario=500, master_seed=4), write=False)
    assert len(captured) == 500
    assert {ev["rule"] for ev in captured} == set(range(1, 9))


def test_build_report_on_empty_log():
    report = build_report([], CampaignConfig(scenarios=(1,)))
    assert report["totals"]["unique_bugs"] == 0
    assert report["coverage"]["temperature_sensitive"] == 0.0


def test_cli_round_trip(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"out_dir": "out", "scenarios": [3], "iterations_per_scenario": 15, "master_seed": 2}))
    assert main(["run", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    assert (out / "report.json").exists()
    case = next(ev["case"] for ev in _events(out) if ev["status"] == "ok")
    assert main(["replay", "--case", case, "--out", str(out)]) == 0
    assert '"matches_log": true' in capsys.readouterr().out
    assert main(["report", "--out", str(out)]) == 0
    assert main(["replay", "--case", "nope", "--out", str(out)]) == 2


def test_cli_rejects_bad_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"iterations_per_scenario": 0}))
    assert main(["run", "--config", str(cfg)]) == 2
    assert not (tmp_path / "campaign-out").exists()
