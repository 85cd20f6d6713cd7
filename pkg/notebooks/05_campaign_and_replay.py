# %% [markdown]
# # A small campaign, its report, and replaying a case
#
# The command-line equivalent is
# `thermofuzz run --config cfg.json`, `thermofuzz replay --case s1-i00010 --out DIR`
# and `thermofuzz report --out DIR`.

# %%
import json
import tempfile
from pathlib import Path

from thermofuzz.campaign import CampaignConfig, replay, run_campaign

out = Path(tempfile.mkdtemp()) / "campaign"
config = CampaignConfig(out_dir=str(out), iterations_per_scenario=60, master_seed=1)
report = run_campaign(config)
for row in report["scenarios"]:
    print(f"{row['id']} {row['name']:14s} fault verdicts={row['fault_verdicts']:3d} no_site={row['no_site']}")
print(json.dumps(report["totals"], indent=1))
print(json.dumps(report["coverage"], indent=1))

# %% [markdown]
# Rule contributions drive the scheduler.

# %%
print(report["contribution"])

# %% [markdown]
# Replay the first bug-triggering case from its logged seeds.

# %%
events = [json.loads(line) for line in (out / "events.jsonl").read_text().splitlines()]
bug = next(ev for ev in events if ev.get("verdict") in ("crash", "nan", "heavy_inconsistency"))
result = replay(bug["case"], out)
print(bug["case"], bug["verdict"], "->", result.verdict.kind, result.checksum_ok, result.matches_log)
