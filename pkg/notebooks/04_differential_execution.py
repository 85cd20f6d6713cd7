# %% [markdown]
# # Reference versus degraded execution
#
# The reference interpreter runs at nominal clock. The degraded one runs at
# the clock implied by the scenario temperature and can time out, truncate
# fp32 mantissas, or drop recurrent steps.

# %%
import numpy as np

from thermofuzz.executors import FaultConfig, fault_event_count, run_degraded, run_reference
from thermofuzz.mutation import apply_rule
from thermofuzz.oracle import CrashArchive, detect
from thermofuzz.starters import starter_graphs
from thermofuzz.tensors import gen_inputs
from thermofuzz.thermal import constant_scenario, default_profile, standard_scenarios

profile = default_profile()
faults = FaultConfig()
g = apply_rule(starter_graphs()["sequence_rnn"], 6, rng_seed=3)  # add an LSTM
x = gen_inputs(g, 0)
ref = run_reference(g, x)

# %% [markdown]
# At nominal temperature the two executors agree bit for bit.

# %%
deg = run_degraded(g, x, constant_scenario(profile.t_nominal), profile, faults, rng_seed=1)
print(np.array_equal(ref.outputs[0], deg.outputs[0]), detect(ref, deg))

# %% [markdown]
# In the hot scenario late in the run, the GPU is throttled and faults appear.

# %%
hot = standard_scenarios(profile)[2]
archive = CrashArchive()
for t_start in (0, 20, 60, 200):
    deg = run_degraded(g, x, hot, profile, faults, rng_seed=1, t_start=t_start)
    verdict = detect(ref, deg, archive)
    print(f"t={t_start:3d}s r={deg.log[0]['r']:.3f} faults={fault_event_count(deg):2d} "
          f"verdict={verdict.kind} mae={verdict.mae:.3f}")

# %% [markdown]
# A tight timeout budget turns the same run into a crash verdict, and the
# second identical crash is marked duplicate.

# %%
tight = FaultConfig(timeout_budget=0.1)
for _ in range(2):
    deg = run_degraded(g, x, hot, profile, tight, rng_seed=1, t_start=200)
    print(detect(ref, deg, archive))
