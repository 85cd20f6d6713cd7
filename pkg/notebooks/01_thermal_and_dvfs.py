# %% [markdown]
# # Heating, cooling and clock speed
#
# The simulated GPU follows Newton's law of cooling toward an ambient
# temperature, and its clock is scaled by a piecewise-linear DVFS curve.

# %%
import numpy as np

from thermofuzz.dvfs import frequency, frequency_ratio
from thermofuzz.thermal import ThermalState, default_profile, standard_scenarios, step, temperature_at

profile = default_profile()
profile

# %% [markdown]
# Six standard scenarios pair a starting temperature with an ambient one.

# %%
for sc in standard_scenarios(profile):
    print(f"{sc.id}: {sc.name:14s} {sc.t_initial:6.1f} -> {sc.t_env:6.1f} C")

# %% [markdown]
# Temperature and clock after a few minutes in the cold-to-hot scenario.

# %%
cold_to_hot = standard_scenarios(profile)[0]
for t in (0, 30, 60, 120, 300, 500):
    temp = temperature_at(profile, cold_to_hot, t)
    print(f"t={t:4d}s  T={temp:7.2f} C  f={frequency(profile, temp):7.1f} MHz  r={frequency_ratio(profile, temp):.4f}")

# %% [markdown]
# Stepping the state agrees with the closed form, whatever the step size.

# %%
state = ThermalState(0.0, cold_to_hot.t_initial)
for dt in np.full(40, 2.5):
    state = step(state, cold_to_hot, profile, dt)
print(state.temperature, temperature_at(profile, cold_to_hot, 100.0))

# %% [markdown]
# The DVFS curve boosts by up to 5% when cold and throttles by up to 15% when hot.

# %%
for temp in np.linspace(profile.t_min, profile.t_max, 7):
    print(f"{temp:6.1f} C  ratio {frequency_ratio(profile, temp):.4f}")
