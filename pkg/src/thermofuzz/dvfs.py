"""Temperature-driven DVFS governor.

Below the nominal temperature the clock is boosted linearly up to
``(1 + gamma) f_base`` at ``t_min``; at or above it the clock is throttled
linearly down to ``(1 - alpha) f_base`` at ``t_max``.
"""

from __future__ import annotations

from .thermal import GpuProfile

__all__ = ["frequency", "frequency_ratio"]


def frequency_ratio(profile: GpuProfile, temperature: float) -> float:
    """f(T) / f_base, with T clamped to [t_min, t_max]."""
    temp = min(max(temperature, profile.t_min), profile.t_max)
    if temp < profile.t_nominal:
        return 1.0 + profile.gamma * (profile.t_nominal - temp) / (profile.t_nominal - profile.t_min)
    return 1.0 - profile.alpha * (temp - profile.t_nominal) / (profile.t_max - profile.t_nominal)


def frequency(profile: GpuProfile, temperature: float) -> float:
    """GPU clock in MHz at ``temperature``."""
    return profile.f_base * frequency_ratio(profile, temperature)
