"""GPU temperature simulation with Newton's law of cooling.

The GPU relaxes exponentially toward the ambient temperature::

    T(t) = T_env + (T_initial - T_env) * exp(-k t)

Six standard scenarios pair the device's minimum, nominal and maximum
temperatures as (initial, ambient).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

__all__ = [
    "GpuProfile",
    "ThermalScenario",
    "ThermalState",
    "default_profile",
    "load_profile",
    "save_profile",
    "standard_scenarios",
    "step",
    "temperature_at",
]


@dataclass(frozen=True)
class GpuProfile:
    """Thermal and frequency constants of one GPU model.

    ``k`` is in 1/s, temperatures in degrees Celsius, ``f_base`` in MHz.
    """

    k: float
    t_min: float
    t_max: float
    t_nominal: float
    f_base: float
    alpha: float
    gamma: float

    def __post_init__(self) -> None:
        if not self.k > 0:
            raise ValueError(f"cooling coefficient must be > 0, got {self.k}")
        if not self.f_base > 0:
            raise ValueError(f"f_base must be > 0, got {self.f_base}")
        if not (self.t_min < self.t_nominal < self.t_max):
            raise ValueError(
                "expected t_min < t_nominal < t_max, got "
                f"{self.t_min}, {self.t_nominal}, {self.t_max}"
            )
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.gamma >= 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["f_base_mhz"] = d.pop("f_base")
        return {key: d[key] for key in ("k", "t_min", "t_max", "t_nominal", "f_base_mhz", "alpha", "gamma")}

    @classmethod
    def from_json(cls, d: dict) -> "GpuProfile":
        missing = {"k", "t_min", "t_max", "t_nominal", "f_base_mhz", "alpha", "gamma"} - set(d)
        if missing:
            raise ValueError(f"profile is missing keys: {sorted(missing)}")
        return cls(
            k=float(d["k"]),
            t_min=float(d["t_min"]),
            t_max=float(d["t_max"]),
            t_nominal=float(d["t_nominal"]),
            f_base=float(d["f_base_mhz"]),
            alpha=float(d["alpha"]),
            gamma=float(d["gamma"]),
        )


@dataclass(frozen=True)
class ThermalScenario:
    id: int
    t_initial: float
    t_env: float
    name: str = ""


@dataclass(frozen=True)
class ThermalState:
    t: float
    temperature: float


_SCENARIO_TABLE = (
    # (id, initial, ambient, name)
    (1, "t_min", "t_max", "Computing in Cold Environment with Heavy Workloads"),
    (2, "t_min", "t_nominal", "Computing in Cold Environment with Nominal Workloads"),
    (3, "t_nominal", "t_max", "Computing in Nominal Environment with Heavy Workloads"),
    (4, "t_max", "t_min", "Cooling in Cold Environment after Heavy Workloads"),
    (5, "t_nominal", "t_min", "Cooling in Cold Environment after Nominal Workloads"),
    (6, "t_max", "t_nominal", "Cooling in Nominal Environment after Heavy Workloads"),
)


def standard_scenarios(profile: GpuProfile) -> list[ThermalScenario]:
    """The six heating/cooling scenarios, ids 1..6 in order."""
    return [
        ThermalScenario(sid, getattr(profile, start), getattr(profile, env), name)
        for sid, start, env, name in _SCENARIO_TABLE
    ]


def constant_scenario(temperature: float, sid: int = 0) -> ThermalScenario:
    """A scenario that holds the GPU at one temperature forever."""
    return ThermalScenario(sid, temperature, temperature, f"constant {temperature:g} C")


def temperature_at(profile: GpuProfile, scenario: ThermalScenario, t: float) -> float:
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    delta = scenario.t_initial - scenario.t_env
    if delta == 0:
        return scenario.t_env
    return scenario.t_env + delta * math.exp(-profile.k * t)


def step(state: ThermalState, scenario: ThermalScenario, profile: GpuProfile, dt: float) -> ThermalState:
    """Advance ``state`` by ``dt`` seconds of simulated time."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    temp = scenario.t_env + (state.temperature - scenario.t_env) * math.exp(-profile.k * dt)
    return ThermalState(state.t + dt, temp)


def load_profile(path: str | Path) -> GpuProfile:
    with open(path) as fh:
        return GpuProfile.from_json(json.load(fh))


def save_profile(profile: GpuProfile, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(profile.to_json(), fh, indent=2)
        fh.write("\n")


def default_profile() -> GpuProfile:
    """The bundled RTX 4090D profile (``profiles/rtx4090d.json``)."""
    text = resources.files("thermofuzz").joinpath("profiles/rtx4090d.json").read_text()
    return GpuProfile.from_json(json.loads(text))
