"""Reference and thermally-degraded interpreters for model graphs.

Both executors share one set of numpy kernels, so a degraded run whose
clock never drops below nominal reproduces the reference bit for bit. The
degraded executor adds three deterministic fault paths driven by the
frequency ratio ``r = f(T) / f_base``:

* latency: every operator costs ``op_cost / r`` simulated seconds and the
  run times out once the total exceeds ``timeout_budget``;
* mantissa truncation: fp32 and mixed-precision results are rounded to
  ``floor(23 * r / r_crit)`` mantissa bits when ``r < r_crit`` (0 bits means NaN);
* clock jitter: recurrent steps skip their state update with probability
  ``jitter_gain * (r_jitter - r)`` when ``r < r_jitter``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._rng import counter_stream
from .dvfs import frequency_ratio
from .graph import Edge, ModelGraph, topo_order
from .thermal import GpuProfile, ThermalScenario, temperature_at

__all__ = [
    "ExecutionTrace",
    "FaultConfig",
    "fault_event_count",
    "load_fault_config",
    "round_mantissa",
    "run_degraded",
    "run_reference",
]

OK, CRASH, TIMEOUT = "ok", "crash", "timeout"
FP32_MANTISSA_BITS = 23


@dataclass(frozen=True)
class FaultConfig:
    """Fault-model knobs. ``op_cost`` maps ``heavy``/``light`` (or an
    operator family) to seconds of simulated time at nominal clock."""

    timeout_budget: float = 10.0
    r_crit: float = 0.95
    r_jitter: float = 0.92
    jitter_gain: float = 2.0
    op_cost: Mapping[str, float] = field(default_factory=lambda: {"heavy": 0.05, "light": 0.005})

    def __post_init__(self) -> None:
        if not 0 < self.r_crit <= 1:
            raise ValueError("r_crit must lie in (0, 1]")
        if not 0 < self.r_jitter <= 1:
            raise ValueError("r_jitter must lie in (0, 1]")
        if self.jitter_gain < 0:
            raise ValueError("jitter_gain must be >= 0")
        if self.timeout_budget <= 0:
            raise ValueError("timeout_budget must be > 0")
        if any(v <= 0 for v in self.op_cost.values()):
            raise ValueError("operator costs must be > 0")

    def cost(self, edge: Edge) -> float:
        fam = edge.kind.family
        if fam in self.op_cost:
            return self.op_cost[fam]
        heavy = fam in ("gemm_conv", "matmul") or edge.kind.is_recurrent
        return self.op_cost["heavy" if heavy else "light"]

    def to_json(self) -> dict:
        d = asdict(self)
        d["op_cost"] = dict(sorted(self.op_cost.items()))
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "FaultConfig":
        base = cls()
        return cls(
            timeout_budget=float(d.get("timeout_budget", base.timeout_budget)),
            r_crit=float(d.get("r_crit", base.r_crit)),
            r_jitter=float(d.get("r_jitter", base.r_jitter)),
            jitter_gain=float(d.get("jitter_gain", base.jitter_gain)),
            op_cost={**base.op_cost, **{k: float(v) for k, v in d.get("op_cost", {}).items()}},
        )


def load_fault_config(path: str | Path) -> FaultConfig:
    with open(path) as fh:
        return FaultConfig.from_json(json.load(fh))


@dataclass
class ExecutionTrace:
    status: str
    outputs: list[np.ndarray] = field(default_factory=list)
    sim_wall_time: float = 0.0
    log: list[dict] = field(default_factory=list)
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OK


# ---------------------------------------------------------------------------
# numerics


def round_mantissa(x: np.ndarray, bits: int) -> np.ndarray:
    """Round to ``bits`` fractional mantissa bits (round half to even)."""
    if bits <= 0:
        return np.full_like(x, np.nan)
    mant, exp = np.frexp(x)
    scale = float(2 ** (bits + 1))
    return np.ldexp(np.round(mant * scale) / scale, exp)


def _quantize(x: np.ndarray, precision: str) -> np.ndarray:
    if precision in ("int8", "mixed_int8_fp16"):
        peak = float(np.max(np.abs(x))) if x.size else 0.0
        if peak == 0.0 or not math.isfinite(peak):
            return x
        s = peak / 127.0
        return np.clip(np.round(x / s), -127, 127) * s
    if precision == "fp16":
        return x.astype(np.float16).astype(np.float64)
    return x.astype(np.float32).astype(np.float64)


def _store(y: np.ndarray, precision: str) -> np.ndarray:
    if precision in ("fp16", "mixed_int8_fp16"):
        return y.astype(np.float16).astype(np.float64)
    return y.astype(np.float32).astype(np.float64)


@lru_cache(maxsize=8192)
def _random_param(seed: int, index: int, shape: tuple[int, ...], scale: float) -> np.ndarray:
    w = counter_stream(seed, index).standard_normal(shape) * scale
    w.setflags(write=False)
    return w


def _param(edge: Edge, index: int, shape: tuple[int, ...], scale: float, override: str | None = None) -> np.ndarray:
    if override is not None and override in edge.params:
        w = np.asarray(edge.params[override], dtype=np.float64)
        if w.shape != shape:
            raise ValueError(f"edge {edge.id}: {override} has shape {w.shape}, expected {shape}")
        return w
    return _random_param(int(edge.weight_seed), index, shape, scale)


def _resample(x: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    flat = x.ravel()
    n = int(np.prod(shape))
    if flat.size == n:
        return flat.reshape(shape).copy()
    pos = np.linspace(0.0, flat.size - 1, n)
    return np.interp(pos, np.arange(flat.size), flat).reshape(shape)


def _conv(edge: Edge, x: np.ndarray) -> np.ndarray:
    kind, p = edge.kind, edge.params
    k = int(p["kernel"])
    c = x.shape[2]
    xq = _quantize(x, kind.precision)
    win = sliding_window_view(xq, (k, k), axis=(0, 1))  # (H', W', C, K, K)
    h2, w2 = win.shape[:2]
    if kind.variant == "standard":
        cout = int(p["out_channels"])
        w = _quantize(_param(edge, 0, (k, k, c, cout), 1.0 / math.sqrt(k * k * c), "weight"), kind.precision)
        cols = win.transpose(0, 1, 3, 4, 2).reshape(h2 * w2, k * k * c)
        y = (cols @ w.reshape(k * k * c, cout)).reshape(h2, w2, cout)
    else:
        dw = _quantize(_param(edge, 0, (k, k, c), 1.0 / k, "weight"), kind.precision)
        y = np.einsum("hwckl,klc->hwc", win, dw)
        if kind.variant == "separable":
            cout = int(p["out_channels"])
            pw = _quantize(_param(edge, 1, (c, cout), 1.0 / math.sqrt(c), "pointwise"), kind.precision)
            y = y @ pw
    return _store(y, kind.precision)


def _matmul(edge: Edge, xs: Sequence[np.ndarray]) -> np.ndarray:
    prec = edge.kind.precision
    a = _quantize(xs[0], prec)
    if len(xs) == 2:
        b = _quantize(xs[1], prec)
    else:
        kdim = a.shape[-1]
        b = _quantize(_param(edge, 0, (kdim, int(edge.params["units"])), 1.0 / math.sqrt(kdim), "weight"), prec)
    return _store(a @ b, prec)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _recurrent(edge: Edge, x: np.ndarray, skip: Callable[[int], bool] | None, events: list) -> np.ndarray:
    """RNN / LSTM / GRU over (time, batch, feature) with zero initial state.

    ``skip(counter)`` decides whether step ``counter`` loses its state update.
    """
    kind = edge.kind
    hid = int(edge.params["hidden"])
    gates = {"rnn": 1, "lstm": 4, "gru": 3}[kind.family]
    dirs = 2 if kind.bidirectional else 1
    layers = kind.layers if kind.family != "rnn" else 1
    steps = x.shape[0]
    seq = x
    for layer in range(layers):
        feat = seq.shape[2]
        outs = []
        for d in range(dirs):
            base = (layer * 2 + d) * 4
            w = _param(edge, base, (feat, gates * hid), 1.0 / math.sqrt(feat))
            u = _param(edge, base + 1, (hid, gates * hid), 1.0 / math.sqrt(hid))
            bi = _param(edge, base + 2, (gates * hid,), 0.1)
            bh = _param(edge, base + 3, (gates * hid,), 0.1)
            xw = seq @ w + bi  # (T, B, G*H), input projection for all steps
            h = np.zeros((seq.shape[1], hid))
            c = np.zeros_like(h)
            out = np.empty((steps, seq.shape[1], hid))
            order = range(steps - 1, -1, -1) if d == 1 else range(steps)
            for t in order:
                counter = (layer * 2 + d) * steps + t
                if skip is not None and skip(counter):
                    events.append(("jitter_skip", counter))
                    out[t] = h
                    continue
                hu = h @ u + bh
                g = xw[t]
                if gates == 1:
                    h = np.tanh(g + hu)
                elif gates == 4:
                    i = _sigmoid(g[:, :hid] + hu[:, :hid])
                    f = _sigmoid(g[:, hid:2 * hid] + hu[:, hid:2 * hid])
                    cand = np.tanh(g[:, 2 * hid:3 * hid] + hu[:, 2 * hid:3 * hid])
                    o = _sigmoid(g[:, 3 * hid:] + hu[:, 3 * hid:])
                    c = f * c + i * cand
                    h = o * np.tanh(c)
                else:
                    rgate = _sigmoid(g[:, :hid] + hu[:, :hid])
                    z = _sigmoid(g[:, hid:2 * hid] + hu[:, hid:2 * hid])
                    n = np.tanh(g[:, 2 * hid:] + rgate * hu[:, 2 * hid:])
                    h = (1.0 - z) * n + z * h
                out[t] = h
            outs.append(out)
        seq = outs[0] if dirs == 1 else np.concatenate(outs, axis=2)
    return seq


def _apply(edge: Edge, xs: list[np.ndarray], out_shape: tuple[int, ...],
           skip: Callable[[int], bool] | None, events: list) -> np.ndarray:
    kind = edge.kind
    fam = kind.family
    x = xs[0]
    if fam == "gemm_conv":
        return _conv(edge, x)
    if fam == "matmul":
        return _matmul(edge, xs)
    if kind.is_recurrent:
        return _recurrent(edge, x, skip, events)
    if fam == "dense":
        f, units = x.shape[-1], int(edge.params["units"])
        w = _param(edge, 0, (f, units), 1.0 / math.sqrt(f), "weight")
        b = _param(edge, 1, (units,), 0.05, "bias")
        return x @ w + b
    if fam == "elementwise":
        op = kind.variant
        if op == "relu":
            return np.maximum(x, 0.0)
        if len(xs) == 2:
            return x + xs[1] if op == "add" else x * xs[1]
        v = _param(edge, 0, (x.shape[-1],), 0.1)
        return x + v if op == "add" else x * (1.0 + v)
    if fam == "pool":
        h, w, c = x.shape
        blocks = x[: h // 2 * 2, : w // 2 * 2].reshape(h // 2, 2, w // 2, 2, c)
        return blocks.max(axis=(1, 3)) if kind.variant == "max" else blocks.mean(axis=(1, 3))
    if fam == "batch_norm":
        c = x.shape[-1]
        gamma = 1.0 + _param(edge, 0, (c,), 0.1)
        beta = _param(edge, 1, (c,), 0.1)
        mean = _param(edge, 2, (c,), 0.1)
        var = 1.0 + np.abs(_param(edge, 3, (c,), 0.2))
        return gamma * (x - mean) / np.sqrt(var + 1e-5) + beta
    if fam == "none":
        return x
    if fam == "reshape":
        return _resample(x, out_shape)
    raise ValueError(f"no kernel for {fam}")


# ---------------------------------------------------------------------------
# executors


def _bind_inputs(graph: ModelGraph, inputs: Sequence[np.ndarray]) -> dict[int, np.ndarray]:
    ids = sorted(graph.inputs)
    if len(ids) != len(inputs):
        raise ValueError(f"graph takes {len(ids)} inputs, got {len(inputs)}")
    values = {}
    for vid, arr in zip(ids, inputs):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != graph.vertices[vid].shape:
            raise ValueError(f"input {vid} has shape {arr.shape}, expected {graph.vertices[vid].shape}")
        values[vid] = arr
    return values


def run_reference(graph: ModelGraph, inputs: Sequence[np.ndarray]) -> ExecutionTrace:
    """Fault-free execution at nominal clock."""
    trace = ExecutionTrace(OK)
    nominal = FaultConfig()
    try:
        values = _bind_inputs(graph, inputs)
        with np.errstate(all="ignore"):
            for edge in topo_order(graph):
                values[edge.dst] = _apply(edge, [values[s] for s in edge.srcs],
                                          graph.vertices[edge.dst].shape, None, [])
                trace.sim_wall_time += nominal.cost(edge)
                trace.log.append({"op": edge.id, "kind": edge.kind.label, "event": "exec"})
        trace.outputs = [values[graph.output]]
    except Exception as exc:  # noqa: BLE001 - surfaced as a trace status
        return ExecutionTrace(CRASH, [], trace.sim_wall_time, trace.log, f"reference-internal: {exc!r}")
    return trace


def run_degraded(
    graph: ModelGraph,
    inputs: Sequence[np.ndarray],
    scenario: ThermalScenario,
    profile: GpuProfile,
    faults: FaultConfig,
    rng_seed: int,
    t_start: float = 0.0,
) -> ExecutionTrace:
    """Execute under the scenario's temperature curve starting at ``t_start``.

    Timeouts and crashes are returned as trace statuses.
    """
    trace = ExecutionTrace(OK)
    clock = float(t_start)
    try:
        values = _bind_inputs(graph, inputs)
        order = topo_order(graph)
    except Exception as exc:  # noqa: BLE001
        return ExecutionTrace(CRASH, reason=f"degraded-internal: {exc!r}")

    def line(edge: Edge, event: str, temp: float, r: float, **extra) -> dict:
        return {"op": edge.id, "kind": edge.kind.label, "event": event,
                "T": temp, "r": r, "t_sim": clock - t_start, **extra}

    with np.errstate(all="ignore"):
        for edge in order:
            temp = temperature_at(profile, scenario, clock)
            r = frequency_ratio(profile, temp)
            clock += faults.cost(edge) / r
            if clock - t_start > faults.timeout_budget:
                trace.log.append(line(edge, "timeout", temp, r))
                trace.status, trace.reason = TIMEOUT, "timeout"
                trace.sim_wall_time = clock - t_start
                return trace

            skip = None
            if edge.kind.is_recurrent and r < faults.r_jitter:
                p_skip = min(1.0, faults.jitter_gain * (faults.r_jitter - r))
                draws = counter_stream(rng_seed, edge.id).random(4 * graph.vertices[edge.srcs[0]].shape[0])
                skip = lambda counter: bool(draws[counter] < p_skip)  # noqa: E731

            events: list = []
            try:
                y = _apply(edge, [values[s] for s in edge.srcs], graph.vertices[edge.dst].shape, skip, events)
            except Exception as exc:  # noqa: BLE001
                trace.log.append(line(edge, "crash", temp, r))
                trace.status, trace.reason = CRASH, f"degraded-internal: {exc!r}"
                trace.sim_wall_time = clock - t_start
                return trace
            trace.log.append(line(edge, "exec", temp, r))
            for tag, counter in events:
                trace.log.append(line(edge, tag, temp, r, step=counter))

            if edge.kind.precision in ("fp32", "mixed_int8_fp16") and r < faults.r_crit:
                bits = math.floor(FP32_MANTISSA_BITS * r / faults.r_crit)
                y = round_mantissa(y, bits)
                trace.log.append(line(edge, "nan" if bits <= 0 else "truncate", temp, r, bits=bits))
            values[edge.dst] = y

    trace.sim_wall_time = clock - t_start
    trace.outputs = [values[graph.output]]
    return trace


def fault_event_count(trace: ExecutionTrace) -> int:
    return sum(1 for line in trace.log if line["event"] != "exec")

