"""Model graphs: tensors as vertices, operators as edges.

A ``ModelGraph`` is an immutable DAG. Every non-input vertex is produced by
exactly one edge, and each edge carries an ``OperatorKind`` plus integer
parameters and a 64-bit weight seed from which its weights are regenerated.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

__all__ = [
    "DTYPES",
    "PRECISIONS",
    "Edge",
    "GraphError",
    "ModelGraph",
    "OperatorKind",
    "SENSITIVE_CATEGORIES",
    "ShapeError",
    "TensorSpec",
    "UNIVERSE",
    "categories",
    "coverage",
    "descendants",
    "graph_categories",
    "infer_spec",
    "load_graph",
    "replace_edge",
    "save_graph",
    "temperature_sensitive",
    "topo_order",
    "validate",
]

DTYPES = ("int8", "fp16", "fp32")
PRECISIONS = ("int8", "fp16", "fp32", "mixed_int8_fp16")
MAX_RANK = 5

CONV_VARIANTS = ("standard", "depthwise", "separable")
ELEMENTWISE_OPS = ("relu", "add", "mul")
POOL_MODES = ("max", "avg")
FAMILIES = (
    "gemm_conv", "matmul", "rnn", "lstm", "gru",
    "elementwise", "dense", "pool", "batch_norm", "none", "reshape",
)
RECURRENT = ("rnn", "lstm", "gru")

# Coverage universe: one sensitive category per targeted operator class,
# plus the non-sensitive operators and the two low precisions.
SENSITIVE_CATEGORIES = (
    "gemm_conv", "matmul", "fp32_precision", "mixed_precision", "rnn", "lstm", "gru",
)
NON_SENSITIVE_CATEGORIES = (
    "relu", "add", "mul", "dense", "max_pool", "avg_pool", "batch_norm",
    "int8_precision", "fp16_precision",
)
UNIVERSE = SENSITIVE_CATEGORIES + NON_SENSITIVE_CATEGORIES


class GraphError(ValueError):
    pass


class ShapeError(GraphError):
    pass


@dataclass(frozen=True)
class TensorSpec:
    shape: tuple[int, ...]
    dtype: str = "fp32"

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if not 1 <= len(self.shape) <= MAX_RANK:
            raise ShapeError(f"rank must be in 1..{MAX_RANK}, got shape {self.shape}")
        if any(d < 1 for d in self.shape):
            raise ShapeError(f"dimensions must be >= 1, got {self.shape}")
        if self.dtype not in DTYPES:
            raise ShapeError(f"unknown dtype {self.dtype!r}")

    @property
    def size(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n


@dataclass(frozen=True)
class OperatorKind:
    """Operator type. Which fields matter depends on ``family``:

    * gemm_conv: variant, precision, gemm
    * matmul: precision
    * rnn: bidirectional
    * lstm, gru: layers (1 = single, 2 = multi), bidirectional
    * elementwise: variant in relu/add/mul
    * pool: variant in max/avg
    """

    family: str
    variant: str | None = None
    precision: str | None = None
    layers: int = 1
    bidirectional: bool = False
    gemm: bool = False

    def __post_init__(self) -> None:
        f = self.family
        if f not in FAMILIES:
            raise GraphError(f"unknown operator family {f!r}")
        if f in ("gemm_conv", "matmul"):
            if self.precision not in PRECISIONS:
                raise GraphError(f"{f} needs a precision in {PRECISIONS}, got {self.precision!r}")
        elif self.precision is not None:
            raise GraphError(f"{f} carries no precision")
        if f == "gemm_conv" and self.variant not in CONV_VARIANTS:
            raise GraphError(f"conv variant must be one of {CONV_VARIANTS}")
        if f == "elementwise" and self.variant not in ELEMENTWISE_OPS:
            raise GraphError(f"elementwise op must be one of {ELEMENTWISE_OPS}")
        if f == "pool" and self.variant not in POOL_MODES:
            raise GraphError(f"pool mode must be one of {POOL_MODES}")
        if self.layers not in (1, 2):
            raise GraphError("layers must be 1 (single) or 2 (multi)")

    # constructors for the common cases
    @classmethod
    def conv(cls, variant: str = "standard", precision: str = "int8", gemm: bool = False) -> "OperatorKind":
        return cls("gemm_conv", variant=variant, precision=precision, gemm=gemm)

    @classmethod
    def matmul(cls, precision: str = "fp16") -> "OperatorKind":
        return cls("matmul", precision=precision)

    @classmethod
    def elementwise(cls, op: str) -> "OperatorKind":
        return cls("elementwise", variant=op)

    @classmethod
    def pool(cls, mode: str) -> "OperatorKind":
        return cls("pool", variant=mode)

    @classmethod
    def simple(cls, family: str) -> "OperatorKind":
        return cls(family)

    @property
    def is_recurrent(self) -> bool:
        return self.family in RECURRENT

    @property
    def label(self) -> str:
        """Short, stable name used in logs."""
        if self.family in ("elementwise", "pool"):
            return f"{self.family}.{self.variant}"
        if self.family == "gemm_conv":
            return f"conv.{self.variant}.{self.precision}" + (".gemm" if self.gemm else "")
        if self.family == "matmul":
            return f"matmul.{self.precision}"
        if self.is_recurrent:
            tag = "bi" if self.bidirectional else "uni"
            return f"{self.family}.{tag}" + (f".l{self.layers}" if self.family != "rnn" else "")
        return self.family

    def to_json(self) -> dict:
        d: dict = {"family": self.family}
        if self.variant is not None:
            d["variant"] = self.variant
        if self.precision is not None:
            d["precision"] = self.precision
        if self.family in ("lstm", "gru"):
            d["layers"] = self.layers
        if self.is_recurrent:
            d["bidirectional"] = self.bidirectional
        if self.family == "gemm_conv":
            d["gemm"] = self.gemm
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "OperatorKind":
        return cls(
            family=d["family"],
            variant=d.get("variant"),
            precision=d.get("precision"),
            layers=int(d.get("layers", 1)),
            bidirectional=bool(d.get("bidirectional", False)),
            gemm=bool(d.get("gemm", False)),
        )


def temperature_sensitive(kind: OperatorKind) -> bool:
    if kind.family in ("gemm_conv", "matmul") or kind.is_recurrent:
        return True
    return kind.precision in ("fp32", "mixed_int8_fp16")


@dataclass(frozen=True)
class Edge:
    id: int
    srcs: tuple[int, ...]
    dst: int
    kind: OperatorKind
    params: Mapping = field(default_factory=dict)
    weight_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "srcs", tuple(int(s) for s in self.srcs))


# ---------------------------------------------------------------------------
# shape rules


def _conv_out(spec: TensorSpec, k: int) -> tuple[int, int, int]:
    if len(spec.shape) != 3:
        raise ShapeError(f"conv expects (H, W, C), got {spec.shape}")
    h, w, c = spec.shape
    if h < k or w < k:
        raise ShapeError(f"kernel {k} does not fit input {spec.shape}")
    return h - k + 1, w - k + 1, c


def infer_spec(kind: OperatorKind, params: Mapping, srcs: Sequence[TensorSpec]) -> TensorSpec:
    """Output spec of an operator applied to ``srcs``; raises ShapeError."""
    f = kind.family
    n = len(srcs)

    def need(arity: int | tuple[int, ...]) -> None:
        ok = n in arity if isinstance(arity, tuple) else n == arity
        if not ok:
            raise ShapeError(f"{kind.label} got {n} inputs")

    def param(name: str) -> int:
        if name not in params:
            raise ShapeError(f"{kind.label} is missing parameter {name!r}")
        v = int(params[name])
        if v < 1:
            raise ShapeError(f"{kind.label} parameter {name} must be >= 1")
        return v

    if f == "gemm_conv":
        need(1)
        h, w, c = _conv_out(srcs[0], param("kernel"))
        out_c = c if kind.variant == "depthwise" else param("out_channels")
        return TensorSpec((h, w, out_c))
    if f == "matmul":
        need((1, 2))
        a = srcs[0].shape
        if len(a) < 2:
            raise ShapeError(f"matmul needs rank >= 2, got {a}")
        if n == 2:
            b = srcs[1].shape
            if len(b) != 2 or b[0] != a[-1]:
                raise ShapeError(f"matmul inner dimensions disagree: {a} x {b}")
            return TensorSpec(a[:-1] + (b[1],))
        return TensorSpec(a[:-1] + (param("units"),))
    if f in RECURRENT:
        need(1)
        if len(srcs[0].shape) != 3:
            raise ShapeError(f"{f} expects (time, batch, feature), got {srcs[0].shape}")
        t, b, _ = srcs[0].shape
        return TensorSpec((t, b, param("hidden") * (2 if kind.bidirectional else 1)))
    if f == "elementwise":
        if kind.variant == "relu":
            need(1)
        else:
            need((1, 2))
            if n == 2 and srcs[0].shape != srcs[1].shape:
                raise ShapeError(f"{kind.label} operands differ: {srcs[0].shape} vs {srcs[1].shape}")
        return TensorSpec(srcs[0].shape)
    if f == "dense":
        need(1)
        return TensorSpec(srcs[0].shape[:-1] + (param("units"),))
    if f == "pool":
        need(1)
        s = srcs[0].shape
        if len(s) != 3 or s[0] < 2 or s[1] < 2:
            raise ShapeError(f"2x2 pooling needs (H>=2, W>=2, C), got {s}")
        return TensorSpec((s[0] // 2, s[1] // 2, s[2]))
    if f in ("batch_norm", "none"):
        need(1)
        return TensorSpec(srcs[0].shape)
    if f == "reshape":
        need(1)
        if "shape" not in params:
            raise ShapeError("reshape is missing its target shape")
        return TensorSpec(tuple(params["shape"]))
    raise ShapeError(f"no shape rule for {f}")


# ---------------------------------------------------------------------------
# graph container


@dataclass(frozen=True)
class ModelGraph:
    vertices: Mapping[int, TensorSpec]
    edges: Mapping[int, Edge]
    inputs: Mapping[int, str]  # vertex id -> modality (image | sequence | voxel)
    output: int

    @property
    def producers(self) -> dict[int, int]:
        return {e.dst: e.id for e in self.edges.values()}

    def consumers(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {v: [] for v in self.vertices}
        for e in sorted(self.edges.values(), key=lambda e: e.id):
            for s in e.srcs:
                out.setdefault(s, []).append(e.id)
        return out

    def next_vertex_id(self) -> int:
        return max(self.vertices, default=-1) + 1

    def next_edge_id(self) -> int:
        return max(self.edges, default=-1) + 1

    def with_changes(
        self,
        vertices: Mapping[int, TensorSpec] | None = None,
        edges: Mapping[int, Edge] | None = None,
        output: int | None = None,
    ) -> "ModelGraph":
        return ModelGraph(
            vertices=dict(self.vertices if vertices is None else vertices),
            edges=dict(self.edges if edges is None else edges),
            inputs=dict(self.inputs),
            output=self.output if output is None else output,
        )

    def real_operator_count(self) -> int:
        return sum(1 for e in self.edges.values() if e.kind.family not in ("none", "reshape"))

    def count(self, family: str) -> int:
        return sum(1 for e in self.edges.values() if e.kind.family == family)

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "inputs": [{"id": v, "modality": m} for v, m in sorted(self.inputs.items())],
            "output": self.output,
            "vertices": [
                {"id": v, "shape": list(s.shape), "dtype": s.dtype}
                for v, s in sorted(self.vertices.items())
            ],
            "edges": [
                {
                    "id": e.id,
                    "srcs": list(e.srcs),
                    "dst": e.dst,
                    "kind": e.kind.to_json(),
                    "params": {k: _jsonable(e.params[k]) for k in sorted(e.params)},
                    "weight_seed": e.weight_seed,
                }
                for e in sorted(self.edges.values(), key=lambda e: e.id)
            ],
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "ModelGraph":
        vertices = {int(v["id"]): TensorSpec(tuple(v["shape"]), v.get("dtype", "fp32")) for v in d["vertices"]}
        edges = {}
        for e in d["edges"]:
            edge = Edge(
                id=int(e["id"]),
                srcs=tuple(e["srcs"]),
                dst=int(e["dst"]),
                kind=OperatorKind.from_json(e["kind"]),
                params=dict(e.get("params", {})),
                weight_seed=int(e.get("weight_seed", 0)),
            )
            edges[edge.id] = edge
        inputs = {int(i["id"]): i.get("modality", "image") for i in d["inputs"]}
        return cls(vertices, edges, inputs, int(d["output"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:16]


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    return v


def save_graph(graph: ModelGraph, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(graph.to_json(), fh, indent=1)
        fh.write("\n")


def load_graph(path: str | Path) -> ModelGraph:
    with open(path) as fh:
        return ModelGraph.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# validation and ordering


def _kahn(graph: ModelGraph) -> tuple[list[int], set[int]]:
    """Edge ids in dependency order, plus ids left over because of cycles."""
    producers = graph.producers
    waiting: dict[int, int] = {}
    consumers: dict[int, list[int]] = {}
    ready: list[int] = []
    for e in graph.edges.values():
        deps = {producers[s] for s in e.srcs if s in producers}
        waiting[e.id] = len(deps)
        for d in deps:
            consumers.setdefault(d, []).append(e.id)
        if not deps:
            ready.append(e.id)
    heapq.heapify(ready)
    order = []
    while ready:
        eid = heapq.heappop(ready)
        order.append(eid)
        for c in consumers.get(eid, ()):
            waiting[c] -= 1
            if waiting[c] == 0:
                heapq.heappush(ready, c)
    return order, set(graph.edges) - set(order)


def topo_order(graph: ModelGraph) -> list[Edge]:
    """Edges so that every producer precedes its consumers; ties by id."""
    order, stuck = _kahn(graph)
    if stuck:
        raise GraphError(f"cycle through edges {sorted(stuck)}")
    return [graph.edges[i] for i in order]


def validate(graph: ModelGraph) -> list[str]:
    """All rule violations found in ``graph``; an empty list means valid."""
    problems: list[str] = []
    verts = graph.vertices
    if not graph.inputs:
        problems.append("inputs: graph has no input vertices")
    for v in graph.inputs:
        if v not in verts:
            problems.append(f"dangling: input {v} is not a vertex")
    if graph.output not in verts:
        problems.append(f"dangling: output {graph.output} is not a vertex")

    produced: dict[int, int] = {}
    for e in sorted(graph.edges.values(), key=lambda e: e.id):
        missing = [v for v in (*e.srcs, e.dst) if v not in verts]
        if missing:
            problems.append(f"dangling: edge {e.id} references unknown vertices {missing}")
            continue
        if e.dst in graph.inputs:
            problems.append(f"producer: edge {e.id} writes input vertex {e.dst}")
        if e.dst in produced:
            problems.append(f"producer: vertex {e.dst} written by edges {produced[e.dst]} and {e.id}")
        produced[e.dst] = e.id
    for v in verts:
        if v not in graph.inputs and v not in produced:
            problems.append(f"producer: vertex {v} has no producing edge")

    _, stuck = _kahn(graph)
    if stuck:
        problems.append(f"cycle: edges {sorted(stuck)} form a cycle")

    for e in sorted(graph.edges.values(), key=lambda e: e.id):
        if any(v not in verts for v in (*e.srcs, e.dst)):
            continue
        try:
            got = infer_spec(e.kind, e.params, [verts[s] for s in e.srcs])
        except ShapeError as exc:
            problems.append(f"shape: edge {e.id} ({e.kind.label}): {exc}")
            continue
        want = verts[e.dst]
        if got.shape != want.shape:
            problems.append(f"shape: edge {e.id} ({e.kind.label}) yields {got.shape}, vertex {e.dst} is {want.shape}")

    if not any(p.startswith("dangling") for p in problems):
        fwd = _reach(graph.inputs, graph, forward=True)
        bwd = _reach([graph.output], graph, forward=False)
        for v in sorted(verts):
            if v not in fwd:
                problems.append(f"unreachable: vertex {v} is not reachable from the inputs")
            elif v not in bwd:
                problems.append(f"unreachable: vertex {v} does not reach the output")
    return problems


def _reach(starts: Iterable[int], graph: ModelGraph, forward: bool) -> set[int]:
    starts = list(starts)
    adj: dict[int, list[int]] = {}
    for e in graph.edges.values():
        if forward:
            for s in e.srcs:
                adj.setdefault(s, []).append(e.dst)
        else:
            adj.setdefault(e.dst, []).extend(e.srcs)
    seen = set(starts)
    stack = list(starts)
    while stack:
        v = stack.pop()
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def descendants(graph: ModelGraph, vertex: int) -> set[int]:
    """Vertices reachable from ``vertex``, including itself."""
    return _reach([vertex], graph, forward=True)


# ---------------------------------------------------------------------------
# coverage


def categories(edge: Edge) -> set[str]:
    """Coverage categories exercised by one edge."""
    k = edge.kind
    out: set[str] = set()
    if k.family in ("gemm_conv", "matmul", "rnn", "lstm", "gru", "dense", "batch_norm"):
        out.add(k.family)
    elif k.family == "elementwise":
        out.add(k.variant)
    elif k.family == "pool":
        out.add(f"{k.variant}_pool")
    if k.precision == "fp32":
        out.add("fp32_precision")
    elif k.precision == "mixed_int8_fp16":
        out.add("mixed_precision")
    elif k.precision == "int8":
        out.add("int8_precision")
    elif k.precision == "fp16":
        out.add("fp16_precision")
    return out


def graph_categories(graph: ModelGraph) -> set[str]:
    cats: set[str] = set()
    for e in graph.edges.values():
        cats |= categories(e)
    return cats


def coverage(
    corpus: Iterable[ModelGraph | set[str]],
    universe: Sequence[str] = UNIVERSE,
) -> tuple[float, float]:
    """(operator coverage, temperature-sensitive operator coverage).

    Corpus items may be graphs or precomputed category sets.
    """
    if not universe:
        raise ValueError("operator universe must be nonempty")
    seen: set[str] = set()
    for item in corpus:
        seen |= item if isinstance(item, set) else graph_categories(item)
    uni = set(universe)
    sensitive = uni & set(SENSITIVE_CATEGORIES)
    op_cov = len(seen & uni) / len(uni)
    sens_cov = len(seen & sensitive) / len(sensitive) if sensitive else 0.0
    return op_cov, sens_cov


def replace_edge(graph: ModelGraph, edge: Edge) -> ModelGraph:
    edges = dict(graph.edges)
    edges[edge.id] = edge
    return graph.with_changes(edges=edges)

