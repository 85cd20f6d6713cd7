"""The eight graph mutation rules.

Rules 1, 2, 5, 6 and 7 insert an operator. An insertion site is a vertex
pair ``(a, b)`` where ``b`` is ``a`` or one of its descendants: the new
operator reads ``a``, its result is reshaped to ``b``'s shape if needed and
added onto ``b`` through a residual ``add``, and every former consumer of
``b`` reads the sum instead. Rules 3 and 4 rewrite an operator's precision
in place. Rule 8 swaps a non-sensitive operator for another one drawn from
the non-sensitive set, which includes the ``none`` placeholder; swapping to
or from ``none`` therefore removes or inserts an operator.
"""

from __future__ import annotations

from dataclasses import replace
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from ._rng import generator
from .graph import (
    PRECISIONS,
    Edge,
    ModelGraph,
    OperatorKind,
    ShapeError,
    TensorSpec,
    descendants,
    infer_spec,
)

__all__ = [
    "MAX_EDGES",
    "MutationRule",
    "NoEligibleSite",
    "RULE_NAMES",
    "Site",
    "apply_rule",
    "eligible_sites",
]

# insertions stop once a graph reaches this many edges
MAX_EDGES = 48


class MutationRule(IntEnum):
    GEMM_CONV_INSERTION = 1
    MATMUL_INSERTION = 2
    HIGH_PRECISION_REPLACEMENT = 3
    MIX_PRECISION_REPLACEMENT = 4
    RNN_INSERTION = 5
    LSTM_INSERTION = 6
    GRU_INSERTION = 7
    RANDOM_OPERATOR_REPLACEMENT = 8


RULE_NAMES = {
    1: "GEMM Convolution Insertion",
    2: "MatMul Product Insertion",
    3: "High Precision Operator Replacement",
    4: "Mix Precision Operator Replacement",
    5: "Recurrent Neural Network (RNN) Insertion",
    6: "Long Short-Term Memory (LSTM) Insertion",
    7: "Gated Recurrent Unit (GRU) Insertion",
    8: "Random Operator Replacement (ROR)",
}

INSERTION_RULES = (1, 2, 5, 6, 7)
NON_SENSITIVE_FAMILIES = ("elementwise", "dense", "pool", "batch_norm", "none")

ROR_CANDIDATES: tuple[OperatorKind, ...] = (
    OperatorKind.elementwise("relu"),
    OperatorKind.elementwise("add"),
    OperatorKind.elementwise("mul"),
    OperatorKind.simple("dense"),
    OperatorKind.pool("max"),
    OperatorKind.pool("avg"),
    OperatorKind.simple("batch_norm"),
    OperatorKind.simple("none"),
)

RECURRENT_CONFIGS = {
    5: [OperatorKind("rnn", bidirectional=False), OperatorKind("rnn", bidirectional=True)],
    6: [OperatorKind("lstm", layers=1), OperatorKind("lstm", layers=2), OperatorKind("lstm", bidirectional=True)],
    7: [OperatorKind("gru", layers=1), OperatorKind("gru", layers=2), OperatorKind("gru", bidirectional=True)],
}


class NoEligibleSite(Exception):
    """The rule has nowhere to apply in this graph."""


class Site(NamedTuple):
    """``("pair", a, b)`` for insertions, ``("edge", edge_id)`` for replacements."""

    kind: str
    a: int
    b: int | None = None

    @property
    def edge(self) -> int:
        return self.a


def _insertable(rule: int, spec: TensorSpec) -> bool:
    rank = len(spec.shape)
    if rule == 1:
        return rank == 3
    if rule == 2:
        return rank >= 2
    return rank == 3  # recurrent: (time, batch, feature)


def _ror_options(graph: ModelGraph, edge: Edge) -> list[OperatorKind]:
    srcs = [graph.vertices[s] for s in edge.srcs]
    out = []
    for cand in ROR_CANDIDATES:
        if cand == edge.kind:
            continue
        params = _ror_params(cand, graph.vertices[edge.dst])
        try:
            infer_spec(cand, params, srcs)
        except ShapeError:
            continue
        out.append(cand)
    return out


def _ror_params(kind: OperatorKind, dst: TensorSpec) -> dict:
    return {"units": dst.shape[-1]} if kind.family == "dense" else {}


def eligible_sites(graph: ModelGraph, rule: int, max_edges: int = MAX_EDGES) -> list[Site]:
    """Every place ``rule`` can be applied, in a deterministic order."""
    rule = int(rule)
    if rule in INSERTION_RULES:
        if len(graph.edges) >= max_edges:
            return []
        sites = []
        for a in sorted(graph.vertices):
            if not _insertable(rule, graph.vertices[a]):
                continue
            sites.extend(Site("pair", a, b) for b in sorted(descendants(graph, a)))
        return sites
    if rule in (3, 4):
        target = "fp32" if rule == 3 else "mixed_int8_fp16"
        return [
            Site("edge", e.id)
            for e in sorted(graph.edges.values(), key=lambda e: e.id)
            if e.kind.precision is not None and e.kind.precision != target
        ]
    if rule == 8:
        return [
            Site("edge", e.id)
            for e in sorted(graph.edges.values(), key=lambda e: e.id)
            if e.kind.family in NON_SENSITIVE_FAMILIES and _ror_options(graph, e)
        ]
    raise ValueError(f"unknown mutation rule {rule}")


def _new_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63, dtype=np.int64))


def _choose(rng: np.random.Generator, items: list):
    return items[int(rng.integers(len(items)))]


def _insert(graph: ModelGraph, rule: int, site: Site, rng: np.random.Generator) -> ModelGraph:
    a, b = site.a, site.b
    a_spec = graph.vertices[a]
    if rule == 1:
        h, w, _ = a_spec.shape
        kernel = _choose(rng, [k for k in (1, 3) if k <= min(h, w)])
        kind = OperatorKind.conv(_choose(rng, ["standard", "depthwise", "separable"]),
                                 _choose(rng, list(PRECISIONS)), gemm=True)
        params = {"kernel": kernel}
        if kind.variant != "depthwise":
            params["out_channels"] = _choose(rng, [4, 8])
    elif rule == 2:
        kind = OperatorKind.matmul(_choose(rng, list(PRECISIONS)))
        params = {"units": _choose(rng, [4, 8])}
    else:
        kind = _choose(rng, RECURRENT_CONFIGS[rule])
        params = {"hidden": _choose(rng, [4, 8])}

    vertices = dict(graph.vertices)
    edges = dict(graph.edges)
    b_spec = graph.vertices[b]
    old_consumers = [e for e in graph.edges.values() if b in e.srcs]
    vid = graph.next_vertex_id()
    eid = graph.next_edge_id()

    u = vid
    vertices[u] = infer_spec(kind, params, [a_spec])
    edges[eid] = Edge(eid, (a,), u, kind, params, _new_seed(rng))
    eid += 1
    vid += 1
    branch = u
    if vertices[u].shape != b_spec.shape:
        vertices[vid] = TensorSpec(b_spec.shape)
        edges[eid] = Edge(eid, (u,), vid, OperatorKind.simple("reshape"), {"shape": list(b_spec.shape)}, 0)
        branch = vid
        eid += 1
        vid += 1
    merged = vid
    vertices[merged] = TensorSpec(b_spec.shape, b_spec.dtype)
    edges[eid] = Edge(eid, (b, branch), merged, OperatorKind.elementwise("add"), {}, 0)
    for e in old_consumers:
        edges[e.id] = replace(e, srcs=tuple(merged if s == b else s for s in e.srcs))
    output = merged if graph.output == b else graph.output
    return graph.with_changes(vertices=vertices, edges=edges, output=output)


def _set_precision(graph: ModelGraph, rule: int, site: Site) -> ModelGraph:
    edge = graph.edges[site.edge]
    target = "fp32" if rule == 3 else "mixed_int8_fp16"
    edges = dict(graph.edges)
    edges[edge.id] = replace(edge, kind=replace(edge.kind, precision=target))
    return graph.with_changes(edges=edges)


def _random_replace(graph: ModelGraph, site: Site, rng: np.random.Generator) -> ModelGraph:
    edge = graph.edges[site.edge]
    kind = _choose(rng, _ror_options(graph, edge))
    dst = graph.vertices[edge.dst]
    params = _ror_params(kind, dst)
    natural = infer_spec(kind, params, [graph.vertices[s] for s in edge.srcs])
    seed = _new_seed(rng)
    edges = dict(graph.edges)
    if natural.shape == dst.shape:
        edges[edge.id] = Edge(edge.id, edge.srcs, edge.dst, kind, params, seed)
        return graph.with_changes(edges=edges)
    # shape repair: route through a fresh vertex and a reshape adapter
    vertices = dict(graph.vertices)
    u = graph.next_vertex_id()
    vertices[u] = natural
    edges[edge.id] = Edge(edge.id, edge.srcs, u, kind, params, seed)
    adapter = graph.next_edge_id()
    edges[adapter] = Edge(adapter, (u,), edge.dst, OperatorKind.simple("reshape"), {"shape": list(dst.shape)}, 0)
    return graph.with_changes(vertices=vertices, edges=edges)


def apply_rule(graph: ModelGraph, rule: int, rng_seed: int, max_edges: int = MAX_EDGES) -> ModelGraph:
    """Apply ``rule`` at a uniformly drawn eligible site.

    Pure in ``(graph, rule, rng_seed)``. Raises ``NoEligibleSite`` when the
    rule cannot be applied anywhere.
    """
    rule = int(rule)
    sites = eligible_sites(graph, rule, max_edges)
    if not sites:
        raise NoEligibleSite(f"rule {rule} has no eligible site")
    rng = generator(rng_seed)
    site = sites[int(rng.integers(len(sites)))]
    if rule in INSERTION_RULES:
        return _insert(graph, rule, site, rng)
    if rule in (3, 4):
        return _set_precision(graph, rule, site)
    return _random_replace(graph, site, rng)

