import json

import pytest
from hypothesis import given, strategies as st

from thermofuzz.graph import (
    Edge,
    GraphError,
    ModelGraph,
    OperatorKind as K,
    SENSITIVE_CATEGORIES,
    ShapeError,
    TensorSpec,
    UNIVERSE,
    coverage,
    descendants,
    graph_categories,
    infer_spec,
    load_graph,
    save_graph,
    temperature_sensitive,
    topo_order,
    validate,
)
from thermofuzz.starters import starter_graphs

from helpers import chain


def test_starters_are_valid(starters):
    assert len(starters) >= 5
    for name, g in starters.items():
        assert validate(g) == [], name


def test_starters_cover_few_sensitive_categories(starters):
    _, sens = coverage(starters.values())
    assert sens == pytest.approx(2 / 7)


def test_universe_is_partitioned():
    assert len(UNIVERSE) == len(set(UNIVERSE)) == 16
    assert set(SENSITIVE_CATEGORIES) <= set(UNIVERSE)
    assert len(SENSITIVE_CATEGORIES) == 7


@pytest.mark.parametrize(
    "kind, sensitive",
    [
        (K.conv("standard", "int8"), True),
        (K.matmul("fp16"), True),
        (K("lstm"), True),
        (K("gru", bidirectional=True), True),
        (K.elementwise("relu"), False),
        (K.simple("dense"), False),
        (K.pool("max"), False),
    ],
)
def test_sensitivity_classes(kind, sensitive):
    assert temperature_sensitive(kind) is sensitive


@pytest.mark.parametrize(
    "kind, params, srcs, expected",
    [
        (K.conv("standard", "fp32"), {"kernel": 3, "out_channels": 5}, [(6, 7, 2)], (4, 5, 5)),
        (K.conv("depthwise", "fp32"), {"kernel": 1}, [(6, 7, 2)], (6, 7, 2)),
        (K.conv("separable", "fp32"), {"kernel": 3, "out_channels": 4}, [(3, 3, 2)], (1, 1, 4)),
        (K.matmul("fp16"), {"units": 9}, [(2, 3, 4)], (2, 3, 9)),
        (K.matmul("fp16"), {}, [(5, 4), (4, 2)], (5, 2)),
        (K("gru", bidirectional=True), {"hidden": 3}, [(7, 2, 5)], (7, 2, 6)),
        (K.pool("avg"), {}, [(5, 4, 3)], (2, 2, 3)),
        (K.simple("dense"), {"units": 2}, [(4, 9)], (4, 2)),
        (K.simple("reshape"), {"shape": [2, 6]}, [(3, 4)], (2, 6)),
    ],
)
def test_shape_rules(kind, params, srcs, expected):
    assert infer_spec(kind, params, [TensorSpec(s) for s in srcs]).shape == expected


@pytest.mark.parametrize(
    "kind, params, srcs",
    [
        (K.conv("standard", "fp32"), {"kernel": 3, "out_channels": 2}, [(2, 5, 1)]),
        (K.matmul("fp16"), {}, [(5, 4), (3, 2)]),
        (K("rnn"), {"hidden": 3}, [(4, 5)]),
        (K.elementwise("add"), {}, [(2, 2), (2, 3)]),
        (K.simple("dense"), {}, [(4, 4)]),
    ],
)
def test_shape_errors(kind, params, srcs):
    with pytest.raises(ShapeError):
        infer_spec(kind, params, [TensorSpec(s) for s in srcs])


@pytest.mark.parametrize("bad", [dict(family="conv"), dict(family="matmul"), dict(family="relu_like"),
                                 dict(family="lstm", layers=3), dict(family="dense", precision="fp32")])
def test_operator_kind_validation(bad):
    with pytest.raises(GraphError):
        K(**bad)


def test_tensor_spec_validation():
    with pytest.raises(GraphError):
        TensorSpec((0, 3))
    with pytest.raises(GraphError):
        TensorSpec((1,) * 6)


def test_validate_reports_each_problem_class():
    g = chain((4, 4), [(K.simple("dense"), {"units": 4}, (4, 4)), (K.elementwise("relu"), {}, (4, 4))])
    assert validate(g) == []
    bad_shape = g.with_changes(vertices={**g.vertices, 2: TensorSpec((4, 5))})
    assert any(p.startswith("shape") for p in validate(bad_shape))
    cyc_edges = dict(g.edges)
    cyc_edges[0] = Edge(0, (2,), 1, K.simple("dense"), {"units": 4})
    assert any(p.startswith("cycle") for p in validate(g.with_changes(edges=cyc_edges)))
    with pytest.raises(GraphError):
        topo_order(g.with_changes(edges=cyc_edges))
    orphan = g.with_changes(vertices={**g.vertices, 9: TensorSpec((4, 4))})
    assert any(p.startswith("producer") for p in validate(orphan))
    dangling = g.with_changes(output=42)
    assert any(p.startswith("dangling") for p in validate(dangling))


def test_unreachable_vertex_detected():
    g = chain((4, 4), [(K.simple("none"), {}, (4, 4))])
    extra = g.with_changes(
        vertices={**g.vertices, 5: TensorSpec((4, 4))},
        edges={**g.edges, 5: Edge(5, (0,), 5, K.simple("none"))},
    )
    assert any(p.startswith("unreachable") for p in validate(extra))


def test_descendants_include_self(starters):
    g = starters["sequence_mlp"]
    assert descendants(g, 0) == set(g.vertices)
    assert descendants(g, g.output) == {g.output}


def test_json_round_trip_and_hash(tmp_path, starters):
    for g in starters.values():
        path = tmp_path / "g.json"
        save_graph(g, path)
        back = load_graph(path)
        assert back.dumps() == g.dumps()
        assert back.content_hash() == g.content_hash()
        json.loads(path.read_text())
    hashes = {g.content_hash() for g in starters.values()}
    assert len(hashes) == len(starters)


def test_categories_of_starters(starters):
    cats = graph_categories(starters["image_cnn"])
    assert {"gemm_conv", "int8_precision", "relu", "max_pool", "batch_norm", "dense"} == cats


def test_coverage_accepts_sets():
    op, sens = coverage([{"gemm_conv", "relu"}, {"lstm"}])
    assert op == 3 / 16
    assert sens == 2 / 7
    with pytest.raises(ValueError):
        coverage([], universe=())


@given(st.lists(st.sampled_from(UNIVERSE), max_size=30))
def test_coverage_bounded_and_monotone(cats):
    prefix = [set(cats[: len(cats) // 2])]
    full = [set(cats)]
    a, b = coverage(prefix), coverage(full)
    assert 0 <= a[0] <= b[0] <= 1
    assert 0 <= a[1] <= b[1] <= 1
