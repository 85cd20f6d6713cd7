"""Bundled starter models for the seed pool.

Five small perception-style graphs covering camera, sequence and voxel
inputs. Together they use int8 convolutions and one uni-directional RNN,
so mutation rules 1-7 are what bring in the remaining sensitive operators.
"""

from __future__ import annotations

from .graph import Edge, ModelGraph, OperatorKind as K, TensorSpec

__all__ = ["starter_graphs"]


def _chain(inputs: dict[int, tuple[tuple[int, ...], str]], steps: list[tuple], output: int) -> ModelGraph:
    vertices = {vid: TensorSpec(shape) for vid, (shape, _) in inputs.items()}
    edges = {}
    for eid, (srcs, dst, shape, kind, params) in enumerate(steps):
        vertices[dst] = TensorSpec(shape)
        edges[eid] = Edge(eid, srcs, dst, kind, params, weight_seed=1000 + 17 * eid + dst)
    return ModelGraph(vertices, edges, {vid: mod for vid, (_, mod) in inputs.items()}, output)


def image_cnn() -> ModelGraph:
    return _chain(
        {0: ((12, 12, 3), "image")},
        [
            ((0,), 1, (10, 10, 8), K.conv("standard", "int8"), {"kernel": 3, "out_channels": 8}),
            ((1,), 2, (10, 10, 8), K.elementwise("relu"), {}),
            ((2,), 3, (5, 5, 8), K.pool("max"), {}),
            ((3,), 4, (3, 3, 8), K.conv("standard", "int8"), {"kernel": 3, "out_channels": 8}),
            ((4,), 5, (3, 3, 8), K.simple("batch_norm"), {}),
            ((5,), 6, (3, 3, 4), K.simple("dense"), {"units": 4}),
        ],
        6,
    )


def image_depthwise() -> ModelGraph:
    return _chain(
        {0: ((10, 10, 3), "image")},
        [
            ((0,), 1, (8, 8, 3), K.conv("depthwise", "int8"), {"kernel": 3}),
            ((1,), 2, (8, 8, 3), K.simple("batch_norm"), {}),
            ((2,), 3, (8, 8, 3), K.simple("none"), {}),
            ((3,), 4, (4, 4, 3), K.pool("avg"), {}),
            ((4,), 5, (4, 4, 6), K.simple("dense"), {"units": 6}),
            ((5,), 6, (4, 4, 6), K.elementwise("relu"), {}),
        ],
        6,
    )


def sequence_rnn() -> ModelGraph:
    return _chain(
        {0: ((8, 2, 6), "sequence")},
        [
            ((0,), 1, (8, 2, 8), K("rnn"), {"hidden": 8}),
            ((1,), 2, (8, 2, 8), K.simple("none"), {}),
            ((2,), 3, (8, 2, 4), K.simple("dense"), {"units": 4}),
        ],
        3,
    )


def voxel_net() -> ModelGraph:
    return _chain(
        {0: ((8, 8, 4), "voxel")},
        [
            ((0,), 1, (6, 6, 6), K.conv("standard", "int8"), {"kernel": 3, "out_channels": 6}),
            ((1,), 2, (6, 6, 6), K.elementwise("relu"), {}),
            ((2,), 3, (3, 3, 6), K.pool("max"), {}),
            ((3,), 4, (3, 3, 4), K.simple("dense"), {"units": 4}),
        ],
        4,
    )


def sequence_mlp() -> ModelGraph:
    return _chain(
        {0: ((6, 4, 5), "sequence")},
        [
            ((0,), 1, (6, 4, 8), K.simple("dense"), {"units": 8}),
            ((1,), 2, (6, 4, 8), K.elementwise("relu"), {}),
            ((2,), 3, (6, 4, 8), K.simple("dense"), {"units": 8}),
            ((1, 3), 4, (6, 4, 8), K.elementwise("add"), {}),
            ((4,), 5, (6, 4, 8), K.simple("none"), {}),
        ],
        5,
    )


def starter_graphs() -> dict[str, ModelGraph]:
    return {
        "image_cnn": image_cnn(),
        "image_depthwise": image_depthwise(),
        "sequence_rnn": sequence_rnn(),
        "voxel_net": voxel_net(),
        "sequence_mlp": sequence_mlp(),
    }
