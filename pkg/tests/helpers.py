"""Small graph builders shared by the tests."""

from thermofuzz.graph import Edge, ModelGraph, OperatorKind as K, TensorSpec


def chain(input_shape, ops, modality="sequence"):
    """Linear graph; ``ops`` is a list of (kind, params, out_shape)."""
    vertices = {0: TensorSpec(tuple(input_shape))}
    edges = {}
    for i, (kind, params, shape) in enumerate(ops):
        vertices[i + 1] = TensorSpec(tuple(shape))
        edges[i] = Edge(i, (i,), i + 1, kind, params, weight_seed=7 + i)
    return ModelGraph(vertices, edges, {0: modality}, len(ops))


def matmul_chain(n, precision="fp16", width=4):
    return chain((3, width), [(K.matmul(precision), {"units": width}, (3, width))] * n)


def single(kind, params, in_shape, out_shape, modality="sequence"):
    return chain(in_shape, [(kind, params, out_shape)], modality)
