"""Evaluation of a graph, its linearization and its adjoint."""

from __future__ import annotations

import numpy as np

from opgraph.errors import CompositionError, LinearizationRequiredError, TypedInputError
from opgraph.field import Field, as_array
from opgraph.graph_ir.graph import SOURCE, OperatorGraph, validate
from opgraph.operators import Kind, linearize
from opgraph.operators.node import _check_input


def _ensure_valid(g: OperatorGraph) -> None:
    if "valid" not in g._cache:
        bad = validate(g)
        if bad:
            raise CompositionError(f"graph {g.name!r} is not well formed: " + "; ".join(map(str, bad)))
        g._cache["valid"] = True


def _merge(g: OperatorGraph, nid: str, values: list[np.ndarray]) -> np.ndarray:
    if len(values) == 1:
        return values[0]
    pol = g.merge_policy[nid]
    try:
        if pol.mode == "sum":
            acc = values[0]
            for v in values[1:]:
                acc = acc + v
            return acc
        ax = g.nodes[nid].in_type.axis_index(pol.axis)
        return np.concatenate(values, axis=ax)
    except ValueError as exc:
        raise CompositionError(f"merge into {nid!r} failed: {exc}") from None


def _run(g: OperatorGraph, x: np.ndarray, keep_inputs: bool = False):
    values = {SOURCE: x}
    inputs = {}
    remaining = {}
    for a, _ in g.edges:
        remaining[a] = remaining.get(a, 0) + 1
    for nid in g.order():
        preds = g.predecessors(nid)
        merged = _merge(g, nid, [values[p] for p in preds])
        node = g.nodes[nid]
        if merged.shape != node.in_type.shape:
            raise CompositionError(f"node {nid!r} received shape {merged.shape}, expects {node.in_type.shape}")
        merged = merged.astype(node.in_type.np_dtype, copy=False)
        if keep_inputs:
            inputs[nid] = merged
        values[nid] = np.asarray(node.apply(merged), dtype=node.out_type.np_dtype).reshape(node.out_type.shape)
        for p in preds:
            remaining[p] -= 1
            if remaining[p] == 0 and p != g.sink and not keep_inputs:
                del values[p]
    return values[g.sink], inputs


def compose(g: OperatorGraph, x):
    """Evaluate the graph on ``x`` in tie-broken topological order."""
    _ensure_valid(g)
    arr, is_field = _check_input(x, g.source_type, "graph input")
    y, _ = _run(g, arr)
    return Field.of(y, g.out_type) if is_field else y


def intermediate_inputs(g: OperatorGraph, x) -> dict[str, np.ndarray]:
    """Input seen by every node when the graph is evaluated at ``x``."""
    _ensure_valid(g)
    arr, _ = _check_input(x, g.source_type, "operating point")
    return _run(g, arr, keep_inputs=True)[1]


def linearize_graph(g: OperatorGraph, x_op) -> OperatorGraph:
    """Replace every nonlinear node by its Jacobian at the intermediate produced by ``x_op``."""
    needs = [nid for nid, n in g.nodes.items()
             if n.kind in (Kind.DETECT, Kind.TRANSFORM) and not n.is_linear]
    if not needs:
        return g
    inputs = intermediate_inputs(g, x_op)
    nodes = dict(g.nodes)
    for nid in needs:
        nodes[nid] = linearize(g.nodes[nid], inputs[nid])
    return OperatorGraph(g.source_type, nodes, g.edges, g.sink, g.edge_types, g.merge_policy, g.name)


def compose_adjoint(g: OperatorGraph, y, x_op=None):
    """Adjoint of the (linearized) graph applied to ``y``.

    Nonlinear nodes are linearized at the intermediates produced by ``x_op``;
    a graph with nonlinear nodes and no ``x_op`` raises
    :class:`LinearizationRequiredError`.
    """
    _ensure_valid(g)
    if not g.is_linear:
        if x_op is None:
            raise LinearizationRequiredError("graph has nonlinear nodes; pass an operating point x_op")
        g = linearize_graph(g, x_op)
    arr, is_field = _check_input(y, g.out_type, "adjoint input")
    cot: dict[str, np.ndarray] = {g.sink: arr}
    for nid in reversed(g.order()):
        node = g.nodes[nid]
        if nid not in cot:
            raise CompositionError(f"node {nid!r} is not connected to the sink")
        gin = np.asarray(node.apply_adjoint(cot.pop(nid)), dtype=node.in_type.np_dtype)
        gin = gin.reshape(node.in_type.shape)
        preds = g.predecessors(nid)
        if len(preds) == 1:
            parts = [gin]
        elif g.merge_policy[nid].mode == "sum":
            parts = [gin] * len(preds)
        else:
            ax = node.in_type.axis_index(g.merge_policy[nid].axis)
            src_types = [g.source_type if p == SOURCE else g.nodes[p].out_type for p in preds]
            cuts = np.cumsum([t.shape[ax] for t in src_types])[:-1]
            parts = np.split(gin, cuts, axis=ax)
        for p, part in zip(preds, parts):
            t = g.source_type if p == SOURCE else g.nodes[p].out_type
            if not t.is_complex and np.iscomplexobj(part):
                part = part.real
            cot[p] = cot[p] + part if p in cot else part
    x = cot[SOURCE]
    x = np.asarray(x, dtype=g.source_type.np_dtype).reshape(g.source_type.shape)
    return Field.of(x, g.source_type) if is_field else x
