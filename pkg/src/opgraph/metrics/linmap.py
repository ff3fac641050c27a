"""A uniform view of nodes, graphs and plain callables as linear maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from opgraph.errors import LinearizationRequiredError
from opgraph.field import EdgeType
from opgraph.operators import PrimitiveNode


@dataclass(frozen=True)
class LinearMap:
    in_type: EdgeType
    out_type: EdgeType
    forward: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    complex_linear: bool = False
    name: str = ""

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex | float:
        """Inner product the adjoint is defined against."""
        v = np.vdot(a, b)
        return v if self.complex_linear else float(np.real(v))

    def minus(self, other: "LinearMap") -> "LinearMap":
        return LinearMap(self.in_type, self.out_type,
                         lambda x: self.forward(x) - other.forward(x),
                         lambda y: self.adjoint(y) - other.adjoint(y),
                         self.complex_linear and other.complex_linear,
                         f"{self.name}-{other.name}")


def _node_cl(n: PrimitiveNode) -> bool:
    return n.in_type.is_complex and n.out_type.is_complex


def as_linear_map(op, x_op=None) -> LinearMap:
    """Wrap a PrimitiveNode, OperatorGraph or LinearMap.

    Nonlinear nodes/graphs are linearized at ``x_op``; without one a
    :class:`LinearizationRequiredError` is raised.
    """
    if isinstance(op, LinearMap):
        return op
    from opgraph.graph_ir import OperatorGraph, compose, compose_adjoint, linearize_graph
    from opgraph.operators import adjoint, forward, linearize
    if isinstance(op, PrimitiveNode):
        if not op.is_linear:
            if x_op is None and op.params.x_op is None:
                raise LinearizationRequiredError(f"{op.kind.value} node needs an operating point")
            op = linearize(op, x_op if x_op is not None else op.params.x_op)
        node = op
        return LinearMap(node.in_type, node.out_type, lambda x: forward(node, x),
                         lambda y: adjoint(node, y), _node_cl(node), node.kind.value)
    if isinstance(op, OperatorGraph):
        g = op
        if not g.is_linear:
            if x_op is None:
                raise LinearizationRequiredError("nonlinear graph needs an operating point")
            g = linearize_graph(g, x_op)
        cl = all(_node_cl(n) for n in g.nodes.values())
        return LinearMap(g.source_type, g.out_type, lambda x: compose(g, x),
                         lambda y: compose_adjoint(g, y), cl, g.name)
    raise TypeError(f"cannot view {type(op).__name__} as a linear map")
