"""Typed operator graphs: validation, evaluation, adjoints, file format."""

from opgraph.graph_ir.compose import (compose, compose_adjoint,
                                      intermediate_inputs, linearize_graph)
from opgraph.graph_ir.graph import (D_MAX, N_MAX, SOURCE, GraphBuilder,
                                    GraphStats, Merge, OperatorGraph,
                                    Violation, chain, natural_key, stats,
                                    topological_order, validate)
from opgraph.graph_ir.serialize import (deserialize, graph_from_dict,
                                        graph_to_dict, serialize)

__all__ = [
    "D_MAX", "N_MAX", "SOURCE", "GraphBuilder", "GraphStats", "Merge", "OperatorGraph",
    "Violation", "chain", "compose", "compose_adjoint", "deserialize", "graph_from_dict",
    "graph_to_dict", "intermediate_inputs", "linearize_graph", "natural_key", "serialize",
    "stats", "topological_order", "validate",
]
