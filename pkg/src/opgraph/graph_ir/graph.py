"""Typed DAG container, well-formedness rules and graph statistics."""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from opgraph.errors import CompositionError, ParamError
from opgraph.field import EdgeType
from opgraph.operators import Kind, PrimitiveNode

SOURCE = "source"
N_MAX = 20
D_MAX = 10


def natural_key(node_id: str):
    """Sort key that orders ``n2`` before ``n10``; the source terminal sorts first."""
    if node_id == SOURCE:
        return (0,)
    parts = re.split(r"(\d+)", node_id)
    return (1,) + tuple((0, int(p)) if p.isdigit() else (1, p) for p in parts if p)


@dataclass(frozen=True)
class Merge:
    """Fan-in rule: ``sum`` of equally typed inputs, or ``concat`` along an axis."""

    mode: str = "sum"
    axis: Optional[str] = None

    def __post_init__(self):
        if self.mode not in ("sum", "concat"):
            raise ParamError(f"merge mode must be sum or concat, got {self.mode!r}")
        if (self.mode == "concat") != (self.axis is not None):
            raise ParamError("concat merges need an axis; sum merges take none")

    def __str__(self):
        return "sum" if self.mode == "sum" else f"concat({self.axis})"

    @classmethod
    def parse(cls, text: str) -> "Merge":
        text = text.strip()
        if text == "sum":
            return cls()
        m = re.fullmatch(r"concat\((\w+)\)", text)
        if not m:
            raise ParamError(f"bad merge policy {text!r}")
        return cls("concat", m.group(1))


@dataclass(frozen=True)
class Violation:
    rule: str
    detail: str
    where: object = None

    def __str__(self):
        return f"{self.rule}: {self.detail}"


@dataclass(frozen=True)
class GraphStats:
    n_nodes: int
    depth: int


@dataclass(frozen=True, eq=False)
class OperatorGraph:
    """Typed DAG of primitive nodes fed by one source terminal.

    Edges are ``(src, dst)`` id pairs; the terminal id is ``"source"``.
    ``edge_types`` carries the declared type of every edge and
    ``merge_policy`` the fan-in rule of every node with several inputs.
    """

    source_type: EdgeType
    nodes: Mapping[str, PrimitiveNode]
    edges: tuple[tuple[str, str], ...]
    sink: str
    edge_types: Mapping[tuple[str, str], EdgeType] = field(default_factory=dict)
    merge_policy: Mapping[str, Merge] = field(default_factory=dict)
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", MappingProxyType(dict(self.nodes)))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        object.__setattr__(self, "edge_types", MappingProxyType(dict(self.edge_types)))
        mp = {k: (Merge.parse(v) if isinstance(v, str) else v) for k, v in self.merge_policy.items()}
        object.__setattr__(self, "merge_policy", MappingProxyType(mp))

    @property
    def in_type(self) -> EdgeType:
        return self.source_type

    @property
    def out_type(self) -> EdgeType:
        return self.nodes[self.sink].out_type

    @property
    def is_linear(self) -> bool:
        return all(n.is_linear for n in self.nodes.values())

    def predecessors(self, node_id: str) -> list[str]:
        return sorted((a for a, b in self.edges if b == node_id), key=natural_key)

    def successors(self, node_id: str) -> list[str]:
        return sorted((b for a, b in self.edges if a == node_id), key=natural_key)

    def order(self) -> list[str]:
        """Topological order of operator nodes, ties broken by natural id order."""
        if "order" not in self._cache:
            order = topological_order(self)
            if order is None:
                raise CompositionError(f"graph {self.name or ''} has a cycle")
            self._cache["order"] = order
        return self._cache["order"]

    def kinds(self) -> list[Kind]:
        return [self.nodes[i].kind for i in self.order()]

    def chain_string(self) -> str:
        return " → ".join(self.nodes[i].symbol for i in self.order())

    def forward(self, x):
        from opgraph.graph_ir.compose import compose
        return compose(self, x)

    def adjoint(self, y, x_op=None):
        from opgraph.graph_ir.compose import compose_adjoint
        return compose_adjoint(self, y, x_op)

    def replace_node(self, node_id: str, node: PrimitiveNode) -> "OperatorGraph":
        nodes = dict(self.nodes)
        nodes[node_id] = node
        return OperatorGraph(self.source_type, nodes, self.edges, self.sink,
                             self.edge_types, self.merge_policy, self.name)


def topological_order(g: OperatorGraph) -> Optional[list[str]]:
    indeg = {n: 0 for n in g.nodes}
    for a, b in g.edges:
        if b in indeg and (a in g.nodes or a == SOURCE):
            indeg[b] += 1
    succ: dict[str, list[str]] = {}
    for a, b in g.edges:
        succ.setdefault(a, []).append(b)
    heap = []
    for b in succ.get(SOURCE, []):
        if b in indeg:
            indeg[b] -= 1
    for n, d in indeg.items():
        if d == 0:
            heapq.heappush(heap, (natural_key(n), n))
    out = []
    while heap:
        _, n = heapq.heappop(heap)
        out.append(n)
        for b in succ.get(n, []):
            if b in indeg:
                indeg[b] -= 1
                if indeg[b] == 0:
                    heapq.heappush(heap, (natural_key(b), b))
    return out if len(out) == len(g.nodes) else None


def merged_type(g: OperatorGraph, node_id: str, in_types: Sequence[EdgeType]) -> EdgeType | str:
    """Type after applying the fan-in rule, or an error message."""
    if len(in_types) == 1:
        return in_types[0]
    units = {t.units for t in in_types}
    if len(units) > 1:
        return f"fan-in at {node_id!r} mixes units {sorted(units)}"
    pol = g.merge_policy.get(node_id)
    if pol is None:
        return f"node {node_id!r} has {len(in_types)} inputs but no merge policy"
    first = in_types[0]
    if pol.mode == "sum":
        if any(t.shape != first.shape or t.axes != first.axes for t in in_types):
            return f"sum merge at {node_id!r} needs identical shapes"
        return first.replace(dtype="complex128" if any(t.is_complex for t in in_types) else first.dtype)
    if pol.axis not in first.axes:
        return f"concat axis {pol.axis!r} missing at {node_id!r}"
    ax = first.axis_index(pol.axis)
    for t in in_types:
        if t.axes != first.axes or t.dtype != first.dtype or \
                any(a != b for i, (a, b) in enumerate(zip(t.shape, first.shape)) if i != ax):
            return f"concat merge at {node_id!r} needs inputs matching off the concat axis"
    shape = list(first.shape)
    shape[ax] = sum(t.shape[ax] for t in in_types)
    return first.replace(shape=tuple(shape))


def validate(g: OperatorGraph, nmax: int | None = None, dmax: int | None = None) -> list[Violation]:
    """Well-formedness violations; empty iff the graph is well formed.

    When ``nmax``/``dmax`` are given, complexity bounds are checked as well.
    """
    out: list[Violation] = []
    ids = set(g.nodes)
    if SOURCE in ids:
        out.append(Violation("terminal", "an operator node uses the reserved id 'source'", SOURCE))
    for nid, node in g.nodes.items():
        if not isinstance(node, PrimitiveNode) or not isinstance(node.kind, Kind):
            out.append(Violation("unknown_kind", f"node {nid!r} is not a library primitive", nid))
    for e in g.edges:
        a, b = e
        if (a not in ids and a != SOURCE) or b not in ids:
            out.append(Violation("edge_endpoint", f"edge {a}->{b} references an unknown node", e))
    if len(set(g.edges)) != len(g.edges):
        out.append(Violation("edge_endpoint", "duplicate edges", None))
    if any(b == SOURCE for _, b in g.edges):
        out.append(Violation("terminal", "the source terminal has incoming edges", SOURCE))
    if not any(a == SOURCE for a, _ in g.edges):
        out.append(Violation("terminal", "the source terminal feeds no node", SOURCE))
    if g.sink not in ids:
        out.append(Violation("terminal", f"sink {g.sink!r} is not a node", g.sink))
    else:
        if g.successors(g.sink):
            out.append(Violation("terminal", f"sink {g.sink!r} has outgoing edges", g.sink))
    for nid in ids:
        if nid != g.sink and not g.successors(nid):
            out.append(Violation("terminal", f"node {nid!r} has no outgoing edges but is not the sink", nid))
        if not g.predecessors(nid):
            out.append(Violation("terminal", f"node {nid!r} has no inputs", nid))
    if topological_order(g) is None:
        out.append(Violation("acyclicity", "the graph contains a cycle", None))
    if any(v.rule in ("edge_endpoint", "unknown_kind") for v in out):
        return out

    def producer_type(a):
        return g.source_type if a == SOURCE else g.nodes[a].out_type

    for e in g.edges:
        a, b = e
        declared = g.edge_types.get(e)
        produced = producer_type(a)
        if declared is None:
            out.append(Violation("type_mismatch", f"edge {a}->{b} has no declared type", e))
            declared = produced
        elif declared != produced:
            out.append(Violation("type_mismatch", f"edge {a}->{b}: producer emits {_fmt(produced)}, "
                                                   f"edge declares {_fmt(declared)}", e))
    for nid, node in g.nodes.items():
        preds = g.predecessors(nid)
        if not preds:
            continue
        in_types = [g.edge_types.get((p, nid), producer_type(p)) for p in preds]
        mt = merged_type(g, nid, in_types)
        if isinstance(mt, str):
            rule = "merge_units" if "units" in mt else "merge"
            out.append(Violation(rule, mt, nid))
        elif mt != node.in_type:
            if len(preds) == 1:
                where, loc = f"edge {preds[0]}->{nid}", (preds[0], nid)
            else:
                where, loc = f"merge into {nid}", nid
            out.append(Violation("type_mismatch", f"{where}: carries {_fmt(mt)}, "
                                                   f"node expects {_fmt(node.in_type)}", loc))
    extra = set(g.merge_policy) - {n for n in ids if len(g.predecessors(n)) > 1}
    for nid in sorted(extra):
        out.append(Violation("merge", f"merge policy on {nid!r}, which has a single input", nid))
    if (nmax is not None or dmax is not None) and not any(v.rule == "acyclicity" for v in out):
        st = stats(g)
        if nmax is not None and st.n_nodes > nmax:
            out.append(Violation("complexity", f"{st.n_nodes} nodes > N_max = {nmax}", None))
        if dmax is not None and st.depth > dmax:
            out.append(Violation("complexity", f"depth {st.depth} > D_max = {dmax}", None))
    return out


def _fmt(t: EdgeType) -> str:
    return f"{t.dtype}{list(t.shape)}[{t.units}]"


def stats(g: OperatorGraph) -> GraphStats:
    """Operator-node count (terminal excluded) and longest path length in nodes."""
    depth: dict[str, int] = {}
    for nid in g.order():
        preds = g.predecessors(nid)
        depth[nid] = 1 + max((depth[p] for p in preds if p != SOURCE), default=0)
    return GraphStats(len(g.nodes), max(depth.values(), default=0))


class GraphBuilder:
    """Incremental construction with edge types filled in from node types.

    >>> b = GraphBuilder(EdgeType((4, 4)))
    >>> _ = b.add("n1", Kind.MODULATE, ModulateParams(np.ones((4, 4))))
    >>> g = b.build()
    """

    def __init__(self, source_type: EdgeType, name: str = ""):
        self.source_type = source_type
        self.name = name
        self.nodes: dict[str, PrimitiveNode] = {}
        self.edges: list[tuple[str, str]] = []
        self.merge: dict[str, Merge] = {}
        self._last = SOURCE

    def type_of(self, node_id: str) -> EdgeType:
        return self.source_type if node_id == SOURCE else self.nodes[node_id].out_type

    def add(self, node_id: str, kind, params, inputs: Iterable[str] | None = None,
            merge: Merge | str | None = None, out_units: str | None = None) -> PrimitiveNode:
        if node_id in self.nodes or node_id == SOURCE:
            raise ParamError(f"duplicate node id {node_id!r}")
        inputs = [self._last] if inputs is None else list(inputs)
        if len(inputs) > 1:
            merge = Merge.parse(merge) if isinstance(merge, str) else (merge or Merge())
            self.merge[node_id] = merge
            tmp = OperatorGraph(self.source_type, {}, (), "", merge_policy={node_id: merge})
            in_type = merged_type(tmp, node_id, [self.type_of(i) for i in sorted(inputs, key=natural_key)])
            if isinstance(in_type, str):
                raise ParamError(in_type)
        else:
            in_type = self.type_of(inputs[0])
        node = PrimitiveNode(kind, params, in_type, out_units)
        self.nodes[node_id] = node
        self.edges.extend((i, node_id) for i in inputs)
        self._last = node_id
        return node

    def build(self, sink: str | None = None) -> OperatorGraph:
        types = {(a, b): self.type_of(a) for a, b in self.edges}
        return OperatorGraph(self.source_type, self.nodes, tuple(self.edges), sink or self._last,
                             types, self.merge, self.name)


def chain(source_type: EdgeType, stages: Sequence[tuple], name: str = "") -> OperatorGraph:
    """Linear chain from ``(kind, params)`` or ``(kind, params, out_units)`` tuples."""
    b = GraphBuilder(source_type, name)
    for i, st in enumerate(stages, 1):
        kind, params = st[0], st[1]
        units = st[2] if len(st) > 2 else None
        b.add(f"n{i}", kind, params, out_units=units)
    return b.build()
