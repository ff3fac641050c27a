"""Modality records loaded from the shipped registry file."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import yaml

from opgraph.errors import ParamError, UnknownModalityError
from opgraph.graph_ir import OperatorGraph, stats, validate
from opgraph.graph_ir.graph import SOURCE
from opgraph.modality_params import modality_parameters
from opgraph.registry.builders import BUILDERS, build_graph

CARRIERS = ("photon", "electron", "spin", "acoustic", "xray", "neutron", "thz", "rf", "particle")
TIERS = ("full", "held_out", "exotic", "template", "nonlinear", "auxiliary")


@dataclass(frozen=True)
class ModalityRecord:
    name: str
    carrier: str
    tier: str
    table: str
    chain: str
    n_nodes: int
    depth: int
    expected_e_img: Optional[float]
    detect_family: int
    intro_order: Optional[int]
    closure: bool
    sizes: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.carrier not in CARRIERS:
            raise ParamError(f"{self.name}: unknown carrier {self.carrier!r}")
        if self.tier not in TIERS:
            raise ParamError(f"{self.name}: unknown tier {self.tier!r}")
        if not 1 <= self.detect_family <= 5:
            raise ParamError(f"{self.name}: detect family must be 1..5")
        if self.name not in BUILDERS:
            raise ParamError(f"{self.name}: no graph builder")

    def bind(self, sizes: dict | None = None) -> dict:
        bound = dict(self.sizes)
        if sizes:
            unknown = set(sizes) - set(bound) - {"patterns", "positions", "alpha", "drive", "effects"}
            if unknown:
                raise ParamError(f"{self.name}: unknown size keys {sorted(unknown)}")
            bound.update(sizes)
        return bound

    def parameters(self, sizes: dict | None = None, seed: int = 0) -> dict:
        return modality_parameters(self.name, self.bind(sizes), seed)

    def build(self, sizes: dict | None = None, seed: int = 0) -> OperatorGraph:
        bound = self.bind(sizes)
        try:
            g = build_graph(self.name, bound, modality_parameters(self.name, bound, seed), self.detect_family)
        except (ValueError, TypeError) as exc:
            raise ParamError(f"{self.name}: sizes {bound} are not valid ({exc})") from exc
        bad = validate(g)
        if bad:
            raise ParamError(f"{self.name}: built graph is malformed: {bad[0]}")
        return g


@functools.lru_cache(maxsize=1)
def _load() -> dict[str, ModalityRecord]:
    text = resources.files("opgraph.registry").joinpath("data/registry.yaml").read_text(encoding="utf-8")
    out = {}
    for doc in yaml.safe_load_all(text):
        rec = ModalityRecord(**doc)
        if rec.name in out:
            raise ParamError(f"duplicate registry entry {rec.name!r}")
        out[rec.name] = rec
    return out


def load_registry(include_auxiliary: bool = False) -> list[ModalityRecord]:
    """Records sorted by introduction order; the auxiliary entries come last when asked for."""
    recs = list(_load().values())
    main = sorted((r for r in recs if r.intro_order is not None), key=lambda r: r.intro_order)
    if include_auxiliary:
        main += sorted((r for r in recs if r.intro_order is None), key=lambda r: r.name)
    return main


def get_record(name: str) -> ModalityRecord:
    try:
        return _load()[name]
    except KeyError:
        raise UnknownModalityError(f"unknown modality {name!r}") from None


def build_modality(name: str, sizes: dict | None = None, seed: int = 0) -> OperatorGraph:
    """Validated graph for ``name`` with ``sizes`` overriding the registry defaults."""
    return get_record(name).build(sizes, seed)


def render_chain(g: OperatorGraph) -> str:
    """Chain notation with nodes at the same depth joined by ``+``."""
    level = {SOURCE: 0}
    for nid in g.order():
        level[nid] = 1 + max(level[p] for p in g.predecessors(nid))
    groups: dict[int, list[str]] = {}
    for nid in g.order():
        groups.setdefault(level[nid], []).append(g.nodes[nid].symbol)
    return " → ".join(" + ".join(groups[k]) for k in sorted(groups))


def check_record(rec: ModalityRecord, sizes: dict | None = None, seed: int = 0) -> list[str]:
    """Mismatches between a record's declared chain/stats and its built graph."""
    g = rec.build(sizes, seed)
    st = stats(g)
    problems = []
    if (st.n_nodes, st.depth) != (rec.n_nodes, rec.depth):
        problems.append(f"stats {(st.n_nodes, st.depth)} != declared {(rec.n_nodes, rec.depth)}")
    if render_chain(g) != rec.chain:
        problems.append(f"chain {render_chain(g)!r} != declared {rec.chain!r}")
    d = g.nodes[g.sink]
    if d.params.index != rec.detect_family:
        problems.append(f"detect family {d.params.index} != declared {rec.detect_family}")
    return problems
