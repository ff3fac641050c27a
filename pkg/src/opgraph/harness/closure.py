"""Frozen-library closure test."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from opgraph.graph_ir import stats
from opgraph.harness.protocol import SEARCH_SIZES, modality_fidelity, search_target
from opgraph.harness.search import SearchBudget, extension_search
from opgraph.operators import Kind
from opgraph.registry import get_record, load_registry

EPSILON = 0.01

# the library as it stood after the first seven modalities
FROZEN_9 = frozenset({Kind.CONVOLVE, Kind.DETECT, Kind.PROJECT, Kind.MODULATE, Kind.ACCUMULATE,
                      Kind.PROPAGATE, Kind.ENCODE, Kind.SAMPLE, Kind.DISPERSE})


def chain_kinds(chain: str) -> frozenset:
    out = set()
    for tok in chain.replace("→", " ").replace("+", " ").split():
        out.add(Kind.parse(tok))
    return frozenset(out)


def closure_modalities() -> list[str]:
    return sorted(r.name for r in load_registry() if r.closure)


def parse_kinds(items: Iterable[str]) -> frozenset:
    return frozenset(Kind.parse(s) for s in items if s.strip())


@dataclass
class ClosureRow:
    modality: str
    tier: str
    method: str
    chain: str
    n_nodes: int
    depth: int
    e_mean: float
    e_sup: float
    expected: Optional[float]
    missing_kinds: list = field(default_factory=list)
    new_primitive: bool = False
    upper_bound: bool = False
    search: Optional[dict] = None

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "search"}
        if self.search is not None:
            d["search"] = self.search
        return d


def closure_test(frozen_kinds, modalities: Optional[Iterable[str]] = None, seed: int = 0,
                 epsilon: float = EPSILON, budget: Optional[SearchBudget] = None) -> dict:
    """Evaluate each modality with only ``frozen_kinds`` available.

    A modality whose registry chain fits inside the frozen set is measured
    through its template; otherwise the best chain the bounded search finds
    over the frozen kinds stands in, and its error is an upper bound.
    """
    frozen = parse_kinds(frozen_kinds) if not all(isinstance(k, Kind) for k in frozen_kinds) \
        else frozenset(frozen_kinds)
    if not frozen:
        raise ValueError("frozen kind set must not be empty")
    names = sorted(modalities) if modalities is not None else closure_modalities()
    budget = budget or SearchBudget()
    budget = SearchBudget(**{**budget.to_dict(), "allowed_kinds": frozen & budget.allowed_kinds})
    rows = []
    t0 = time.perf_counter()
    for name in names:
        rec = get_record(name)
        kinds = chain_kinds(rec.chain)
        missing = sorted(k.symbol for k in kinds - frozen)
        if not missing:
            rep = modality_fidelity(name, seed=seed)
            g = rec.build(seed=seed)
            st = stats(g)
            rows.append(ClosureRow(name, rec.tier, "template", rec.chain, st.n_nodes, st.depth,
                                   rep.e_mean, rep.e_sup, rec.expected_e_img, missing,
                                   rep.e_mean > epsilon))
        else:
            res = extension_search(search_target(name, SEARCH_SIZES.get(name), seed), budget, seed)
            n = len(res.graph.nodes) if res.graph is not None else 0
            d = stats(res.graph).depth if res.graph is not None else 0
            rows.append(ClosureRow(name, rec.tier, "search", res.chain, n, d, res.min_e_img, res.e_sup,
                                   rec.expected_e_img, missing, res.min_e_img > epsilon, True,
                                   res.to_dict()))
    return {
        "frozen_kinds": sorted(k.symbol for k in frozen),
        "seed": seed,
        "epsilon": epsilon,
        "rows": [r.to_dict() for r in rows],
        "flagged": [r.modality for r in rows if r.new_primitive],
        "seconds": round(time.perf_counter() - t0, 3),
    }
