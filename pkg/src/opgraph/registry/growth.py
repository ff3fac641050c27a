"""Cumulative primitive count along the registry's introduction order."""

from __future__ import annotations

from dataclasses import dataclass

from opgraph.operators import Kind
from opgraph.registry.records import load_registry


@dataclass(frozen=True)
class GrowthStep:
    N: int
    K: int
    modality: str
    introduced: tuple[str, ...]

    def to_row(self) -> dict:
        return {"N": self.N, "K": self.K, "introduced_kinds": " ".join(self.introduced)}


_ORDER = {k: i for i, k in enumerate(Kind)}


def basis_growth(records=None) -> list[GrowthStep]:
    """One step per modality: the running number of distinct kinds and the new ones.

    Kinds are read from each record's declared chain so the curve does not
    depend on graph construction.
    """
    recs = load_registry() if records is None else sorted(records, key=lambda r: r.intro_order)
    seen: set[Kind] = set()
    out = []
    for rec in recs:
        kinds = {Kind.parse(tok.strip()) for tok in rec.chain.replace("+", "→").split("→")}
        new = sorted(kinds - seen, key=_ORDER.get)
        seen |= kinds
        out.append(GrowthStep(rec.intro_order, len(seen), rec.name, tuple(k.symbol for k in new)))
    return out
