"""Relative fidelity error between a reference model and a graph."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np

from opgraph.errors import ComparisonError

DELTA = 1e-8


@dataclass(frozen=True)
class FidelityReport:
    e_sup: float
    e_mean: float
    e_std: float
    n_test: int
    delta_guard: float = DELTA
    per_object: tuple[float, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_object"] = list(self.per_object)
        return d


def _callable(h) -> Callable:
    if callable(h) and not hasattr(h, "forward"):
        return h
    return lambda x: h.forward(x)


def e_img(H_ref, H_G, test_set: Iterable[np.ndarray], delta: float = DELTA) -> FidelityReport:
    """Per-object ||H_ref x - H_G x|| / (||H_ref x|| + delta), with sup, mean and std."""
    ref, cand = _callable(H_ref), _callable(H_G)
    ratios = []
    for i, x in enumerate(test_set):
        a = np.asarray(ref(x))
        b = np.asarray(cand(x))
        if a.shape != b.shape:
            raise ComparisonError(f"test object {i}: reference output {a.shape} vs graph output {b.shape}")
        ratios.append(float(np.linalg.norm(a - b) / (np.linalg.norm(a) + delta)))
    if not ratios:
        raise ComparisonError("empty test set")
    r = np.array(ratios)
    return FidelityReport(float(r.max()), float(r.mean()), float(r.std()), len(r), delta, tuple(ratios))
