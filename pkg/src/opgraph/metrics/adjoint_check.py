"""Randomized adjoint consistency (dot) test."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from opgraph.metrics.linmap import as_linear_map

THRESHOLD = 1e-6
EPS_GUARD = 1e-8


@dataclass(frozen=True)
class DotTestReport:
    trials: int
    max_rel_err: float
    epsilon_guard: float = EPS_GUARD
    seed: int = 0
    per_trial: tuple[float, ...] = field(default=(), repr=False)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < THRESHOLD

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_trial"] = list(self.per_trial)
        d["threshold"] = THRESHOLD
        d["passed"] = self.passed
        return d


def dot_test(op, input_type=None, trials: int = 20, seed: int = 0,
             x_op=None, epsilon_guard: float = EPS_GUARD) -> DotTestReport:
    """max over trials of |<Ax,y> - <x,A^H y>| / max(|<Ax,y>|, guard)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    A = as_linear_map(op, x_op)
    t = input_type or A.in_type
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(trials):
        x = t.random(rng)
        y = A.out_type.random(rng)
        lhs = A.inner(np.asarray(A.forward(x)), y)
        rhs = A.inner(x, np.asarray(A.adjoint(y)))
        errs.append(float(abs(lhs - rhs) / max(abs(lhs), epsilon_guard)))
    return DotTestReport(trials, max(errs), epsilon_guard, seed, tuple(errs))
