"""Power-iteration operator norms and closed-form per-stage norms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from opgraph.metrics.linmap import as_linear_map
from opgraph.operators import Kind, PrimitiveNode


@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    converged: bool
    restarts: int = 0


def _run(A, t, rng, tol, max_iter):
    v = t.random(rng)
    v /= np.linalg.norm(v)
    prev = None
    for it in range(1, max_iter + 1):
        Av = np.asarray(A.forward(v))
        est = float(np.linalg.norm(Av))
        if est == 0.0:
            return 0.0, it, True
        w = np.asarray(A.adjoint(Av))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return est, it, True
        v = w / nw
        if prev is not None and abs(est - prev) <= tol * est:
            # one more half-step: ||A^H A v|| / ||A v|| >= ||A v|| tightens the estimate
            return max(est, float(math.sqrt(nw))), it, True
        prev = est
    return est, max_iter, False


def power_iteration(op, input_type=None, tol: float = 1e-8, max_iter: int = 500,
                    seed: int = 0, x_op=None) -> NormEstimate:
    """Largest singular value via power iteration on A^H A; restarts once if not converged."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = as_linear_map(op, x_op)
    t = input_type or A.in_type
    rng = np.random.default_rng(seed)
    val, it, ok = _run(A, t, rng, tol, max_iter)
    if ok:
        return NormEstimate(val, it, True)
    val2, it2, ok2 = _run(A, t, rng, tol, max_iter)
    return NormEstimate(max(val, val2), it + it2, ok2, restarts=1)


def operator_norm(op, input_type=None, tol: float = 1e-8, max_iter: int = 500,
                  seed: int = 0, x_op=None) -> float:
    return power_iteration(op, input_type, tol, max_iter, seed, x_op).value


def stage_norm(node: PrimitiveNode, seed: int = 0) -> float:
    """Exact operator norm where a closed form exists, power iteration otherwise."""
    k, p, t = node.kind, node.params, node.in_type
    if k is Kind.MODULATE:
        out = node.out_type
        m2 = np.broadcast_to(np.abs(p.m) ** 2, out.shape)
        lead = out.ndim - t.ndim
        s = m2.sum(axis=tuple(range(lead))) if lead else m2
        red = tuple(i for i, (a, b) in enumerate(zip(t.shape, s.shape)) if a == 1 and b != 1)
        if red:
            s = s.sum(axis=red)
        return float(math.sqrt(s.max()))
    if k in (Kind.DISPERSE, Kind.SAMPLE):
        return 1.0
    if k is Kind.ACCUMULATE:
        return float(math.sqrt(np.prod([t.extent(a) for a in p.axis])))
    if k is Kind.PROPAGATE:
        from opgraph.operators import propagating_band
        return 1.0 if propagating_band(p, *t.shape[-2:]).any() else 0.0
    if k is Kind.DETECT:
        if node.jacobian and not p.is_linear:
            from opgraph.operators.primitives import Detect
            return float(np.max(np.abs(Detect.weight(p, p.x_op) * p.x_op)))
        if p.family == "linear_field":
            return p.g
        if p.family == "coherent_field":
            return p.g if t.is_complex else p.g * abs(math.cos(p.phi))
    if k is Kind.TRANSFORM and node.jacobian:
        from opgraph.operators.primitives import Transform
        if p.family == "wrap" and t.is_complex:
            return float(np.max(1.0 / np.abs(p.x_op)))
        d, _ = Transform.derivative(p, p.x_op)
        return float(np.max(np.abs(d)))
    return operator_norm(node, seed=seed)
