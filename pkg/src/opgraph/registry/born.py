"""Born-Neumann unrolling into finite primitive chains."""

from __future__ import annotations

import numpy as np

from opgraph.errors import ComplexityError, ParamError
from opgraph.field import COMPLEX, EdgeType
from opgraph.graph_ir import OperatorGraph, chain, compose, stats
from opgraph.graph_ir.graph import N_MAX
from opgraph.operators import Kind, ModulateParams, PropagateParams, ScatterParams, materialize


def born_unroll(L: int, scatter: ScatterParams, prop: PropagateParams, mod: ModulateParams,
                in_type: EdgeType, nmax: int = N_MAX, name: str = "") -> OperatorGraph:
    """Order-``L`` term ``(M∘R∘P)^L∘R∘M`` as a chain of ``3L + 2`` nodes.

    Evaluation order is M, R, then L repetitions of P, R, M.
    """
    if L < 0:
        raise ParamError("Born order must be non-negative")
    n = 3 * L + 2
    if n > nmax:
        raise ComplexityError(f"order {L} needs {n} nodes, above N_max = {nmax}")
    stages = [(Kind.MODULATE, mod), (Kind.SCATTER, scatter)]
    stages += [(Kind.PROPAGATE, prop), (Kind.SCATTER, scatter), (Kind.MODULATE, mod)] * L
    g = chain(in_type, stages, name or f"born_L{L}")
    assert stats(g).n_nodes == n
    return g


def born_residuals(x, scatter, prop, mod, in_type: EdgeType, orders=(0, 1, 2, 3)) -> list[float]:
    """Relative distance between partial Born sums and the dense self-consistent solution.

    The exact field solves ``u = (M∘R∘P) u + (R∘M) x`` on the complex field
    space; the partial sum of order L adds the terms of orders 0..L.
    """
    if not in_type.is_complex:
        in_type = in_type.replace(dtype=COMPLEX)
        x = np.asarray(x, dtype=np.complex128)
    g0 = born_unroll(0, scatter, prop, mod, in_type)
    b = compose(g0, x).ravel()
    loop = chain(g0.out_type, [(Kind.PROPAGATE, prop), (Kind.SCATTER, scatter), (Kind.MODULATE, mod)])
    A = materialize(loop)
    u = np.linalg.solve(np.eye(A.shape[0]) - A, b)
    out, partial = [], np.zeros_like(b)
    done = -1
    for L in sorted(orders):
        for k in range(done + 1, L + 1):
            partial = partial + compose(born_unroll(k, scatter, prop, mod, in_type), x).ravel()
        done = L
        out.append(float(np.linalg.norm(u - partial) / np.linalg.norm(u)))
    return out
