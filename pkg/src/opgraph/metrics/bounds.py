"""Telescoping composition error bounds and their empirical check."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from opgraph.errors import ParamError
from opgraph.metrics.linmap import LinearMap, as_linear_map
from opgraph.metrics.norms import power_iteration, stage_norm
from opgraph.operators import Kind, PrimitiveNode, propagating_band

B_DEFAULT = 4.0


@dataclass(frozen=True)
class BoundInputs:
    """Per-stage ``(epsilon_k, gamma_k)`` or ``(epsilon_k, gamma_k, gamma_tilde_k)``.

    ``gamma_k`` is the norm (or Lipschitz constant) of the exact stage and
    ``gamma_tilde_k`` that of its approximation; it defaults to ``gamma_k``.
    """

    per_stage: Sequence[tuple]
    B: float = B_DEFAULT
    H_norm: float | None = None

    def __post_init__(self):
        rows = []
        for row in self.per_stage:
            if len(row) not in (2, 3):
                raise ParamError("per-stage entries are (eps, gamma) or (eps, gamma, gamma_tilde)")
            eps, gam = float(row[0]), float(row[1])
            gt = float(row[2]) if len(row) == 3 else gam
            if min(eps, gam, gt) < 0:
                raise ParamError("bound inputs must be non-negative")
            rows.append((eps, gam, gt))
        object.__setattr__(self, "per_stage", tuple(rows))

    @property
    def K(self) -> int:
        return len(self.per_stage)


@dataclass(frozen=True)
class BoundResult:
    absolute: float
    relative: float | None
    loose_absolute: float
    loose_relative: float | None
    terms: tuple[float, ...]


def composition_bound(b: BoundInputs) -> BoundResult:
    """Sharp telescoping sum and the uniform ``K * max(eps) * B^(K-1)`` form.

    Term k is ``prod_{j>k} gamma_tilde_j * eps_k * prod_{j<k} gamma_j``.
    """
    eps = [r[0] for r in b.per_stage]
    gam = [r[1] for r in b.per_stage]
    gtl = [r[2] for r in b.per_stage]
    terms = []
    for k in range(b.K):
        down = math.prod(gtl[k + 1:])
        up = math.prod(gam[:k])
        terms.append(down * eps[k] * up)
    absolute = float(sum(terms))
    loose = b.K * max(eps, default=0.0) * b.B ** (b.K - 1) if b.K else 0.0
    rel = lambda v: None if not b.H_norm else v / b.H_norm
    return BoundResult(absolute, rel(absolute), float(loose), rel(loose), tuple(terms))


# --- perturbations with exactly known operator-norm size -------------------

def perturb_modulate(node: PrimitiveNode, delta: np.ndarray) -> tuple[PrimitiveNode, float]:
    """Add ``delta`` to the pattern; eps is the exact norm of the difference."""
    if node.kind is not Kind.MODULATE:
        raise ParamError("perturb_modulate needs a modulate node")
    delta = np.asarray(delta)
    new = replace(node.params, m=node.params.m + delta)
    pert = PrimitiveNode(node.kind, new, node.in_type, node.out_units)
    diff = PrimitiveNode(node.kind, replace(node.params, m=delta), node.in_type, node.out_units)
    return pert, stage_norm(diff)


def perturb_gain(node: PrimitiveNode, eta: float) -> tuple[PrimitiveNode, float]:
    """Scale a detect node's gain by ``1 + eta``; eps = |eta| * ||node||."""
    if node.kind is not Kind.DETECT:
        raise ParamError("perturb_gain needs a detect node")
    pert = PrimitiveNode(node.kind, replace(node.params, g=node.params.g * (1 + eta)),
                         node.in_type, node.out_units, node.jacobian, node.flags)
    return pert, abs(eta) * stage_norm(node)


def perturb_pixel_size(node: PrimitiveNode, eta: float, seed: int = 0) -> tuple[PrimitiveNode, float]:
    """Scale a projector's pixel size by ``1 + eta`` (the map scales linearly)."""
    if node.kind is not Kind.PROJECT:
        raise ParamError("perturb_pixel_size needs a project node")
    pert = PrimitiveNode(node.kind, replace(node.params, pixel_size=node.params.pixel_size * (1 + eta)),
                         node.in_type, node.out_units)
    return pert, abs(eta) * stage_norm(node, seed)


def perturb_distance(node: PrimitiveNode, dd: float) -> tuple[PrimitiveNode, float]:
    """Shift a propagation distance; eps = max over the band of |H(d) - H(d + dd)|."""
    if node.kind is not Kind.PROPAGATE:
        raise ParamError("perturb_distance needs a propagate node")
    from opgraph.operators.primitives import Propagate
    new = replace(node.params, d=node.params.d + dd)
    pert = PrimitiveNode(node.kind, new, node.in_type, node.out_units)
    ny, nx = node.in_type.shape[-2:]
    eps = float(np.max(np.abs(Propagate.transfer(node.params, ny, nx) - Propagate.transfer(new, ny, nx))))
    return pert, eps


@dataclass(frozen=True)
class BoundCheckReport:
    measured: float
    bound: float
    loose_bound: float
    passed: bool
    stages: tuple[str, ...]
    eps: tuple[float, ...]
    gamma: tuple[float, ...]
    gamma_tilde: tuple[float, ...]
    rel_tol: float

    def to_dict(self) -> dict:
        return asdict(self)


def bound_check(g, perturbations: Mapping[str, tuple[PrimitiveNode, float]], x_op=None,
                B: float = B_DEFAULT, seed: int = 0, rel_tol: float = 1e-6,
                norms: Mapping[str, float] | None = None) -> BoundCheckReport:
    """Measure ||H - H_pert|| by power iteration and compare with the sharp bound.

    ``g`` must be a chain; nonlinear nodes are linearized at ``x_op`` first and
    the perturbed nodes are expected to be linear (e.g. built from the
    linearized graph). ``perturbations`` maps node id to ``(new_node, eps)``.
    ``norms`` may supply precomputed stage norms of the unperturbed graph.
    """
    from opgraph.graph_ir import linearize_graph
    if not g.is_linear:
        if x_op is None:
            raise ParamError("bound_check on a nonlinear graph needs x_op")
        g = linearize_graph(g, x_op)
    order = g.order()
    if any(len(g.predecessors(n)) != 1 for n in order) or len(set(a for a, _ in g.edges)) != len(g.edges):
        raise ParamError("bound_check supports chain graphs only")
    gp = g
    for nid, (node, _) in perturbations.items():
        gp = gp.replace_node(nid, node)
    norms = dict(norms or {})
    gam, gtl, eps = [], [], []
    for i, nid in enumerate(order):
        gk = norms.get(nid)
        if gk is None:
            gk = stage_norm(g.nodes[nid], seed + i)
        gam.append(gk)
        if nid in perturbations:
            gtl.append(stage_norm(gp.nodes[nid], seed + 100 + i))
            eps.append(float(perturbations[nid][1]))
        else:
            gtl.append(gk)
            eps.append(0.0)
    res = composition_bound(BoundInputs(list(zip(eps, gam, gtl)), B))
    diff = as_linear_map(g).minus(as_linear_map(gp))
    measured = power_iteration(diff, seed=seed).value if any(eps) or perturbations else 0.0
    passed = measured <= res.absolute * (1 + rel_tol) + 1e-300
    return BoundCheckReport(measured, res.absolute, res.loose_absolute, passed,
                            tuple(order), tuple(eps), tuple(gam), tuple(gtl), rel_tol)
