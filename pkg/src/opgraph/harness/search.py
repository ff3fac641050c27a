"""Bounded search over chain graphs for the extension criterion.

Candidates are typed chains ending in a detector, drawn from a budget of
primitive kinds. Each candidate's continuous parameters are fitted to the
target's responses on the test objects (analytic gradients for pattern,
kernel and scatter blocks, central differences for scalars, L-BFGS-B with
seeded restarts, optional LSQR polish of blocks that enter the output
linearly). The best error found is an upper bound on the true minimum.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator, lsqr

from opgraph.errors import OpGraphError, ParamError
from opgraph.field import EdgeType
from opgraph.graph_ir import OperatorGraph, chain
from opgraph.graph_ir.graph import N_MAX
from opgraph.metrics import FidelityReport, e_img, s1_test_set
from opgraph.operators import (AccumulateParams, ConvolveParams, DetectParams, DisperseParams,
                               EncodeParams, Kind, ModulateParams, PrimitiveNode, ProjectParams,
                               PropagateParams, SampleParams, ScatterParams, TransformParams)
from opgraph.operators.primitives import IMPLS

ALL = frozenset(Kind)
_BAD = 1e6


@dataclass(frozen=True)
class SearchBudget:
    """Limits on the search.

    ``param_fit="closed_form"`` adds the LSQR polish to the iterative fit;
    ``"iterative"`` uses L-BFGS-B alone. ``eval_cap`` bounds the number of
    screened candidates; above it the search grows chains by single-stage
    insertions from the best ``beam_width`` survivors of each length.
    """

    max_nodes: int = 4
    allowed_kinds: frozenset = ALL
    param_fit: str = "closed_form"
    restarts: int = 2
    eval_cap: int = 400
    screen_iters: int = 30
    refine_iters: int = 300
    refine_top: int = 5
    beam_width: int = 8
    kernel_max: int = 15
    time_limit: float = 600.0

    def __post_init__(self):
        kinds = frozenset(Kind.parse(k) if isinstance(k, str) else Kind(k) for k in self.allowed_kinds)
        object.__setattr__(self, "allowed_kinds", kinds)
        if not kinds:
            raise ParamError("allowed_kinds must not be empty")
        if Kind.DETECT not in kinds:
            raise ParamError("allowed_kinds must include detect")
        if not 1 <= self.max_nodes <= N_MAX:
            raise ParamError(f"max_nodes must be in 1..{N_MAX}")
        if self.param_fit not in ("closed_form", "iterative"):
            raise ParamError("param_fit is 'closed_form' or 'iterative'")

    def without(self, *kinds) -> "SearchBudget":
        drop = {Kind.parse(k) if isinstance(k, str) else k for k in kinds}
        return _replace(self, allowed_kinds=self.allowed_kinds - drop)

    def to_dict(self) -> dict:
        return {"max_nodes": self.max_nodes,
                "allowed_kinds": sorted(k.value for k in self.allowed_kinds),
                "param_fit": self.param_fit, "restarts": self.restarts, "eval_cap": self.eval_cap,
                "screen_iters": self.screen_iters, "refine_iters": self.refine_iters,
                "refine_top": self.refine_top, "beam_width": self.beam_width}


def _replace(obj, **kw):
    import dataclasses
    return dataclasses.replace(obj, **kw)


@dataclass
class SearchTarget:
    """A reference forward map with its input type and fitting objects.

    ``hints`` carries acquisition geometry the search may reuse: ``project``
    (dict of ProjectParams fields) and ``omega`` (sample indices).
    """

    name: str
    in_type: EdgeType
    fn: Callable[[np.ndarray], np.ndarray]
    objects: list = field(default_factory=list)
    hints: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.objects:
            self.objects = s1_test_set(self.in_type, 0)
        self.outputs = [np.asarray(self.fn(x)) for x in self.objects]
        self.out_shape = self.outputs[0].shape
        self.out_complex = bool(np.iscomplexobj(self.outputs[0]))


# -- parametrised stages ---------------------------------------------------

class Slot:
    """One stage of a candidate: a kind plus a map from a real vector to params."""

    kind: Kind
    n: int = 0
    scalar = False

    def __init__(self, label: str):
        self.label = label

    def params(self, theta):
        raise NotImplementedError

    def init(self, rng, jitter):
        return np.zeros(self.n)

    def grad(self, theta, u, c, node):
        return None


def _cplx(theta, shape, complex_):
    if complex_:
        k = len(theta) // 2
        return (theta[:k] + 1j * theta[k:]).reshape(shape)
    return theta.reshape(shape)


def _split(G, complex_):
    return np.concatenate([G.real.ravel(), G.imag.ravel()]) if complex_ else G.real.ravel()


class ModSlot(Slot):
    kind = Kind.MODULATE

    def __init__(self, t: EdgeType):
        super().__init__("M")
        self.shape, self.cx = t.shape, t.is_complex
        self.n = t.size * (2 if self.cx else 1)

    def params(self, theta):
        return ModulateParams(_cplx(theta, self.shape, self.cx))

    def init(self, rng, jitter):
        base = np.ones(int(np.prod(self.shape)))
        th = np.concatenate([base, np.zeros_like(base)]) if self.cx else base
        return th + jitter * rng.standard_normal(self.n)

    def grad(self, theta, u, c, node):
        G = c * np.conj(u)
        extra = G.ndim - len(self.shape)
        return _split(G.sum(axis=tuple(range(extra))) if extra else G, self.cx)


def _shift_pairs(n, d):
    """Slices (src, dst) realising dst[i] = src[i - d] with zero fill."""
    if d >= 0:
        return slice(0, n - d), slice(d, n)
    return slice(-d, n), slice(0, n + d)


class ConvSlot(Slot):
    kind = Kind.CONVOLVE

    def __init__(self, t: EdgeType, axes: tuple[str, ...], kshape: tuple[int, ...]):
        super().__init__(f"C[{','.join(axes)}]")
        self.axes, self.kshape, self.cx = axes, kshape, t.is_complex
        self.idx = [t.axis_index(a) - t.ndim for a in axes]
        self.n = int(np.prod(kshape)) * (2 if self.cx else 1)

    def params(self, theta):
        return ConvolveParams(_cplx(theta, self.kshape, self.cx), self.axes)

    def init(self, rng, jitter):
        h = np.zeros(self.kshape)
        h[tuple(k // 2 for k in self.kshape)] = 1.0
        th = np.concatenate([h.ravel(), np.zeros(h.size)]) if self.cx else h.ravel()
        return th + jitter * rng.standard_normal(self.n)

    def grad(self, theta, u, c, node):
        G = np.zeros(self.kshape, dtype=np.complex128)
        cu = np.conj(u)
        for k in itertools.product(*(range(n) for n in self.kshape)):
            src = [slice(None)] * u.ndim
            dst = [slice(None)] * u.ndim
            for ax, kk, n in zip(self.idx, k, self.kshape):
                s, d = _shift_pairs(u.shape[ax], kk - (n - 1) // 2)
                src[ax], dst[ax] = s, d
            G[k] = np.sum(c[tuple(dst)] * cu[tuple(src)])
        return _split(G, self.cx)


class ScatterSlot(Slot):
    kind = Kind.SCATTER

    def __init__(self, t: EdgeType, axis: str):
        super().__init__(f"R[{axis}]")
        self.axis, self.ax, self.cx = axis, t.axis_index(axis) - t.ndim, t.is_complex
        self.m = t.shape[self.ax]
        self.n = self.m * self.m * (2 if self.cx else 1)

    def params(self, theta):
        return ScatterParams(_cplx(theta, (self.m, self.m), self.cx), self.axis)

    def init(self, rng, jitter):
        e = np.eye(self.m).ravel()
        th = np.concatenate([e, np.zeros_like(e)]) if self.cx else e
        return th + jitter * rng.standard_normal(self.n)

    def grad(self, theta, u, c, node):
        cm = np.moveaxis(c, self.ax, 0).reshape(self.m, -1)
        um = np.moveaxis(u, self.ax, 0).reshape(self.m, -1)
        return _split(cm @ np.conj(um).T, self.cx)


class FixedSlot(Slot):
    """A stage with no free parameters."""

    def __init__(self, kind: Kind, p, label: str):
        super().__init__(label)
        self.kind, self._p = kind, p

    def params(self, theta):
        return self._p


class PropSlot(Slot):
    kind = Kind.PROPAGATE
    n = 1
    scalar = True

    def __init__(self):
        super().__init__("P")

    def params(self, theta):
        return PropagateParams(float(theta[0]), 0.5)

    def init(self, rng, jitter):
        return np.array([1.0 + 4.0 * jitter * rng.random()])


class TransformSlot(Slot):
    kind = Kind.TRANSFORM
    scalar = True

    def __init__(self, family: str):
        super().__init__(f"Λ[{family}]")
        self.family = family
        self.n = {"exp_atten": 1, "log": 1, "wrap": 0, "poly": 4, "saturate": 2}[family]

    def params(self, theta):
        f, th = self.family, theta
        if f == "log":
            return TransformParams(f, (math.exp(float(th[0])),))
        if f == "saturate":
            return TransformParams(f, (float(th[0]), float(th[0]) + math.exp(float(th[1]))))
        return TransformParams(f, tuple(float(v) for v in th))

    def init(self, rng, jitter):
        base = {"exp_atten": [1.0], "log": [0.0], "wrap": [], "poly": [0.0, 1.0, 0.0, 0.0],
                "saturate": [-1.0, math.log(2.0)]}[self.family]
        return np.asarray(base, dtype=float) + jitter * rng.standard_normal(self.n)


class DetectSlot(Slot):
    kind = Kind.DETECT
    scalar = True

    def __init__(self, family: int):
        super().__init__(f"D{family}")
        self.family = family
        self.n = {1: 1, 2: 2, 3: 2, 4: 1, 5: 2}[family]

    def params(self, theta):
        g = math.exp(float(np.clip(theta[0], -700, 700)))
        if self.family in (1, 4):
            return DetectParams(self.family, g=g)
        if self.family == 2:
            return DetectParams(2, g=g, x0=math.exp(float(np.clip(theta[1], -700, 700))))
        if self.family == 3:
            return DetectParams(3, g=g, x0=float(theta[1]))
        return DetectParams(5, g=g, phi=float(theta[1]))

    def init(self, rng, jitter):
        return np.zeros(self.n) + jitter * rng.standard_normal(self.n)


# -- candidate enumeration ----------------------------------------------------

def _options(t: EdgeType, budget: SearchBudget, hints: dict) -> list[Slot]:
    allowed = budget.allowed_kinds
    out: list[Slot] = []
    if Kind.MODULATE in allowed:
        out.append(ModSlot(t))
    if Kind.CONVOLVE in allowed:
        for i, a in enumerate(t.axes):
            n = t.shape[i]
            if n >= 2:
                out.append(ConvSlot(t, (a,), (min(2 * n - 1, budget.kernel_max),)))
        if t.ndim >= 2 and min(t.shape[-2:]) >= 3:
            out.append(ConvSlot(t, t.axes[-2:], (5, 5) if min(t.shape[-2:]) >= 5 else (3, 3)))
    if Kind.PROPAGATE in allowed and t.ndim >= 2:
        out.append(PropSlot())
    if Kind.PROJECT in allowed and t.ndim >= 2 and "project" in hints:
        out.append(FixedSlot(Kind.PROJECT, ProjectParams(**hints["project"]), "Π"))
    if Kind.ENCODE in allowed and t.ndim >= 2:
        out.append(FixedSlot(Kind.ENCODE, EncodeParams.cartesian(*t.shape[-2:], normalize=True), "F"))
    if Kind.ACCUMULATE in allowed and t.ndim >= 2:
        out.extend(FixedSlot(Kind.ACCUMULATE, AccumulateParams(a), f"Σ[{a}]") for a in t.axes)
    if Kind.SAMPLE in allowed and "omega" in hints:
        om = np.asarray(hints["omega"])
        if om.size and om[-1] < t.size:
            out.append(FixedSlot(Kind.SAMPLE, SampleParams(om), "S"))
    if Kind.DISPERSE in allowed and t.ndim >= 3:
        n0 = t.shape[0]
        for alpha in (1.0, -1.0):
            out.append(FixedSlot(Kind.DISPERSE, DisperseParams(alpha, 0.0, np.arange(n0, dtype=float),
                                                               t.axes[-1], t.axes[0]), f"W[{alpha:+.0f}]"))
    if Kind.SCATTER in allowed and t.ndim >= 3:
        out.extend(ScatterSlot(t, a) for a in t.axes[:-2])
    if Kind.TRANSFORM in allowed:
        fams = ["exp_atten", "wrap", "poly"] + ([] if t.is_complex else ["log", "saturate"])
        out.extend(TransformSlot(f) for f in fams)
    return out


def _redundant(prev: Optional[Slot], nxt: Slot, used_lambda: set) -> bool:
    if prev is None:
        return False
    if prev.kind is nxt.kind and nxt.kind in (Kind.MODULATE, Kind.PROPAGATE, Kind.SCATTER):
        return True
    if prev.kind is Kind.CONVOLVE and nxt.kind is Kind.CONVOLVE:
        # same-axis kernels merge; distinct axes commute, keep one order
        return not (prev.idx[-1] < nxt.idx[0])
    if isinstance(nxt, TransformSlot) and nxt.family in used_lambda:
        return True
    return False


@dataclass
class Candidate:
    slots: tuple[Slot, ...]
    types: tuple[EdgeType, ...]

    @property
    def label(self) -> str:
        return " → ".join(s.label for s in self.slots)

    @property
    def prefix(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.slots[:-1])

    @property
    def n_params(self) -> int:
        return sum(s.n for s in self.slots)


def _infer(slot: Slot, t: EdgeType, cache: dict) -> Optional[EdgeType]:
    key = (slot.label, t)
    if key not in cache:
        try:
            p = slot.params(slot.init(np.random.default_rng(0), 0.0))
            cache[key] = IMPLS[slot.kind].infer(p, t)
        except (OpGraphError, ValueError, TypeError):
            cache[key] = None
    return cache[key]


def enumerate_candidates(target: SearchTarget, budget: SearchBudget) -> list[Candidate]:
    """Every pruned chain within the budget whose output type matches the target."""
    cache: dict = {}
    found: list[Candidate] = []
    opt_cache: dict = {}

    def opts(t):
        if t not in opt_cache:
            opt_cache[t] = _options(t, budget, target.hints)
        return opt_cache[t]

    def detectors(t):
        fams = [1, 2, 3, 4] + ([5] if t.is_complex else [])
        return [DetectSlot(f) for f in fams]

    def walk(slots, types, used):
        t = types[-1]
        for d in detectors(t):
            out = _infer(d, t, cache)
            if out is not None and out.shape == target.out_shape and out.is_complex == target.out_complex:
                found.append(Candidate(tuple(slots) + (d,), tuple(types) + (out,)))
        if len(slots) + 1 >= budget.max_nodes:
            return
        prev = slots[-1] if slots else None
        for s in opts(t):
            if _redundant(prev, s, used):
                continue
            out = _infer(s, t, cache)
            if out is None or out.size > 65536:
                continue
            u = used | ({s.family} if isinstance(s, TransformSlot) else set())
            walk(slots + [s], types + [out], u)

    walk([], [target.in_type], set())
    return found


# -- fitting ------------------------------------------------------------------

class _Fitter:
    """Loss and gradient of one candidate over the target's objects.

    The loss is the mean over objects of the squared relative error, which
    tracks the mean e_img. Chains without S evaluate all objects at once
    along a leading batch axis.
    """

    def __init__(self, cand: Candidate, target: SearchTarget):
        self.c, self.t = cand, target
        self.offsets = np.cumsum([0] + [s.n for s in cand.slots])
        n = len(target.objects)
        w = [1.0 / (n * max(float(np.vdot(y, y).real), 1e-30)) for y in target.outputs]
        self.batched = not any(s.kind is Kind.SAMPLE for s in cand.slots)
        if self.batched:
            t0 = cand.types[0]
            bt = EdgeType((n,) + t0.shape, t0.dtype, t0.units, ("batch",) + t0.axes)
            self.in_type = bt
            wb = np.asarray(w).reshape((n,) + (1,) * len(target.out_shape))
            self.groups = [(np.stack(target.objects), np.stack(target.outputs), wb)]
        else:
            self.in_type = cand.types[0]
            self.groups = list(zip(target.objects, target.outputs, w))
        self.evals = 0
        self.fd = [i for k, s in enumerate(cand.slots) if s.scalar
                   for i in range(self.offsets[k] + (1 if isinstance(s, DetectSlot) else 0), self.offsets[k + 1])]

    def parts(self, theta):
        return [theta[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def nodes(self, theta):
        out, t = [], self.in_type
        for s, th in zip(self.c.slots, self.parts(theta)):
            nd = PrimitiveNode(s.kind, s.params(th), t)
            if self.batched and nd.out_type.axes[0] != "batch":
                nd = _BatchFront(nd)
            out.append(nd)
            t = nd.out_type
        return out

    @staticmethod
    def forward(nodes, x, keep=False):
        us = [x]
        for nd in nodes:
            us.append(nd.apply(us[-1]))
        return us if keep else us[-1]

    def loss(self, theta):
        self.evals += 1
        try:
            with np.errstate(all="ignore"):
                nodes = self.nodes(theta)
                r = 0.0
                for x, y, w in self.groups:
                    d = self.forward(nodes, x) - y
                    r += float(np.sum(w * (d.real ** 2 + d.imag ** 2)))
        except (OpGraphError, ValueError, FloatingPointError):
            return _BAD
        return r if math.isfinite(r) else _BAD

    def value_and_grad(self, theta):
        self.evals += 1
        g = np.zeros_like(theta)
        last = len(self.c.slots) - 1
        try:
            with np.errstate(all="ignore"):
                nodes = self.nodes(theta)
                total = 0.0
                for x, y, w in self.groups:
                    us = self.forward(nodes, x, keep=True)
                    d = us[-1] - y
                    total += float(np.sum(w * (d.real ** 2 + d.imag ** 2)))
                    c = 2.0 * w * d
                    # detector gain is stored as log g, so d(out)/d(log g) = out
                    g[self.offsets[last]] += float(np.vdot(c, us[-1]).real)
                    for k in range(last, -1, -1):
                        gk = self.c.slots[k].grad(None, us[k], c, nodes[k])
                        if gk is not None:
                            g[self.offsets[k]:self.offsets[k + 1]] += gk
                        if k:
                            c = _vjp(nodes[k], us[k], c)
        except (OpGraphError, ValueError, FloatingPointError):
            return _BAD, np.zeros_like(theta)
        if not (math.isfinite(total) and np.all(np.isfinite(g))):
            return _BAD, np.zeros_like(theta)
        for i in self.fd:
            h = 1e-6 * max(1.0, abs(theta[i]))
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            g[i] = (self.loss(tp) - self.loss(tm)) / (2 * h)
        return total, g


class _BatchFront:
    """A node whose output axes are permuted so the batch axis leads again."""

    def __init__(self, node: PrimitiveNode):
        self.node, self.kind, self.params = node, node.kind, node.params
        self.in_type, ot = node.in_type, node.out_type
        self.b = ot.axes.index("batch")
        order = [self.b] + [i for i in range(ot.ndim) if i != self.b]
        self.out_type = EdgeType(tuple(ot.shape[i] for i in order), ot.dtype, ot.units,
                                 tuple(ot.axes[i] for i in order))
        self.is_linear = node.is_linear

    def apply(self, x):
        return np.moveaxis(self.node.apply(x), self.b, 0)

    def apply_adjoint(self, y):
        return self.node.apply_adjoint(np.moveaxis(y, 0, self.b))


def _vjp(node: PrimitiveNode, u, c):
    """Cotangent at a node's input (real inner product)."""
    k, p = node.kind, node.params
    impl = IMPLS[k]
    if k is Kind.TRANSFORM or (k is Kind.DETECT and not p.is_linear):
        return impl.jacobian_adjoint(p, u, c, node.in_type)
    return node.apply_adjoint(c)


def _init_gain(fit: _Fitter, theta):
    """Shift the detector log-gain to the weighted least-squares optimum."""
    i = fit.offsets[len(fit.c.slots) - 1]
    with np.errstate(all="ignore"):
        try:
            nodes = fit.nodes(theta)
            num = den = 0.0
            for x, y, w in fit.groups:
                yh = fit.forward(nodes, x)
                num += float(np.sum(w * (np.conj(yh) * y).real))
                den += float(np.sum(w * (yh.real ** 2 + yh.imag ** 2)))
        except (OpGraphError, ValueError):
            return theta
    if den > 0 and num > 0 and math.isfinite(num / den):
        theta = theta.copy()
        theta[i] += math.log(num / den)
    return theta


def _polish(fit: _Fitter, theta, iters=200):
    """LSQR re-solve of each array block whose downstream stages are all linear."""
    slots = fit.c.slots
    best = fit.loss(theta)
    for k, s in enumerate(slots):
        if not isinstance(s, (ModSlot, ConvSlot, ScatterSlot)):
            continue
        nodes = fit.nodes(theta)
        if not all(nd.is_linear for nd in nodes[k + 1:]):
            continue
        ins = [(fit.forward(nodes[:k], x), y, np.sqrt(w)) for x, y, w in fit.groups]
        a, b = fit.offsets[k], fit.offsets[k + 1]
        cx = fit.t.out_complex
        sizes = [y.size for _, y, _ in ins]

        def flat(z):
            return np.concatenate([z.real, z.imag]) if cx else z.real

        def mv(v, k=k, ins=ins, a=a, b=b):
            th = theta.copy()
            th[a:b] = v
            nd = fit.nodes(th)
            return flat(np.concatenate([(sw * fit.forward(nd[k:], u)).ravel() for u, _, sw in ins]))

        def rmv(v, k=k, ins=ins, s=s):
            z = v[:len(v) // 2] + 1j * v[len(v) // 2:] if cx else v
            g = np.zeros(b - a)
            pos = 0
            for (u, y, sw), sz in zip(ins, sizes):
                c = sw * z[pos:pos + sz].reshape(y.shape)
                pos += sz
                us = fit.forward(nodes[k:], u, keep=True)
                for j in range(len(nodes) - 1, k, -1):
                    c = _vjp(nodes[j], us[j - k], c)
                g += s.grad(None, u, c, nodes[k])
            return g

        rhs = flat(np.concatenate([(sw * y).ravel() for _, y, sw in ins]))
        op = LinearOperator((rhs.size, b - a), matvec=mv, rmatvec=rmv, dtype=np.float64)
        try:
            with np.errstate(all="ignore"):
                sol = lsqr(op, rhs, atol=1e-15, btol=1e-15, iter_lim=iters, x0=theta[a:b])[0]
        except (OpGraphError, ValueError):
            continue
        trial = theta.copy()
        trial[a:b] = sol
        f = fit.loss(trial)
        if f < best:
            theta, best = trial, f
    return theta, best


def fit_candidate(cand: Candidate, target: SearchTarget, iters: int, restarts: int,
                  seed: int, polish: bool) -> tuple[float, np.ndarray, int]:
    """Best loss over ``restarts + 1`` seeded starts; returns (loss, theta, evaluations)."""
    fit = _Fitter(cand, target)
    best_f, best_th = math.inf, None
    for r in range(restarts + 1):
        rng = np.random.default_rng([seed, r])
        jitter = 0.0 if r == 0 else 0.1 * r
        th = np.concatenate([s.init(rng, jitter) for s in cand.slots])
        th = _init_gain(fit, th)
        if polish:
            th, _ = _polish(fit, th, iters)
        res = minimize(fit.value_and_grad, th, jac=True, method="L-BFGS-B",
                       options={"maxiter": iters, "ftol": 1e-15, "gtol": 1e-12})
        th = res.x
        if polish:
            th, _ = _polish(fit, th, iters)
        f = fit.loss(th)
        if f < best_f:
            best_f, best_th = f, th
    return best_f, best_th, fit.evals


def candidate_graph(cand: Candidate, theta, name: str = "") -> OperatorGraph:
    fit = _Fitter.__new__(_Fitter)
    fit.c = cand
    fit.offsets = np.cumsum([0] + [s.n for s in cand.slots])
    stages = [(s.kind, s.params(th)) for s, th in zip(cand.slots, fit.parts(theta))]
    return chain(cand.types[0], stages, name)


# -- driver -------------------------------------------------------------------

@dataclass
class SearchResult:
    target: str
    budget: SearchBudget
    graph: Optional[OperatorGraph]
    chain: str
    min_e_img: float
    e_sup: float
    fit_loss: float
    n_candidates: int
    n_screened: int
    exhausted: bool
    strategy: str
    ranking: list = field(default_factory=list)
    seconds: float = 0.0
    report: Optional[FidelityReport] = None

    def to_dict(self) -> dict:
        return {"target": self.target, "budget": self.budget.to_dict(), "chain": self.chain,
                "min_e_img": self.min_e_img, "e_sup": self.e_sup, "fit_loss": self.fit_loss,
                "upper_bound": True, "n_candidates": self.n_candidates, "n_screened": self.n_screened,
                "budget_exhausted": self.exhausted, "strategy": self.strategy,
                "ranking": self.ranking, "seconds": round(self.seconds, 3)}


def _drop_one(labels: tuple[str, ...]):
    for i in range(len(labels)):
        yield labels[:i] + labels[i + 1:]


def extension_search(target: SearchTarget, budget: SearchBudget = SearchBudget(),
                     seed: int = 0) -> SearchResult:
    """Best chain within ``budget`` for ``target``; its error is an upper bound on the minimum."""
    t0 = time.perf_counter()
    cands = enumerate_candidates(target, budget)
    polish = budget.param_fit == "closed_form"
    screened: dict[int, float] = {}
    exhausted = False

    def screen(idx):
        nonlocal exhausted
        for i in idx:
            if i in screened:
                continue
            if len(screened) >= budget.eval_cap or time.perf_counter() - t0 > budget.time_limit:
                exhausted = True
                return
            f, _, _ = fit_candidate(cands[i], target, budget.screen_iters, 0, seed, polish)
            screened[i] = f

    if len(cands) <= budget.eval_cap:
        strategy = "exhaustive"
        screen(range(len(cands)))
    else:
        strategy = "beam"
        by_len: dict[int, list[int]] = {}
        for i, c in enumerate(cands):
            by_len.setdefault(len(c.prefix), []).append(i)
        lengths = sorted(by_len)
        screen(by_len[lengths[0]])
        kept = None
        for L in lengths:
            if L != lengths[0]:
                grow = [i for i in by_len[L] if any(p in kept for p in _drop_one(cands[i].prefix))]
                screen(grow)
            level = {}
            for i in by_len[L]:
                if i in screened:
                    p = cands[i].prefix
                    level[p] = min(level.get(p, math.inf), screened[i])
            kept = set(sorted(level, key=level.get)[:budget.beam_width])
            if not kept or exhausted:
                break

    order = sorted(screened, key=screened.get)
    best = (math.inf, None, None)
    ranking = []
    for i in order[:budget.refine_top]:
        if time.perf_counter() - t0 > budget.time_limit:
            exhausted = True
            break
        f, th, _ = fit_candidate(cands[i], target, budget.refine_iters, budget.restarts, seed, polish)
        ranking.append({"chain": cands[i].label, "screen_loss": screened[i], "fit_loss": f})
        if f < best[0]:
            best = (f, i, th)
    if best[1] is None:
        return SearchResult(target.name, budget, None, "", math.inf, math.inf, math.inf, len(cands),
                            len(screened), True, strategy, ranking, time.perf_counter() - t0)
    g = candidate_graph(cands[best[1]], best[2], f"{target.name}_search")
    with np.errstate(all="ignore"):
        try:
            rep = e_img(target.fn, g.forward, target.objects)
            e_mean, e_sup = rep.e_mean, rep.e_sup
        except (OpGraphError, ValueError):
            rep, e_mean, e_sup = None, math.inf, math.inf
    return SearchResult(target.name, budget, g, cands[best[1]].label, e_mean, e_sup, best[0], len(cands),
                        len(screened), exhausted, strategy, ranking, time.perf_counter() - t0, rep)


def modulate_target(in_type: EdgeType, seed: int = 0) -> SearchTarget:
    """Sabotage control: a detector-1 modulation whose pattern the search must recover."""
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.2, 1.5, in_type.shape)
    if in_type.is_complex:
        m = m * np.exp(1j * rng.uniform(-np.pi, np.pi, in_type.shape))
    return SearchTarget("modulate_control", in_type, lambda x: 0.7 * m * x)
