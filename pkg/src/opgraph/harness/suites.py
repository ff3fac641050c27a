"""Report builders behind the validation commands."""

from __future__ import annotations

import math
import time
from typing import Iterable, Optional

import numpy as np

from opgraph.field import EdgeType
from opgraph.graph_ir import N_MAX, D_MAX, linearize_graph, stats, validate
from opgraph.harness.oracles import has_oracle
from opgraph.harness.protocol import modality_fidelity
from opgraph.metrics import (B_DEFAULT, THRESHOLD, dot_test, phantom_object,
                             power_iteration, stage_norm)
from opgraph.modality_params import cartesian_k, rng_for
from opgraph.operators import (AccumulateParams, ConvolveParams, DetectParams, DisperseParams,
                               EncodeParams, Kind, ModulateParams, PrimitiveNode, ProjectParams,
                               PropagateParams, SampleParams, ScatterParams, TransformParams,
                               linearize)
from opgraph.registry import get_record, load_registry

# kinds held to near machine precision in the adjoint suite
STRICT_KINDS = frozenset({Kind.PROPAGATE, Kind.MODULATE, Kind.ENCODE, Kind.CONVOLVE,
                          Kind.ACCUMULATE, Kind.SAMPLE})
STRICT_THRESHOLD = 1e-12
SUITE_SIZES = (16, 24, 32, 48, 64)
# chains whose every stage must respect the uniform norm bound
NORM_STRICT = ("cassi", "compton", "ct", "mri")


def _cases(kind: Kind, n: int, rng) -> list[PrimitiveNode]:
    """Representative nodes of one kind on n-by-n (or n-by-n-by-bands) inputs."""
    c2 = EdgeType((n, n), "complex128", axes=("y", "x"))
    r2 = EdgeType((n, n), axes=("y", "x"))
    r3 = EdgeType((4, n, n), axes=("lambda", "y", "x"))
    if kind is Kind.PROPAGATE:
        return [PrimitiveNode(kind, PropagateParams(float(rng.uniform(0.5, 5.0))), c2)]
    if kind is Kind.MODULATE:
        return [PrimitiveNode(kind, ModulateParams(rng.random((n, n)) + 1j * rng.random((n, n))), c2),
                PrimitiveNode(kind, ModulateParams(rng.random((n, n))), r3)]
    if kind is Kind.PROJECT:
        th = np.sort(rng.uniform(0, math.pi, 12))
        return [PrimitiveNode(kind, ProjectParams(th, int(math.ceil(math.sqrt(2) * n)) | 1, 1.0, 1.0), r2)]
    if kind is Kind.ENCODE:
        return [PrimitiveNode(kind, EncodeParams(rng.uniform(-n / 2, n / 2, (3 * n, 2))), c2)]
    if kind is Kind.CONVOLVE:
        return [PrimitiveNode(kind, ConvolveParams(rng.random((5, 5))), r2),
                PrimitiveNode(kind, ConvolveParams(rng.random((3, 7)) + 1j * rng.random((3, 7))), c2)]
    if kind is Kind.ACCUMULATE:
        return [PrimitiveNode(kind, AccumulateParams("lambda"), r3)]
    if kind is Kind.SAMPLE:
        om = np.sort(rng.choice(n * n, n * n // 3, replace=False))
        return [PrimitiveNode(kind, SampleParams(om), c2)]
    if kind is Kind.DISPERSE:
        return [PrimitiveNode(kind, DisperseParams(2.0, -1.0, np.arange(4.0)), r3)]
    if kind is Kind.SCATTER:
        e = EdgeType((6, n, n), axes=("E", "y", "x"))
        return [PrimitiveNode(kind, ScatterParams(rng.random((6, 6)), "E", rng.random((n, n)) + 0.5,
                                                  ("y", "x")), e)]
    if kind is Kind.DETECT:
        out = [PrimitiveNode(kind, DetectParams(1, g=1.7), c2),
               PrimitiveNode(kind, DetectParams(5, g=0.8, phi=0.4), c2)]
        for p in (DetectParams(2, x0=0.5), DetectParams(3, x0=0.3), DetectParams(4, g=2.0)):
            out.append(linearize(PrimitiveNode(kind, p, c2), c2.random(rng)))
        return out
    out = []
    for p, t in ((TransformParams("exp_atten", 0.7), r2), (TransformParams("log", 0.1), r2),
                 (TransformParams("wrap"), c2), (TransformParams("poly", (0.1, 1.0, 0.3, -0.2)), r2),
                 (TransformParams("saturate", (-0.5, 0.5)), r2)):
        x = np.abs(t.random(rng)) + 0.2 if p.family == "log" else t.random(rng)
        out.append(linearize(PrimitiveNode(kind, p, t), x))
    return out


def adjoint_suite(seed: int = 0, trials: int = 20, sizes=SUITE_SIZES) -> dict:
    """Dot tests for every kind, spreading the trials over the listed sizes."""
    t0 = time.perf_counter()
    rows = []
    per = max(1, trials // len(sizes))
    for kind in Kind:
        rng = rng_for(kind.value, seed)
        errs, count = [], 0
        for n in sizes:
            for node in _cases(kind, n, rng):
                rep = dot_test(node, trials=per, seed=int(rng.integers(2 ** 31)))
                errs.append(rep.max_rel_err)
                count += rep.trials
        thr = STRICT_THRESHOLD if kind in STRICT_KINDS else THRESHOLD
        worst = max(errs)
        rows.append({"kind": kind.value, "symbol": kind.symbol, "max_rel_err": worst,
                     "trials": count, "sizes": list(sizes), "threshold": thr, "passed": worst < thr})
    return {"seed": seed, "rows": rows, "passed": all(r["passed"] for r in rows),
            "seconds": round(time.perf_counter() - t0, 3)}


def reference_norms(seed: int = 0) -> list[dict]:
    """Closed-form norms of four reference operators against power iteration."""
    rng = rng_for("reference_norms", seed)
    n = 16
    c2 = EdgeType((n, n), "complex128", axes=("y", "x"))
    cube = EdgeType((15, n, n), axes=("lambda", "y", "x"))
    cases = [
        ("sample", PrimitiveNode(Kind.SAMPLE, SampleParams(np.sort(rng.choice(n * n, 100, replace=False))), c2),
         1.0, "eq"),
        ("encode_full_grid", PrimitiveNode(Kind.ENCODE, EncodeParams(cartesian_k(n)), c2), float(n), "eq"),
        ("accumulate_15", PrimitiveNode(Kind.ACCUMULATE, AccumulateParams("lambda"), cube), math.sqrt(15), "eq"),
        ("binary_mask", PrimitiveNode(Kind.MODULATE, ModulateParams((rng.random((n, n)) > 0.5).astype(float)),
                                      c2), 1.0, "le"),
    ]
    rows = []
    for name, node, expected, mode in cases:
        est = power_iteration(node, seed=seed)
        rel = abs(est.value - expected) / expected
        ok = rel < 1e-4 if mode == "eq" else est.value <= expected * (1 + 1e-4)
        rows.append({"operator": name, "norm": est.value, "expected": expected, "relation": mode,
                     "rel_err": rel, "iterations": est.iterations, "passed": bool(ok)})
    return rows


def size_override(name: str, size: Optional[int]) -> Optional[dict]:
    """Sizes that set the spatial extent ``n`` of a modality, where it has one."""
    if size is None or "n" not in get_record(name).sizes:
        return None
    return {"n": int(size)}


def chain_norms(name: str, sizes: Optional[dict] = None, seed: int = 0) -> list[dict]:
    """Per-stage norms of a registry graph, nonlinear stages linearized at a phantom."""
    g = get_record(name).build(sizes, seed)
    x = phantom_object("shepp_logan", g.in_type)
    if not g.is_linear:
        g = linearize_graph(g, x)
    return [{"node": nid, "kind": g.nodes[nid].kind.value, "norm": stage_norm(g.nodes[nid], seed)}
            for nid in g.order() if nid in g.nodes]


def norms_report(seed: int = 0, modalities: Optional[Iterable[str]] = None, B: float = B_DEFAULT,
                 size: Optional[int] = None) -> dict:
    t0 = time.perf_counter()
    ref = reference_norms(seed)
    names = sorted(modalities) if modalities is not None else sorted(r.name for r in load_registry())
    chains = []
    for name in names:
        rows = chain_norms(name, size_override(name, size), seed)
        worst = max(r["norm"] for r in rows)
        strict = name in NORM_STRICT
        chains.append({"modality": name, "stages": rows, "max_norm": worst, "bound": B,
                       "enforced": strict, "passed": worst <= B or not strict})
    ok = all(r["passed"] for r in ref) and all(c["passed"] for c in chains)
    return {"seed": seed, "B": B, "reference": ref, "chains": chains, "passed": ok,
            "seconds": round(time.perf_counter() - t0, 3)}


def registry_report(seed: int = 0, modalities: Optional[Iterable[str]] = None, nmax: int = N_MAX,
                    dmax: int = D_MAX, fidelity: bool = True, size: Optional[int] = None) -> dict:
    """Structure and fidelity of every registry template.

    Each template's error must stay within ten times its tabulated value (or
    the tolerance itself where no value is tabulated).
    """
    t0 = time.perf_counter()
    recs = load_registry() if modalities is None else [get_record(m) for m in sorted(modalities)]
    rows = []
    for rec in recs:
        sizes = size_override(rec.name, size)
        g = rec.build(sizes, seed)
        st = stats(g)
        bad = validate(g, nmax, dmax)
        row = {"modality": rec.name, "tier": rec.tier, "chain": rec.chain,
               "n_nodes": st.n_nodes, "depth": st.depth, "table_n_nodes": rec.n_nodes,
               "table_depth": rec.depth, "structure_ok": (st.n_nodes, st.depth) == (rec.n_nodes, rec.depth)
               and not bad, "violations": [str(v) for v in bad], "expected_e_img": rec.expected_e_img}
        ok = row["structure_ok"]
        if fidelity and has_oracle(rec.name):
            rep = modality_fidelity(rec.name, sizes, seed)
            limit = 10 * rec.expected_e_img if rec.expected_e_img else 0.01
            row.update({"e_mean": rep.e_mean, "e_sup": rep.e_sup, "e_limit": limit,
                        "fidelity_ok": rep.e_mean < limit})
            ok = ok and row["fidelity_ok"]
        row["passed"] = ok
        rows.append(row)
    return {"seed": seed, "nmax": nmax, "dmax": dmax, "rows": rows,
            "passed": all(r["passed"] for r in rows), "seconds": round(time.perf_counter() - t0, 3)}


def born_convergence(seed: int = 0, n: int = 8, dirs: int = 4, strength: float = 0.3,
                     max_order: int = 4) -> dict:
    """Partial Born sums against the dense solution for a weak random scatterer.

    The kernel is scaled to spectral norm ``strength`` and the density lies in
    [0, 1], so the loop operator is a contraction and residuals fall geometrically.
    """
    from opgraph.registry import born_residuals
    rng = rng_for("born_convergence", seed)
    t = EdgeType((dirs, n, n), "complex128", axes=("dir", "y", "x"))
    k = rng.random((dirs, dirs))
    k *= strength / np.linalg.norm(k, 2)
    sc = ScatterParams(k, "dir")
    prop = PropagateParams(float(rng.uniform(1.0, 3.0)))
    mod = ModulateParams(rng.random((n, n)))
    x = t.random(rng)
    orders = tuple(range(max_order + 1))
    res = born_residuals(x, sc, prop, mod, t, orders)
    ratios = [b / a for a, b in zip(res, res[1:])]
    return {"seed": seed, "strength": strength, "orders": list(orders), "residuals": res,
            "ratios": ratios, "passed": all(r < 1 for r in ratios)}


LIPSCHITZ_SETTINGS = (
    (TransformParams("exp_atten", 0.5), 1.0), (TransformParams("exp_atten", 1.0), 2.0),
    (TransformParams("exp_atten", 2.0), 0.5),
    (TransformParams("log", 0.1), 1.0), (TransformParams("log", 0.5), 2.0), (TransformParams("log", 1.0), 4.0),
    (TransformParams("wrap"), 3.0), (TransformParams("wrap"), 10.0), (TransformParams("wrap"), 30.0),
    (TransformParams("poly", (0.0, 1.0, 0.5)), 1.0), (TransformParams("poly", (0.1, 1.0, 0.3, -0.2)), 1.0),
    (TransformParams("poly", (0.0, -2.0, 0.0, 1.0)), 2.0),
    (TransformParams("saturate", (-0.5, 0.5)), 1.0), (TransformParams("saturate", (0.0, 3.0)), 2.0),
    (TransformParams("saturate", (-1.0, 1.0)), 0.5),
)


def lipschitz_check(settings=LIPSCHITZ_SETTINGS, points: int = 10_000, rel: float = 0.05) -> dict:
    """Closed-form Lipschitz constants against finite-difference slopes on a dense grid.

    The log family is sampled on [0, R] (its domain of use); wrap jumps of
    nearly 2*pi are skipped.
    """
    from opgraph.operators import lipschitz_constant
    from opgraph.operators.primitives import Transform
    rows = []
    for p, R in settings:
        lo = 0.0 if p.family == "log" else -R
        x = np.linspace(lo, R, points)
        f = Transform.forward(p, x, None, None)
        df = np.diff(f)
        if p.family == "wrap":
            df = df[np.abs(df) < math.pi]
        sampled = float(np.max(np.abs(df / np.diff(x)[: df.size])))
        L = lipschitz_constant(p, R)
        err = abs(L - sampled) / max(sampled, 1e-300)
        rows.append({"family": p.family, "theta": list(p.theta), "R": R, "closed_form": L,
                     "sampled": sampled, "rel_err": err, "passed": err < rel})
    return {"points": points, "rel_tol": rel, "rows": rows, "passed": all(r["passed"] for r in rows)}


BOUND_CHAINS = {"cassi": {"n": 16, "bands": 4}, "mri": {"n": 16, "k_samples": 64}, "ct": {"n": 16, "angles": 12}}


def bound_trials(seed: int = 0, trials: int = 100, chains=BOUND_CHAINS) -> dict:
    """Seeded single-stage perturbations; measured deviation against the sharp bound.

    Trials cycle over the chains. Each picks one perturbable stage at random
    (Modulate pattern, Detect gain or Project pixel size) and a size drawn
    log-uniformly in [1e-5, 1e-2].
    """
    from opgraph.metrics import bound_check, perturb_gain, perturb_modulate, perturb_pixel_size
    t0 = time.perf_counter()
    rng = rng_for("bound_trials", seed)
    names = list(chains)
    lin, norms = {}, {}
    for name in names:
        g = get_record(name).build(chains[name], seed)
        g = linearize_graph(g, phantom_object("shepp_logan", g.in_type)) if not g.is_linear else g
        lin[name] = g
        norms[name] = {nid: stage_norm(g.nodes[nid], seed) for nid in g.order()}
    rows = []
    for i in range(trials):
        name = names[i % len(names)]
        g = lin[name]
        cands = [n for n in g.order() if g.nodes[n].kind in (Kind.MODULATE, Kind.DETECT, Kind.PROJECT)]
        nid = cands[int(rng.integers(len(cands)))]
        node = g.nodes[nid]
        size = float(10 ** rng.uniform(-5, -2))
        if node.kind is Kind.MODULATE:
            delta = rng.standard_normal(node.params.m.shape)
            if np.iscomplexobj(node.params.m):
                delta = delta + 1j * rng.standard_normal(node.params.m.shape)
            pert = perturb_modulate(node, size * delta / np.max(np.abs(delta)))
        elif node.kind is Kind.DETECT:
            pert = perturb_gain(node, size * float(rng.choice([-1.0, 1.0])))
        else:
            pert = perturb_pixel_size(node, size, seed)
        rep = bound_check(g, {nid: pert}, seed=seed + i, norms=norms[name])
        rows.append({"trial": i, "modality": name, "node": nid, "kind": node.kind.value,
                     "eps": pert[1], "measured": rep.measured, "bound": rep.bound,
                     "ratio": rep.measured / rep.bound if rep.bound else 0.0, "passed": rep.passed})
    return {"seed": seed, "trials": trials, "rows": rows, "n_passed": sum(r["passed"] for r in rows),
            "passed": all(r["passed"] for r in rows), "seconds": round(time.perf_counter() - t0, 3)}
