"""Graph builders for every registry modality."""

from __future__ import annotations

import dataclasses

import numpy as np

from opgraph.field import COMPLEX, REAL, EdgeType
from opgraph.graph_ir import GraphBuilder, OperatorGraph, chain
from opgraph.operators import (AccumulateParams, ConvolveParams, DetectParams, DisperseParams,
                               EncodeParams, Kind, ModulateParams, ProjectParams, PropagateParams,
                               SampleParams, ScatterParams, TransformParams)

P, M, PI, F, C, SIG, D, S, W, R, LAM = (
    Kind.PROPAGATE, Kind.MODULATE, Kind.PROJECT, Kind.ENCODE, Kind.CONVOLVE, Kind.ACCUMULATE,
    Kind.DETECT, Kind.SAMPLE, Kind.DISPERSE, Kind.SCATTER, Kind.TRANSFORM)


def _img(n, dtype=REAL):
    return EdgeType((n, n), dtype, "a.u.", ("y", "x"))


def _det(p, fam):
    if fam == 5:
        return DetectParams(5, g=p.get("g", 1.0), phi=p.get("phi", 0.0))
    return DetectParams(fam, g=p.get("g", 1.0))


def _proj(p):
    return ProjectParams(p["thetas"], p["n_det"], p["det_spacing"], p["pixel_size"])


def _prop(p, key="d"):
    return PropagateParams(p[key], p["lam"])


def conv_direct(s, p, fam):
    return chain(_img(s["n"]), [(C, ConvolveParams(p["psf"])), (D, _det(p, fam))])


def tomo(s, p, fam):
    return chain(_img(s["n"]), [(PI, _proj(p)), (D, _det(p, fam))])


def pattern_sum(s, p, fam, key="patterns"):
    return chain(_img(s["n"]), [
        (M, ModulateParams(p[key], ("pattern", "y", "x"))),
        (SIG, AccumulateParams(("y", "x"))),
        (D, _det(p, fam))])


def cacti(s, p, fam):
    t = EdgeType((s["frames"], s["n"], s["n"]), REAL, "a.u.", ("t", "y", "x"))
    return chain(t, [(M, ModulateParams(p["masks"])), (SIG, AccumulateParams("t")), (D, _det(p, fam))])


def ptycho(s, p, fam):
    return chain(_img(s["n"], COMPLEX), [
        (M, ModulateParams(p["probes"], ("pos", "y", "x"))), (P, _prop(p)), (D, _det(p, fam))])


def mri(s, p, fam, wrap=False):
    n = s["n"]
    stages = [(M, ModulateParams(p["coil"])),
              (F, EncodeParams(p["ktraj"], normalize=True)),
              (S, SampleParams(p["omega"]))]
    if wrap:
        stages.append((LAM, TransformParams("wrap")))
    stages.append((D, _det(p, fam)))
    return chain(_img(n), stages)


def cassi(s, p, fam):
    t = EdgeType((s["bands"], s["n"], s["n"]), REAL, "a.u.", ("lambda", "y", "x"))
    return chain(t, [
        (M, ModulateParams(p["mask"])),
        (W, DisperseParams(p["alpha"], p["a"], p["lambdas"], "x", "lambda")),
        (SIG, AccumulateParams("lambda")),
        (D, _det(p, fam))])


def oct_graph(s, p, fam):
    t = EdgeType((s["bands"], s["n"], s["n"]), COMPLEX, "a.u.", ("lambda", "y", "x"))
    b = GraphBuilder(t)
    b.add("n1", P, PropagateParams(p["d_ref"], p["lam"]), inputs=["source"])
    b.add("n2", P, PropagateParams(p["d_sample"], p["lam"]), inputs=["source"])
    b.add("n3", SIG, AccumulateParams("lambda"), inputs=["n1", "n2"], merge="sum")
    b.add("n4", D, _det(p, fam))
    return b.build()


def mod_prop(s, p, fam, key="absorption", dtype=REAL):
    m = p[key]
    axes = ("pos", "y", "x") if np.ndim(m) == 3 else ()
    return chain(_img(s["n"], dtype), [(M, ModulateParams(m, axes)), (P, _prop(p)), (D, _det(p, fam))])


def sim(s, p, fam):
    return chain(_img(s["n"]), [
        (M, ModulateParams(p["illum"], ("phase", "y", "x"))),
        (C, ConvolveParams(p["psf"], ("y", "x"))),
        (D, _det(p, fam))])


def phase_contrast(s, p, fam):
    t = EdgeType((s["depth_z"], s["n"], s["n"]), REAL, "a.u.", ("z", "y", "x"))
    return chain(t, [(PI, _proj(p)), (P, _prop(p)), (M, ModulateParams(p["grating"])), (D, _det(p, fam))])


def thz(s, p, fam):
    return chain(_img(s["n"]), [(C, ConvolveParams(p["kernel"])), (D, _det(p, fam))])


def spectral_ct(s, p, fam):
    t = EdgeType((s["energy_bins"], s["n"], s["n"]), REAL, "a.u.", ("E", "y", "x"))
    return chain(t, [(PI, _proj(p)), (S, SampleParams(p["omega"])), (D, _det(p, fam))])


def spect(s, p, fam):
    return chain(_img(s["n"]), [(M, ModulateParams(p["atten"])), (PI, _proj(p)), (D, _det(p, fam))])


def prop_mod(s, p, fam, key="reflectivity"):
    return chain(_img(s["n"]), [(P, _prop(p)), (M, ModulateParams(p[key])), (D, _det(p, fam))])


def scatter_spectral(s, p, fam):
    t = EdgeType((s["energy_bins"], s["n"], s["n"]), REAL, "a.u.", ("E", "y", "x"))
    return chain(t, [
        (M, ModulateParams(p["density"])),
        (R, ScatterParams(p["kernel"], "E")),
        (D, _det(p, fam))])


def _transport_input(s):
    return EdgeType((s["dirs"], s["n"], s["n"]), REAL, "a.u.", ("dir", "y", "x"))


def dot(s, p, fam):
    return chain(_transport_input(s), [
        (M, ModulateParams(p["absorption"])),
        (R, ScatterParams(p["kernel"], "dir")), (P, _prop(p)), (R, ScatterParams(p["kernel"], "dir")),
        (D, _det(p, fam))])


def dot_strong(s, p, fam):
    stages = [(M, ModulateParams(p["absorption"]))]
    for _ in range(s.get("born_order", 2)):
        stages += [(P, _prop(p)), (R, ScatterParams(p["kernel"], "dir"))]
    stages += [(SIG, AccumulateParams("dir")), (D, _det(p, fam))]
    return chain(_transport_input(s), stages)


def eit(s, p, fam):
    stages = [(M, ModulateParams(p["injection"], ("src", "y", "x")))]
    for sigma in p["conductivity"]:
        stages += [(M, ModulateParams(sigma)), (P, _prop(p))]
    stages += [(SIG, AccumulateParams("y")), (S, SampleParams(p["omega"])), (D, _det(p, fam))]
    return chain(_img(s["n"]), stages)


def beam_hardening(s, p, fam):
    t = EdgeType((s["energy_bins"], s["n"], s["n"]), REAL, "a.u.", ("E", "y", "x"))
    return chain(t, [
        (PI, _proj(p)),
        (LAM, TransformParams("exp_atten", (p["alpha"],))),
        (SIG, AccumulateParams("E")),
        (LAM, TransformParams("log", (p["delta"],))),
        (D, _det(p, fam))])


def nl_ultrasound(s, p, fam):
    return chain(_img(s["n"]), [
        (P, _prop(p, "d1")), (M, ModulateParams(p["medium"])),
        (LAM, TransformParams("poly", p["poly"])), (P, _prop(p, "d2")), (D, _det(p, fam))])


def mpi(s, p, fam):
    return chain(_img(s["n"]), [
        (M, ModulateParams(p["drive"])), (LAM, TransformParams("poly", p["poly"])),
        (F, EncodeParams(p["ktraj"], normalize=True)), (D, _det(p, fam))])


def fdtd_nl(s, p, fam):
    return chain(_img(s["n"]), [
        (P, _prop(p)), (M, ModulateParams(p["medium"])),
        (LAM, TransformParams("poly", p["poly"])), (P, _prop(p, "d2")), (D, _det(p, fam))])


def qst(s, p, fam):
    d2 = s["qudit"] ** 2
    t = EdgeType((d2,), REAL, "a.u.", ("i",))
    return chain(t, [
        (M, ModulateParams(p["effects"], ("effect", "i"))),
        (SIG, AccumulateParams("i")), (S, SampleParams(p["omega"])), (D, _det(p, fam))])


BUILDERS = {
    "lensless": conv_direct, "ct": tomo, "spc": pattern_sum, "cacti": cacti, "ptychography": ptycho,
    "mri": mri, "cassi": cassi, "oct": oct_graph, "photoacoustic": mod_prop, "sim": sim,
    "phase_contrast": phase_contrast, "electron_ptychography": ptycho, "ghost_imaging": pattern_sum,
    "thz_tds": thz, "neutron": tomo, "sted": conv_direct,
    "holography": lambda s, p, f: mod_prop(s, p, f, "pattern", COMPLEX),
    "light_field": lambda s, p, f: mod_prop(s, p, f, "pattern", COMPLEX),
    "fpm": lambda s, p, f: mod_prop(s, p, f, "pattern", COMPLEX),
    "spectral_ct": spectral_ct, "pet": tomo, "spect": spect, "ultrasound": prop_mod, "sar": prop_mod,
    "radar": prop_mod, "electron_tomography": tomo, "compton": scatter_spectral,
    "raman": scatter_spectral, "fluorescence": scatter_spectral, "dot": dot, "brillouin": scatter_spectral,
    "dot_strong_scattering": dot_strong, "eit": eit, "mc_photon_transport": dot,
    "beam_hardening_ct": beam_hardening, "phase_wrapped_mri": lambda s, p, f: mri(s, p, f, wrap=True),
    "nonlinear_ultrasound": nl_ultrasound, "mpi": mpi,
    "fdtd_linear": lambda s, p, f: prop_mod(s, p, f, "medium"), "fdtd_nonlinear": fdtd_nl, "qst": qst,
}


def build_graph(name: str, sizes: dict, params: dict, detect_family: int) -> OperatorGraph:
    g = BUILDERS[name](sizes, params, detect_family)
    return dataclasses.replace(g, name=name, _cache={})
