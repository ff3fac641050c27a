import numpy as np
import pytest

from opgraph.errors import ClassificationError, ComplexityError, OpGraphError, ParamError
from opgraph.field import EdgeType
from opgraph.graph_ir import stats, validate
from opgraph.operators import Kind, ModulateParams, PropagateParams, ScatterParams
from opgraph.registry import (CARRIERS, StageDescriptor, basis_growth, born_residuals, born_unroll,
                              build_modality, check_record, classify_stage, compile_chain, get_record,
                              load_registry, render_chain, worked_examples)

RECORDS = load_registry()


def test_registry_size_and_tiers():
    assert len(RECORDS) == 40
    tiers = {}
    for r in RECORDS:
        tiers[r.tier] = tiers.get(r.tier, 0) + 1
    assert tiers == {"full": 7, "held_out": 5, "exotic": 7, "template": 12, "nonlinear": 9}
    assert sorted(r.intro_order for r in RECORDS) == list(range(1, 41))
    assert all(r.carrier in CARRIERS and 1 <= r.detect_family <= 5 for r in RECORDS)


def test_auxiliary_record_is_separate():
    allr = load_registry(include_auxiliary=True)
    assert len(allr) == 41
    extra = allr[-1]
    assert extra.intro_order is None and extra.tier == "auxiliary"


@pytest.mark.parametrize("rec", RECORDS, ids=lambda r: r.name)
def test_every_template_matches_its_row(rec):
    g = rec.build()
    assert validate(g) == []
    assert check_record(rec) == []
    st = stats(g)
    assert (st.n_nodes, st.depth) == (rec.n_nodes, rec.depth)


def test_mri_build():
    g = build_modality("mri", {"n": 32, "k_samples": 256})
    assert render_chain(g) == "M → F → S → D"
    assert (stats(g).n_nodes, stats(g).depth) == (4, 4)
    assert g.out_type.shape == (256,)


def test_dot_and_beam_hardening_build():
    assert render_chain(build_modality("dot")) == "M → R → P → R → D"
    g = build_modality("beam_hardening_ct", {"n": 64, "energy_bins": 5})
    assert render_chain(g) == "Π → Λ → Σ → Λ → D"
    assert (stats(g).n_nodes, stats(g).depth) == (5, 5)


def test_unknown_modality_and_bad_sizes():
    with pytest.raises(OpGraphError):
        build_modality("xray_vision")
    with pytest.raises(ParamError):
        build_modality("mri", {"bogus": 3})
    with pytest.raises(ParamError):
        build_modality("mri", {"n": 0})


def test_build_is_deterministic_per_seed():
    a, b = build_modality("spc", seed=3), build_modality("spc", seed=3)
    na, nb = a.nodes[a.order()[0]], b.nodes[b.order()[0]]
    assert np.array_equal(na.params.m, nb.params.m)
    c = build_modality("spc", seed=4)
    assert not np.array_equal(na.params.m, c.nodes[c.order()[0]].params.m)


def test_record_lookup():
    assert get_record("cassi").chain == "M → W → Σ → D"
    assert get_record("lensless").intro_order == 1


# --- classifier -------------------------------------------------------------

def test_classify_coded_mask():
    assert classify_stage(StageDescriptor(interacts_with_matter=True)).kinds == (Kind.MODULATE,)


def test_classify_gradient_encoding():
    assert classify_stage(StageDescriptor(maps_space_to_measurement=True)).kinds == (Kind.ENCODE,)


def test_classify_beer_lambert():
    c = classify_stage(StageDescriptor(is_pointwise_nonlinear=True, transform_family="exp_atten"))
    assert c.kinds == (Kind.TRANSFORM,) and c.family == "exp_atten" and c.detailed() == "Λ_exp"


def test_classify_remaining_branches():
    assert classify_stage(StageDescriptor(is_free_space_evolution=True)).kinds == (Kind.PROPAGATE,)
    assert classify_stage(StageDescriptor(is_free_space_evolution=True, shift_invariant=True)).kinds == (Kind.CONVOLVE,)
    assert classify_stage(StageDescriptor(maps_space_to_measurement=True, is_line_integral=True)).kinds == (Kind.PROJECT,)
    sc = StageDescriptor(interacts_with_matter=True, changes_direction_or_energy=True)
    assert classify_stage(sc).kinds == (Kind.SCATTER,)
    ms = StageDescriptor(interacts_with_matter=True, changes_direction_or_energy=True, multiple_scattering=True)
    assert classify_stage(ms).kinds == (Kind.SCATTER, Kind.PROPAGATE, Kind.SCATTER)
    for step, kind in (("disperse", Kind.DISPERSE), ("integrate", Kind.ACCUMULATE),
                       ("subsample", Kind.SAMPLE), ("psf", Kind.CONVOLVE), ("detect", Kind.DETECT)):
        assert classify_stage(StageDescriptor(readout_step=step)).kinds == (kind,)


@pytest.mark.parametrize("bad,field", [
    (StageDescriptor(is_line_integral=True), "is_line_integral"),
    (StageDescriptor(changes_direction_or_energy=True), "interacts_with_matter"),
    (StageDescriptor(is_free_space_evolution=True, interacts_with_matter=True), "is_free_space_evolution"),
    (StageDescriptor(is_pointwise_nonlinear=True, transform_family="exp_atten", interacts_with_matter=True),
     "is_pointwise_nonlinear"),
    (StageDescriptor(readout_step="teleport"), "readout_step"),
])
def test_classify_inconsistent_names_fields(bad, field):
    with pytest.raises(ClassificationError, match=field):
        classify_stage(bad)


def test_classify_needs_some_answer():
    with pytest.raises(ClassificationError):
        classify_stage(StageDescriptor())
    with pytest.raises(ClassificationError):
        classify_stage(StageDescriptor(is_pointwise_nonlinear=True))


def test_worked_examples_replay():
    ex = worked_examples()
    assert compile_chain(ex["cassi"]) == "M → W → Σ → D"
    assert compile_chain(ex["mri"]) == "M → F → S → D"
    assert compile_chain(ex["beam_hardening_ct"], detailed=True) == "Π → Λ_exp → Σ → Λ_log → D"


def test_compile_chain_needs_detect():
    with pytest.raises(ClassificationError):
        compile_chain([StageDescriptor(interacts_with_matter=True)])


# --- Born unrolling ---------------------------------------------------------

T = EdgeType((3, 6, 6), "complex128", axes=("dir", "y", "x"))
SC = ScatterParams(np.full((3, 3), 0.1), "dir")
PR = PropagateParams(1.5)
MO = ModulateParams(np.full((6, 6), 0.5))


@pytest.mark.parametrize("L,n", [(0, 2), (1, 5), (3, 11)])
def test_born_node_counts(L, n):
    g = born_unroll(L, SC, PR, MO, T)
    assert stats(g).n_nodes == n and validate(g) == []


def test_born_first_order_chain():
    assert render_chain(born_unroll(1, SC, PR, MO, T)) == "M → R → P → R → M"


def test_born_limits():
    with pytest.raises(ComplexityError):
        born_unroll(7, SC, PR, MO, T)
    with pytest.raises(ComplexityError):
        born_unroll(2, SC, PR, MO, T, nmax=7)
    with pytest.raises(ParamError):
        born_unroll(-1, SC, PR, MO, T)


def test_born_residuals_decrease():
    x = T.random(np.random.default_rng(0))
    r = born_residuals(x, SC, PR, MO, T, orders=(0, 1, 2, 3, 4))
    assert all(b < a for a, b in zip(r, r[1:]))


# --- basis growth -----------------------------------------------------------

def test_basis_growth_curve():
    steps = basis_growth()
    K = [s.K for s in steps]
    assert len(steps) == 40
    assert all(a <= b for a, b in zip(K, K[1:]))
    assert steps[0].K == 2 and set(steps[0].introduced) == {"C", "D"}
    assert steps[6].K == 9 and steps[6].modality == "cassi"
    assert K[-1] == 11


def test_basis_growth_late_kinds():
    steps = basis_growth()
    first = {sym: s.N for s in steps for sym in s.introduced}
    assert first["R"] == 27 and first["Λ"] == 35
