import math

import numpy as np
import pytest

from opgraph.errors import ComparisonError, LinearizationRequiredError, ParamError
from opgraph.field import EdgeType
from opgraph.graph_ir import compose, linearize_graph
from opgraph.metrics import (BoundInputs, LinearMap, as_linear_map, bound_check, composition_bound,
                             dot_test, e_img, operator_norm, perturb_distance, perturb_gain,
                             perturb_modulate, perturb_pixel_size, phantom_object, power_iteration,
                             s1_test_set, stage_norm)
from opgraph.metrics.phantoms import PHANTOMS, disk
from opgraph.operators import (AccumulateParams, DetectParams, Kind, ModulateParams, PrimitiveNode,
                               SampleParams, adjoint, forward)
from opgraph.registry import build_modality

C8 = EdgeType((8, 8), "complex128", axes=("y", "x"))


# --- dot test ---------------------------------------------------------------

def test_dot_test_modulate_binary_mask():
    m = (np.random.default_rng(0).random((8, 8)) > 0.5).astype(float)
    rep = dot_test(PrimitiveNode(Kind.MODULATE, ModulateParams(m), C8), trials=20)
    assert rep.max_rel_err < 1e-15 and rep.passed


def test_dot_test_sample_all_is_exact():
    node = PrimitiveNode(Kind.SAMPLE, SampleParams(np.arange(64)), C8)
    assert dot_test(node, trials=20).max_rel_err < 1e-15


def test_dot_test_catches_sign_flipped_adjoint():
    node = PrimitiveNode(Kind.MODULATE, ModulateParams(np.random.default_rng(1).random((8, 8))), C8)
    good = as_linear_map(node)
    bad = LinearMap(good.in_type, good.out_type, good.forward, lambda y: -adjoint(node, y),
                    good.complex_linear)
    rep = dot_test(bad, trials=20)
    assert rep.max_rel_err == pytest.approx(2.0, rel=1e-9)
    assert not rep.passed


def test_dot_test_nonlinear_needs_operating_point():
    node = PrimitiveNode(Kind.DETECT, DetectParams(4), C8)
    with pytest.raises(LinearizationRequiredError):
        dot_test(node)
    x = C8.random(np.random.default_rng(2))
    assert dot_test(node, x_op=x).max_rel_err < 1e-12


def test_dot_test_rejects_zero_trials():
    with pytest.raises(ValueError):
        dot_test(PrimitiveNode(Kind.SAMPLE, SampleParams(np.arange(3)), C8), trials=0)


# --- e_img ------------------------------------------------------------------

def test_e_img_identical_models_is_zero():
    g = build_modality("ct", {"n": 16, "angles": 6})
    rep = e_img(g, g, s1_test_set(g.in_type, 0))
    assert rep.e_sup == 0.0 and rep.e_mean == 0.0 and rep.n_test == 20


def test_e_img_zero_model_gives_unit_ratios():
    g = build_modality("ct", {"n": 16, "angles": 6})
    rep = e_img(g, lambda x: np.zeros(g.out_type.shape), s1_test_set(g.in_type, 0))
    assert np.allclose(rep.per_object, 1.0, atol=1e-6)


def test_e_img_scale_aware():
    g = build_modality("mri", {"n": 16, "k_samples": 60})
    h = lambda x: 1.001 * compose(g, x)
    xs = s1_test_set(g.in_type, 0)
    base = e_img(g, h, xs).e_sup
    c = 7.5
    scaled = e_img(lambda x: c * compose(g, x), lambda x: c * h(x), xs).e_sup
    assert abs(base - scaled) < 1e-9


def test_e_img_shape_mismatch():
    with pytest.raises(ComparisonError):
        e_img(lambda x: x, lambda x: x[:2], [np.ones(3)])
    with pytest.raises(ComparisonError):
        e_img(lambda x: x, lambda x: x, [])


def test_e_img_report_ordering():
    rng = np.random.default_rng(3)
    rep = e_img(lambda x: x, lambda x: x + 0.1 * rng.standard_normal(x.shape), [np.ones(5)] * 6)
    assert 0 <= rep.e_mean <= rep.e_sup and rep.e_std >= 0


# --- norms ------------------------------------------------------------------

def test_norm_sample():
    node = PrimitiveNode(Kind.SAMPLE, SampleParams(np.array([3, 9, 40])), C8)
    assert abs(operator_norm(node) - 1.0) < 1e-6


def test_norm_accumulate_15():
    t = EdgeType((15, 6, 6), axes=("lambda", "y", "x"))
    node = PrimitiveNode(Kind.ACCUMULATE, AccumulateParams("lambda"), t)
    assert abs(operator_norm(node) - math.sqrt(15)) < 1e-5


def test_norm_modulate_diagonal_max():
    node = PrimitiveNode(Kind.MODULATE, ModulateParams(np.array([2.0, 3.0])), EdgeType((2,)))
    assert operator_norm(node) == pytest.approx(3.0, abs=1e-6)
    assert stage_norm(node) == 3.0


def test_norm_zero_operator():
    node = PrimitiveNode(Kind.MODULATE, ModulateParams(np.zeros((8, 8))), C8)
    est = power_iteration(node)
    assert est.value == 0.0 and est.converged


def test_power_iteration_rejects_bad_tol():
    with pytest.raises(ValueError):
        power_iteration(PrimitiveNode(Kind.SAMPLE, SampleParams(np.arange(3)), C8), tol=0)


def test_stage_norm_agrees_with_power_iteration():
    g = linearize_graph(build_modality("cassi", {"n": 16, "bands": 4}),
                        phantom_object("shepp_logan", build_modality("cassi", {"n": 16, "bands": 4}).in_type))
    for nid in g.order():
        node = g.nodes[nid]
        assert stage_norm(node) == pytest.approx(operator_norm(node), rel=1e-5)


# --- composition bound ------------------------------------------------------

def test_bound_single_stage_is_eps():
    r = composition_bound(BoundInputs([(2.5e-3, 3.0)]))
    assert r.absolute == 2.5e-3 and r.loose_absolute == 2.5e-3


def test_bound_cassi_worked_constant():
    r = composition_bound(BoundInputs([(0, 1), (0, 1), (0, 3.9), (1e-3, 1)], H_norm=3.9))
    assert r.absolute == pytest.approx(3.9e-3, rel=1e-12)
    assert r.relative == pytest.approx(1e-3)


def test_bound_ct_worked_constant():
    r = composition_bound(BoundInputs([(0, 3.2), (1e-3, 1)]))
    assert r.absolute == pytest.approx(3.2e-3, rel=1e-12)


def test_bound_loose_form_dominates_sharp():
    rng = np.random.default_rng(4)
    for _ in range(50):
        K = int(rng.integers(1, 6))
        rows = [(rng.random() * 1e-2, rng.random() * 4.0) for _ in range(K)]
        r = composition_bound(BoundInputs(rows))
        assert r.absolute <= r.loose_absolute + 1e-18
        assert r.relative is None


def test_bound_inputs_reject_negative():
    with pytest.raises(ParamError):
        BoundInputs([(-1e-3, 1.0)])
    with pytest.raises(ParamError):
        BoundInputs([(1e-3,)])


# --- bound check ------------------------------------------------------------

@pytest.fixture(scope="module")
def cassi16():
    g = build_modality("cassi", {"n": 16, "bands": 4})
    x = phantom_object("shepp_logan", g.in_type)
    return linearize_graph(g, x)


def _node(g, kind):
    return next(n for n in g.order() if g.nodes[n].kind is kind)


def test_bound_check_zero_perturbation(cassi16):
    m = _node(cassi16, Kind.MODULATE)
    rep = bound_check(cassi16, {m: perturb_modulate(cassi16.nodes[m], np.zeros(cassi16.nodes[m].params.m.shape))})
    assert rep.measured == 0.0 and rep.passed


def test_bound_check_modulate_perturbation(cassi16):
    m = _node(cassi16, Kind.MODULATE)
    node = cassi16.nodes[m]
    rng = np.random.default_rng(5)
    delta = 1e-4 * np.sign(rng.standard_normal(node.params.m.shape))
    rep = bound_check(cassi16, {m: perturb_modulate(node, delta)})
    assert rep.eps[cassi16.order().index(m)] == pytest.approx(1e-4)
    assert 0 < rep.measured <= rep.bound * (1 + 1e-6)


def test_bound_check_two_stages(cassi16):
    m, d = _node(cassi16, Kind.MODULATE), _node(cassi16, Kind.DETECT)
    rng = np.random.default_rng(6)
    pm = perturb_modulate(cassi16.nodes[m], 1e-4 * rng.standard_normal(cassi16.nodes[m].params.m.shape))
    pd = perturb_gain(cassi16.nodes[d], 1e-3)
    rep = bound_check(cassi16, {m: pm, d: pd})
    assert sum(e > 0 for e in rep.eps) == 2
    assert rep.measured <= rep.bound * (1 + 1e-6)


def test_bound_check_ct_pixel_size():
    g = build_modality("ct", {"n": 16, "angles": 8})
    x = phantom_object("shepp_logan", g.in_type)
    lin = linearize_graph(g, x)
    p = _node(lin, Kind.PROJECT)
    rep = bound_check(lin, {p: perturb_pixel_size(lin.nodes[p], 1e-3)})
    assert rep.measured <= rep.bound * (1 + 1e-6)
    assert rep.measured > 0.5 * rep.bound


def test_bound_check_propagate_distance():
    from opgraph.graph_ir import chain
    t = EdgeType((16, 16), "complex128", axes=("y", "x"))
    from opgraph.operators import PropagateParams
    g = chain(t, [(Kind.PROPAGATE, PropagateParams(2.0)), (Kind.MODULATE, ModulateParams(np.full((16, 16), 0.5)))])
    p = g.order()[0]
    rep = bound_check(g, {p: perturb_distance(g.nodes[p], 0.05)})
    assert rep.measured <= rep.bound * (1 + 1e-6)


def test_bound_check_nonlinear_needs_x_op():
    g = build_modality("cassi", {"n": 8, "bands": 4})
    with pytest.raises(ParamError):
        bound_check(g, {})


def test_perturb_helpers_check_kind(cassi16):
    d = cassi16.nodes[_node(cassi16, Kind.DETECT)]
    with pytest.raises(ParamError):
        perturb_modulate(d, np.zeros(1))
    with pytest.raises(ParamError):
        perturb_pixel_size(d, 0.1)


# --- phantoms ---------------------------------------------------------------

def test_s1_test_set_composition():
    t = EdgeType((4, 12, 12), axes=("lambda", "y", "x"))
    xs = s1_test_set(t, seed=3)
    assert len(xs) == 20 and len(PHANTOMS) == 10
    for x in xs:
        assert x.shape == t.shape and abs(np.linalg.norm(x) - 1) < 1e-12
    again = s1_test_set(t, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip(xs, again))
    assert not np.array_equal(xs[-1], s1_test_set(t, seed=4)[-1])


def test_complex_phantoms():
    x = phantom_object("disk", C8)
    assert np.iscomplexobj(x) and abs(np.linalg.norm(x) - 1) < 1e-12


def test_disk_area():
    d = disk(128, 128, r=0.6, supersample=4)
    area = d.sum() * (2 / 128) ** 2
    assert area == pytest.approx(math.pi * 0.36, rel=1e-2)


def test_forward_of_phantom_is_finite():
    g = build_modality("cassi")
    for x in s1_test_set(g.in_type, 0):
        assert np.all(np.isfinite(forward(g.nodes[g.order()[0]], x)))
