import numpy as np
import pytest
import yaml

from opgraph.errors import CompositionError, GraphParseError, LinearizationRequiredError
from opgraph.field import EdgeType, Field
from opgraph.graph_ir import (SOURCE, GraphBuilder, OperatorGraph, chain, compose, compose_adjoint,
                              deserialize, serialize, stats, validate)
from opgraph.metrics import dot_test, s1_test_set
from opgraph.operators import (AccumulateParams, DetectParams, Kind, ModulateParams, PrimitiveNode,
                               PropagateParams, SampleParams, forward, materialize)
from opgraph.registry import build_modality

R4 = EdgeType((4, 4), axes=("y", "x"))
C4 = EdgeType((4, 4), "complex128", axes=("y", "x"))


def rules(g):
    return {v.rule for v in validate(g)}


def test_single_node_graph_is_well_formed():
    b = GraphBuilder(R4)
    b.add("m", Kind.MODULATE, ModulateParams(np.full((4, 4), 2.0)))
    g = b.build()
    assert validate(g) == []
    x = R4.random(np.random.default_rng(0))
    assert np.array_equal(compose(g, x), forward(g.nodes["m"], x))


def test_dtype_mismatch_flagged_on_edge():
    p = PrimitiveNode(Kind.PROPAGATE, PropagateParams(1.0), C4)
    m = PrimitiveNode(Kind.MODULATE, ModulateParams(np.ones((4, 4))), R4)
    g = OperatorGraph(C4, {"n1": p, "n2": m}, ((SOURCE, "n1"), ("n1", "n2")), "n2",
                      {(SOURCE, "n1"): C4, ("n1", "n2"): C4})
    bad = validate(g)
    assert any(v.rule == "type_mismatch" for v in bad)
    assert any("n1" in str(v) and "n2" in str(v) for v in bad)


def test_cycle_flagged():
    m1 = PrimitiveNode(Kind.MODULATE, ModulateParams(np.ones((4, 4))), R4)
    m2 = PrimitiveNode(Kind.MODULATE, ModulateParams(np.ones((4, 4))), R4)
    g = OperatorGraph(R4, {"a": m1, "b": m2}, ((SOURCE, "a"), ("a", "b"), ("b", "a")), "b")
    assert "acyclicity" in rules(g)


def test_complexity_limits_flagged():
    stages = [(Kind.MODULATE, ModulateParams(np.ones((4, 4))))] * 6
    g = chain(R4, stages)
    assert validate(g) == []
    assert validate(g, nmax=5)
    assert validate(g, dmax=5)


def test_compose_rejects_malformed_graph():
    m1 = PrimitiveNode(Kind.MODULATE, ModulateParams(np.ones((4, 4))), R4)
    g = OperatorGraph(R4, {"a": m1, "b": m1}, ((SOURCE, "a"), ("a", "b"), ("b", "a")), "b")
    with pytest.raises(CompositionError):
        compose(g, np.zeros((4, 4)))


@pytest.mark.parametrize("name,n,d", [("cassi", 4, 4), ("ct", 2, 2), ("oct", 4, 3), ("mri", 4, 4),
                                      ("dot", 5, 5), ("beam_hardening_ct", 5, 5)])
def test_stats(name, n, d):
    s = stats(build_modality(name))
    assert (s.n_nodes, s.depth) == (n, d)


def test_oct_two_branch_sum_matches_hand_evaluation():
    g = build_modality("oct")
    x = s1_test_set(g.in_type, 0)[0]
    order = g.order()
    props = [n for n in order if g.nodes[n].kind is Kind.PROPAGATE]
    acc = next(n for n in order if g.nodes[n].kind is Kind.ACCUMULATE)
    det = next(n for n in order if g.nodes[n].kind is Kind.DETECT)
    assert str(g.merge_policy[acc]) == "sum"
    merged = forward(g.nodes[props[0]], x) + forward(g.nodes[props[1]], x)
    ref = forward(g.nodes[det], forward(g.nodes[acc], merged))
    assert np.array_equal(compose(g, x), ref)


def test_concat_merge_and_adjoint():
    b = GraphBuilder(R4)
    b.add("a", Kind.MODULATE, ModulateParams(np.full((4, 4), 2.0)), inputs=[SOURCE])
    b.add("b", Kind.MODULATE, ModulateParams(np.full((4, 4), 3.0)), inputs=[SOURCE])
    b.add("c", Kind.ACCUMULATE, AccumulateParams("x"), inputs=["a", "b"], merge="concat(y)")
    g = b.build()
    assert validate(g) == []
    x = R4.random(np.random.default_rng(1))
    y = compose(g, x)
    assert y.shape == (8,)
    assert np.allclose(y, np.concatenate([2 * x.sum(1), 3 * x.sum(1)]))
    assert dot_test(g, trials=10).max_rel_err < 1e-13


def test_linear_chain_superposition():
    g = build_modality("cassi", {"n": 16, "bands": 4})
    rng = np.random.default_rng(2)
    lin = chain(g.in_type, [(n.kind, n.params) for n in (g.nodes[i] for i in g.order()[:-1])] +
                [(Kind.DETECT, DetectParams(1))])
    x, z = lin.in_type.random(rng), lin.in_type.random(rng)
    a, b = rng.standard_normal(2)
    lhs = compose(lin, a * x + b * z)
    rhs = a * compose(lin, x) + b * compose(lin, z)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)


def test_materialized_graph_is_product_of_node_matrices():
    g = build_modality("mri", {"n": 8, "k_samples": 20})
    A = materialize(g)
    P = np.eye(g.in_type.size, dtype=complex)
    for nid in g.order():
        P = materialize(g.nodes[nid]) @ P
    assert np.max(np.abs(A - P)) < 1e-10


def test_mri_adjoint_is_real_part_of_conjugate_transpose():
    g = build_modality("mri", {"n": 16, "k_samples": 60})
    A = materialize(g)
    y = g.out_type.random(np.random.default_rng(3))
    assert np.max(np.abs(compose_adjoint(g, y).ravel() - (A.conj().T @ y).real)) < 1e-10


def test_sample_all_adjoint_is_identity():
    t = EdgeType((6,), "complex128")
    g = chain(t, [(Kind.SAMPLE, SampleParams(np.arange(6)))])
    y = t.random(np.random.default_rng(4))
    assert np.array_equal(compose_adjoint(g, y), y)


def test_ct_whole_graph_dot_test_linearized():
    g = build_modality("ct", {"n": 32, "angles": 12})
    x_op = s1_test_set(g.in_type, 0)[0]
    assert dot_test(g, trials=20, x_op=x_op).max_rel_err < 1e-6


def test_nonlinear_adjoint_needs_operating_point():
    g = build_modality("cassi", {"n": 8, "bands": 4})
    with pytest.raises(LinearizationRequiredError):
        compose_adjoint(g, g.out_type.random(np.random.default_rng(5)))


def test_compose_is_deterministic():
    g = build_modality("cassi")
    x = s1_test_set(g.in_type, 0)[1]
    assert np.array_equal(compose(g, x), compose(g, x))


def test_compose_wraps_fields():
    g = build_modality("ct", {"n": 16, "angles": 6})
    f = Field(np.ones(g.in_type.shape), g.in_type.axes, g.in_type.units)
    y = compose(g, f)
    assert isinstance(y, Field) and y.shape == g.out_type.shape


def test_serialize_roundtrip_bit_exact():
    g = build_modality("cassi")
    h = deserialize(serialize(g))
    assert validate(h) == []
    x = s1_test_set(g.in_type, 0)[0]
    assert np.array_equal(compose(g, x), compose(h, x))
    assert serialize(h) == serialize(g)


@pytest.mark.parametrize("name", ["oct", "mri", "compton", "beam_hardening_ct", "phase_wrapped_mri"])
def test_serialize_roundtrip_registry(name):
    g = build_modality(name)
    h = deserialize(serialize(g))
    x = s1_test_set(g.in_type, 0)[2]
    assert np.array_equal(compose(g, x), compose(h, x))


def test_unknown_kind_is_parse_error():
    doc = yaml.safe_load(serialize(build_modality("ct", {"n": 8, "angles": 4})))
    doc["nodes"][0]["kind"] = "teleport"
    with pytest.raises(GraphParseError, match="teleport"):
        deserialize(yaml.safe_dump(doc))


def test_missing_units_is_parse_error():
    doc = yaml.safe_load(serialize(build_modality("ct", {"n": 8, "angles": 4})))
    et = doc["edge_types"]
    first = et[0] if isinstance(et, list) else next(iter(et.values()))
    first.pop("units", None)
    (first.get("type") or {}).pop("units", None)
    with pytest.raises(GraphParseError, match="units"):
        deserialize(yaml.safe_dump(doc))


def test_malformed_yaml_reports_line():
    with pytest.raises(GraphParseError, match="line"):
        deserialize("nodes: [\n  a: 1\n")
