import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opgraph.errors import NumericDomainError, ParamError, TypedInputError
from opgraph.field import EdgeType, Field
from opgraph.metrics import dot_test, power_iteration
from opgraph.metrics.phantoms import disk
from opgraph.operators import (AccumulateParams, ConvolveParams, DetectParams, DisperseParams,
                               EncodeParams, Kind, ModulateParams, PrimitiveNode, ProjectParams,
                               PropagateParams, SampleParams, ScatterParams, TransformParams,
                               adjoint, forward, klein_nishina_kernel, linearize,
                               lipschitz_constant, materialize, propagating_band)

C2 = EdgeType((16, 16), "complex128", axes=("y", "x"))
R2 = EdgeType((16, 16), axes=("y", "x"))
R3 = EdgeType((4, 16, 16), axes=("lambda", "y", "x"))


def rng(seed=0):
    return np.random.default_rng(seed)


def linear_nodes():
    g = rng(1)
    e = EdgeType((6, 8, 8), axes=("E", "y", "x"))
    return {
        "P": PrimitiveNode("propagate", PropagateParams(2.5), C2),
        "M": PrimitiveNode("modulate", ModulateParams(g.random((16, 16)) + 1j * g.random((16, 16))), C2),
        "Pi": PrimitiveNode("project", ProjectParams(np.linspace(0, np.pi, 9, endpoint=False), 23), R2),
        "F": PrimitiveNode("encode", EncodeParams(g.uniform(-8, 8, (40, 2))), C2),
        "C": PrimitiveNode("convolve", ConvolveParams(g.random((5, 3))), R2),
        "Sigma": PrimitiveNode("accumulate", AccumulateParams("lambda"), R3),
        "D1": PrimitiveNode("detect", DetectParams(1, g=1.3), C2),
        "S": PrimitiveNode("sample", SampleParams(np.sort(g.choice(256, 80, replace=False))), C2),
        "W": PrimitiveNode("disperse", DisperseParams(2.0, -1.0, np.arange(4.0)), R3),
        "R": PrimitiveNode("scatter", ScatterParams(g.random((6, 6)), "E", g.random((8, 8))), e),
    }


# -- worked forward examples -------------------------------------------------

def test_modulate_all_ones_is_identity():
    x = C2.random(rng())
    y = forward(PrimitiveNode("M", ModulateParams(np.ones((16, 16))), C2), x)
    assert np.array_equal(y, x)


def test_propagate_zero_distance_on_band():
    node = PrimitiveNode("P", PropagateParams(0.0, lam=0.5), C2)
    band = propagating_band(node.params, 16, 16)
    X = np.fft.fft2(C2.random(rng())) * band
    x = np.fft.ifft2(X)
    y = forward(node, x)
    assert np.linalg.norm(y - x) / np.linalg.norm(x) < 1e-12


def test_propagate_roundtrip_on_band():
    fwd = PrimitiveNode("P", PropagateParams(3.0, lam=0.7), C2)
    back = PrimitiveNode("P", PropagateParams(-3.0, lam=0.7), C2)
    band = propagating_band(fwd.params, 16, 16)
    x = np.fft.ifft2(np.fft.fft2(C2.random(rng(2))) * band)
    z = forward(back, forward(fwd, x))
    assert np.linalg.norm(z - x) / np.linalg.norm(x) < 1e-10


def test_intensity_detect_of_3_plus_4i():
    t = EdgeType((1,), "complex128")
    y = forward(PrimitiveNode("D", DetectParams(4, g=1.0), t), np.array([3 + 4j]))
    assert y.dtype == np.float64 and y[0] == 25.0


def test_encode_dc_is_sum():
    x = C2.random(rng(3))
    y = forward(PrimitiveNode("F", EncodeParams(np.zeros((1, 2))), C2), x)
    assert abs(y[0] - x.sum()) < 1e-12 * np.abs(x).sum()


def test_exp_atten_alpha_zero_gives_ones():
    x = R2.random(rng(4))
    y = forward(PrimitiveNode("Lambda", TransformParams("exp_atten", 0.0), R2), x)
    assert np.array_equal(y, np.ones_like(x))


def test_project_disk_matches_chord_length():
    n, r = 64, 0.6
    t = EdgeType((n, n), axes=("y", "x"))
    node = PrimitiveNode("Pi", ProjectParams([0.0], 91, 1.0, 2.0 / n), t)
    y = forward(node, disk(n, n, r, supersample=8))[0]
    s = (np.arange(91) - 45) * (2.0 / n)
    ref = 2 * np.sqrt(np.clip(r * r - s * s, 0, None))
    inner = np.abs(s) < 0.8 * r
    assert np.max(np.abs(y[inner] - ref[inner]) / ref[inner]) < 0.01


def test_sample_adjoint_zero_fills():
    node = PrimitiveNode("S", SampleParams([0, 2]), EdgeType((4,)))
    assert adjoint(node, np.array([5.0, 7.0])).tolist() == [5.0, 0.0, 7.0, 0.0]


def test_accumulate_adjoint_replicates():
    t = EdgeType((3, 4, 5), axes=("lambda", "y", "x"))
    node = PrimitiveNode("Sigma", AccumulateParams("lambda"), t)
    y = rng(5).standard_normal((4, 5))
    z = adjoint(node, y)
    assert z.shape == (3, 4, 5) and all(np.array_equal(z[i], y) for i in range(3))


def test_sample_projection_identities():
    node = PrimitiveNode("S", SampleParams([1, 4, 7]), EdgeType((9,)))
    A = materialize(node)
    assert np.array_equal(A @ A.T, np.eye(3))
    d = np.diag(A.T @ A)
    assert np.array_equal(np.flatnonzero(d), [1, 4, 7]) and set(d) == {0.0, 1.0}


def test_convolve_same_size_zero_padding():
    t = EdgeType((7,), axes=("x",))
    x = np.zeros(7)
    x[0] = 1.0
    y = forward(PrimitiveNode("C", ConvolveParams(np.array([1.0, 2.0, 3.0])), t), x)
    # impulse at the left border: the kernel tail falls off the grid
    assert np.allclose(y, [2.0, 3.0, 0, 0, 0, 0, 0], rtol=0, atol=1e-14)


def test_disperse_shifts_each_band():
    t = EdgeType((3, 2, 4), axes=("lambda", "y", "x"))
    x = np.zeros(t.shape)
    x[:, :, 0] = 1.0
    node = PrimitiveNode("W", DisperseParams(1.0, 0.0, np.arange(3.0)), t)
    y = forward(node, x)
    assert y.shape[-1] >= 6
    for j in range(3):
        assert y[j, 0, j] == 1.0 and y[j].sum() == 2.0


def test_klein_nishina_kernel_is_finite_and_downshifts():
    K = klein_nishina_kernel(8)
    assert K.shape == (8, 8) and np.all(np.isfinite(K)) and np.all(K >= 0)
    # rows are output bins: scattering never moves a photon to a higher energy bin
    assert np.array_equal(np.tril(K, -1), np.zeros_like(K))
    assert np.any(np.triu(K, 1) > 0)


# -- adjoints -----------------------------------------------------------------

@pytest.mark.parametrize("name", list(linear_nodes()))
def test_adjoint_equals_materialized_transpose(name):
    node = linear_nodes()[name]
    if node.in_type.size > 4096:
        pytest.skip("too large to materialize")
    A = materialize(node)
    y = node.out_type.random(rng(6))
    ref = A.conj().T @ y.ravel()
    got = adjoint(node, y).ravel()
    if not node.in_type.is_complex and np.iscomplexobj(ref):
        ref = ref.real
    assert np.max(np.abs(got - ref)) < 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_propagate_dot_test_table_level():
    assert dot_test(linear_nodes()["P"], trials=20, seed=1).max_rel_err < 1e-14


def test_scatter_dot_test_table_level():
    t = EdgeType((8, 6, 6), axes=("E", "y", "x"))
    node = PrimitiveNode("R", ScatterParams(rng(7).random((8, 8)), "E"), t)
    assert dot_test(node, trials=20, seed=2).max_rel_err < 1e-11


def test_modulate_dot_test_table_level():
    mask = (rng(13).random((16, 16)) > 0.5).astype(float)
    node = PrimitiveNode("M", ModulateParams(mask), C2)
    assert dot_test(node, trials=20, seed=3).max_rel_err < 1e-15


def test_modulate_dot_test_general_pattern():
    # arbitrary complex patterns: both sides round differently, a few ulp apart
    assert dot_test(linear_nodes()["M"], trials=20, seed=3).max_rel_err < 1e-13


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(sorted(linear_nodes())), st.integers(0, 2 ** 31 - 1),
       st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(name, seed, a, b):
    node = linear_nodes()[name]
    g = np.random.default_rng(seed)
    x, y = node.in_type.random(g), node.in_type.random(g)
    lhs = forward(node, a * x + b * y)
    rhs = a * forward(node, x) + b * forward(node, y)
    scale = max(np.linalg.norm(rhs), np.linalg.norm(forward(node, x)), 1e-300)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * scale * (1 + abs(a) + abs(b))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_linearized_nonlinear_adjoints(seed):
    g = np.random.default_rng(seed)
    cases = [(DetectParams(2, x0=0.5), C2), (DetectParams(3, x0=0.2), R2), (DetectParams(4), C2)]
    for p, t in cases:
        node = linearize(PrimitiveNode("D", p, t), t.random(g))
        assert dot_test(node, trials=3, seed=seed).max_rel_err < 1e-6
    for p in (TransformParams("exp_atten", 1.3), TransformParams("poly", (0, 1, 0.2)),
              TransformParams("saturate", (-0.4, 0.4))):
        node = linearize(PrimitiveNode("Lambda", p, R2), R2.random(g))
        assert dot_test(node, trials=3, seed=seed).max_rel_err < 1e-6


# -- linearization and Lipschitz constants -------------------------------------

def test_poly_linearization_is_constant_gain():
    x = R2.random(rng(8))
    node = linearize(PrimitiveNode("Lambda", TransformParams("poly", (0.0, 2.0)), R2), R2.random(rng(9)))
    assert np.allclose(forward(node, x), 2 * x, rtol=0, atol=1e-15)


def test_exp_atten_derivative_at_zero():
    t = EdgeType((1,))
    node = linearize(PrimitiveNode("Lambda", TransformParams("exp_atten", 1.0), t), np.array([0.0]))
    assert forward(node, np.array([1.0]))[0] == pytest.approx(-1.0, abs=1e-15)


def test_intensity_jacobian_vs_finite_differences():
    g = rng(10)
    t = EdgeType((5,), "complex128")
    base = PrimitiveNode("D", DetectParams(4, g=1.5), t)
    h = 1e-5
    for _ in range(10):
        x0, dx = t.random(g), t.random(g)
        jac = forward(linearize(base, x0), dx)
        fd = (forward(base, x0 + h * dx) - forward(base, x0 - h * dx)) / (2 * h)
        assert np.linalg.norm(jac - fd) / np.linalg.norm(fd) < 1e-4


def test_lipschitz_examples():
    assert lipschitz_constant(TransformParams("wrap"), 5.0) == 1.0
    assert lipschitz_constant(TransformParams("poly", (0, 3, 0, 2)), 1.0) == pytest.approx(9.0)
    assert lipschitz_constant(TransformParams("exp_atten", 1.0), 0.0) == pytest.approx(1.0)


# -- Detect family distinctness ------------------------------------------------

def test_detect_family_homogeneity():
    g = rng(11)
    x = C2.random(g)
    c = 0.7 - 1.9j
    d1 = PrimitiveNode("D", DetectParams(1, g=2.0), C2)
    d4 = PrimitiveNode("D", DetectParams(4, g=2.0), C2)
    d5 = PrimitiveNode("D", DetectParams(5, g=2.0, phi=0.3), C2)
    assert np.allclose(forward(d1, c * x), c * forward(d1, x), atol=1e-12)
    assert np.allclose(forward(d4, c * x), abs(c) ** 2 * forward(d4, x), atol=1e-12)
    assert not np.allclose(forward(d5, 1j * x), 1j * forward(d5, x))


def test_wrap_range_and_periodicity():
    x = rng(12).uniform(-20, 20, (16, 16))
    node = PrimitiveNode("Lambda", TransformParams("wrap"), R2)
    w = forward(node, x)
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    assert np.max(np.abs(forward(node, x + 2 * np.pi) - w)) < 1e-12


# -- norms --------------------------------------------------------------------

def test_accumulate_norm_sqrt_n():
    t = EdgeType((15, 8, 8), axes=("lambda", "y", "x"))
    est = power_iteration(PrimitiveNode("Sigma", AccumulateParams("lambda"), t))
    assert est.value == pytest.approx(math.sqrt(15), rel=1e-6)


def test_modulate_norm_is_max_abs():
    node = PrimitiveNode("M", ModulateParams(np.array([2.0, 3.0])), EdgeType((2,)))
    assert np.array_equal(materialize(node), np.diag([2.0, 3.0]))
    assert power_iteration(node).value == pytest.approx(3.0, rel=1e-8)


def test_sample_single_index_matrix():
    A = materialize(PrimitiveNode("S", SampleParams([1]), EdgeType((3,))))
    assert A.tolist() == [[0.0, 1.0, 0.0]]


# -- errors -------------------------------------------------------------------

def test_shape_mismatch_is_typed_error():
    node = linear_nodes()["M"]
    with pytest.raises(TypedInputError):
        forward(node, np.zeros((8, 8), complex))


def test_non_finite_input_rejected():
    x = R2.random(rng())
    x[0, 0] = np.nan
    with pytest.raises(NumericDomainError):
        forward(linear_nodes()["C"], x)


def test_log_domain_error():
    node = PrimitiveNode("Lambda", TransformParams("log", 0.1), EdgeType((2,)))
    with pytest.raises(NumericDomainError):
        forward(node, np.array([1.0, -1.0]))


def test_units_checked_on_fields():
    node = PrimitiveNode("M", ModulateParams(np.ones((16, 16))), R2)
    with pytest.raises(TypedInputError):
        forward(node, Field(np.ones((16, 16)), ("y", "x"), "m"))


@pytest.mark.parametrize("make", [
    lambda: TransformParams("poly", tuple(range(8))),
    lambda: TransformParams("saturate", (1.0, 0.0)),
    lambda: TransformParams("log", 0.0),
    lambda: DetectParams(4, x0=1.0),
    lambda: DetectParams(2),
    lambda: DetectParams(1, g=0.0),
    lambda: SampleParams([3, 1]),
    lambda: ConvolveParams(np.ones((2, 3))),
    lambda: ProjectParams([], 5),
    lambda: PropagateParams(1.0, lam=0.0),
])
def test_bad_params_rejected(make):
    with pytest.raises(ParamError):
        make()


def test_kind_parse_aliases():
    assert Kind.parse("Pi") is Kind.PROJECT and Kind.parse("Σ") is Kind.ACCUMULATE
    with pytest.raises(ParamError):
        Kind.parse("teleport")
