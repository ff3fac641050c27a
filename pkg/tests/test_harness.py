import ast
import json
from pathlib import Path

import numpy as np
import pytest

from opgraph.errors import GraphParseError, ParamError
from opgraph.field import EdgeType, Field
from opgraph.harness.cli import main
from opgraph.harness.closure import FROZEN_9, closure_modalities, closure_test, parse_kinds
from opgraph.harness.io import add_noise, read_field, write_csv, write_field, write_report
from opgraph.harness.oracles import has_oracle, run_oracle
from opgraph.harness.protocol import modality_fidelity, oracle_spec
from opgraph.harness.search import SearchBudget, extension_search, modulate_target
from opgraph.metrics import s1_test_set
from opgraph.operators import Kind
from opgraph.registry import build_modality, load_registry

GOLDEN = Path(__file__).parent / "golden" / "oracles.npz"
ORACLE_NAMES = [r.name for r in load_registry(include_auxiliary=True) if has_oracle(r.name)]


# --- oracles ----------------------------------------------------------------

@pytest.fixture(scope="module")
def golden():
    with np.load(GOLDEN) as z:
        return dict(z)


@pytest.mark.parametrize("name", ORACLE_NAMES)
def test_oracle_matches_frozen_output(name, golden):
    xs = s1_test_set(build_modality(name).in_type, seed=0)
    spec = oracle_spec(name)
    for tag, x in (("phantom", xs[0]), ("gaussian", xs[10])):
        ref = golden[f"{name}__{tag}"]
        out = run_oracle(spec, x)
        assert out.shape == ref.shape
        assert np.allclose(out, ref, rtol=1e-10, atol=1e-12 * np.max(np.abs(ref)))


def test_oracles_do_not_import_operator_code():
    src = Path(__file__).parents[1] / "src" / "opgraph" / "harness" / "oracles.py"
    mods = set()
    for node in ast.walk(ast.parse(src.read_text())):
        if isinstance(node, ast.ImportFrom) and node.module:
            mods.add(node.module)
        elif isinstance(node, ast.Import):
            mods.update(a.name for a in node.names)
    assert not any(m.startswith(("opgraph.operators", "opgraph.graph_ir", "opgraph.registry")) for m in mods)


LINEAR = [r.name for r in load_registry() if has_oracle(r.name) and r.detect_family in (1, 5)
          and r.tier != "nonlinear"]


@pytest.mark.parametrize("name", LINEAR)
def test_linear_oracle_zero_in_zero_out(name):
    t = build_modality(name).in_type
    assert np.all(run_oracle(oracle_spec(name), np.zeros(t.shape, t.np_dtype)) == 0)


@pytest.mark.parametrize("name,limit", [("cassi", 1e-4), ("mri", 1e-6), ("lensless", 1e-5),
                                        ("oct", 1e-2), ("compton", 1e-2)])
def test_template_fidelity(name, limit):
    assert modality_fidelity(name).e_mean < limit


# --- io ---------------------------------------------------------------------

@pytest.mark.parametrize("dtype", ["real64", "complex128"])
def test_field_roundtrip(tmp_path, dtype):
    t = EdgeType((3, 5), dtype, "photons", ("a", "b"))
    f = Field.of(t.random(np.random.default_rng(0)), t)
    write_field(tmp_path / "f.bin", f)
    g = read_field(tmp_path / "f.bin")
    assert g.axes == f.axes and g.units == "photons" and g.dtype == dtype
    assert np.array_equal(g.data, f.data)


def test_field_file_errors(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"not json\n1234")
    with pytest.raises(GraphParseError):
        read_field(p)
    t = EdgeType((4,))
    write_field(p, Field.of(np.ones(4), t))
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(GraphParseError, match="bytes"):
        read_field(p)


def test_noise_off_by_default():
    y = np.arange(5.0)
    assert add_noise(y) is y
    n1, n2 = add_noise(y, 0.1, seed=3), add_noise(y, 0.1, seed=3)
    assert np.array_equal(n1, n2) and not np.array_equal(n1, y)
    assert np.iscomplexobj(add_noise(y + 0j, 0.1))


def test_reports_are_json(tmp_path):
    p = write_report(tmp_path / "r" / "x.json", {"a": np.float64(1.5), "b": np.arange(3), "c": float("inf"),
                                                 "k": frozenset({"b", "a"})})
    d = json.loads(Path(p).read_text())
    assert d == {"a": 1.5, "b": [0, 1, 2], "c": "inf", "k": ["a", "b"]}
    write_csv(tmp_path / "t.csv", [{"N": 1, "K": 2}], ["N", "K"])
    assert (tmp_path / "t.csv").read_text().splitlines() == ["N,K", "1,2"]


# --- search and closure -----------------------------------------------------

def test_search_recovers_modulation():
    t = EdgeType((8, 8), axes=("y", "x"))
    budget = SearchBudget(max_nodes=2, allowed_kinds={"M", "D"})
    res = extension_search(modulate_target(t), budget)
    assert res.min_e_img < 1e-8
    assert res.chain.startswith("M")


def test_search_budget_checks():
    with pytest.raises(ParamError):
        SearchBudget(allowed_kinds={"M"})
    with pytest.raises(ParamError):
        SearchBudget(max_nodes=0)
    b = SearchBudget().without("scatter")
    assert Kind.SCATTER not in b.allowed_kinds and len(b.allowed_kinds) == 10


def test_closure_membership_and_frozen_set():
    assert set(closure_modalities()) == {"oct", "photoacoustic", "sim", "phase_contrast",
                                         "electron_ptychography", "ghost_imaging", "thz_tds", "compton"}
    assert len(FROZEN_9) == 9 and Kind.SCATTER not in FROZEN_9 and Kind.TRANSFORM not in FROZEN_9
    assert set(parse_kinds(["C", "D", "project"])) == {Kind.CONVOLVE, Kind.DETECT, Kind.PROJECT}


def test_closure_oct_needs_no_new_primitive():
    rep = closure_test(FROZEN_9, ["oct"])
    (row,) = rep["rows"]
    assert row["e_mean"] < 0.01 and not row["new_primitive"] and not rep["flagged"]


# --- command line -----------------------------------------------------------

def test_cli_usage_errors(tmp_path, capsys):
    assert main(["no-such-command"]) == 2
    assert main(["compose-run", "--graph", str(tmp_path / "missing.yaml"), "--input", "x",
                 "--output", str(tmp_path / "y"), "--out-dir", str(tmp_path)]) == 2
    assert main(["extension-check", "--target", "nobody", "--without", "R", "--out-dir", str(tmp_path)]) == 2


def test_cli_validate_adjoints(tmp_path):
    assert main(["validate-adjoints", "--quiet", "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "adjoints.json").read_text())
    assert rep["passed"] and len(rep["rows"]) == 11 and rep["seed"] == 0


def test_cli_registry_structure(tmp_path):
    assert main(["validate-registry", "--structure-only", "--quiet", "--out-dir", str(tmp_path)]) == 0


def test_cli_compose_run_is_deterministic(tmp_path):
    g, x = tmp_path / "cassi.yaml", tmp_path / "phantom.bin"
    assert main(["export-graph", "--modality", "cassi", "--output", str(g), "--phantom", str(x)]) == 0
    outs = []
    for i in range(2):
        out = tmp_path / f"y{i}.bin"
        assert main(["compose-run", "--graph", str(g), "--input", str(x), "--output", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    y = read_field(tmp_path / "y0.bin")
    assert y.shape == build_modality("cassi").out_type.shape


def test_cli_basis_growth(tmp_path):
    csv_path, png = tmp_path / "growth.csv", tmp_path / "growth.png"
    assert main(["basis-growth", "--csv", str(csv_path), "--plot", str(png), "--quiet"]) == 0
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "N,K,introduced_kinds" and len(rows) == 41 and rows[-1].startswith("40,11")
    assert png.stat().st_size > 0


def test_cli_closure_frozen_file(tmp_path):
    f = tmp_path / "frozen.txt"
    f.write_text("C D Π M Σ P F S W  # no R, no Λ\n")
    assert main(["closure-test", "--frozen", str(f), "--modality", "oct", "--quiet",
                 "--out-dir", str(tmp_path)]) == 0


def test_cli_extension_check_compton(tmp_path):
    code = main(["extension-check", "--target", "compton", "--without", "scatter", "--eval-cap", "40",
                 "--quiet", "--out-dir", str(tmp_path)])
    rep = json.loads((tmp_path / "extension_compton.json").read_text())
    assert code == 1 and rep["min_e_img"] > 0.01 and rep["extension_needed"]
