"""Registry-aware glue: oracle specs, the 20-object fidelity protocol and search targets."""

from __future__ import annotations

import numpy as np

from opgraph.graph_ir import compose
from opgraph.harness.oracles import OracleSpec, has_oracle, oracle_fn
from opgraph.harness.search import SearchTarget
from opgraph.metrics import FidelityReport, e_img, s1_test_set
from opgraph.registry import get_record

# desk sizes for the necessity searches
SEARCH_SIZES = {
    "compton": {"n": 8, "energy_bins": 8},
    "beam_hardening_ct": {"n": 16, "angles": 12, "energy_bins": 4},
}


def oracle_spec(name: str, sizes: dict | None = None, seed: int = 0) -> OracleSpec:
    return OracleSpec(name, get_record(name).bind(sizes), seed)


def modality_fidelity(name: str, sizes: dict | None = None, seed: int = 0) -> FidelityReport:
    """e_img of the registry graph against its oracle over the ten phantoms and ten Gaussian objects."""
    g = get_record(name).build(sizes, seed)
    ref = oracle_fn(oracle_spec(name, sizes, seed))
    return e_img(ref, lambda x: compose(g, x), s1_test_set(g.in_type, seed))


def search_target(name: str, sizes: dict | None = None, seed: int = 0) -> SearchTarget:
    """Oracle of ``name`` wrapped for extension_search, with its acquisition geometry as hints."""
    if not has_oracle(name):
        raise KeyError(f"no oracle for {name!r}")
    rec = get_record(name)
    if sizes is None:
        sizes = SEARCH_SIZES.get(name)
    spec = oracle_spec(name, sizes, seed)
    g = rec.build(sizes, seed)
    p = spec.params()
    hints = {}
    if "thetas" in p:
        hints["project"] = {k: p[k] for k in ("thetas", "n_det", "det_spacing", "pixel_size")}
    if "omega" in p:
        hints["omega"] = np.asarray(p["omega"])
    return SearchTarget(name, g.in_type, oracle_fn(spec), s1_test_set(g.in_type, seed), hints)
