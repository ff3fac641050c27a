"""Regenerate the frozen oracle outputs: ``python3 tests/golden/make_golden.py``.

Each modality's loop oracle is run at its registry default sizes on the
first phantom and on one seeded Gaussian object. Only rerun this after a
deliberate change to an oracle.
"""

from pathlib import Path

import numpy as np

from opgraph.harness.oracles import has_oracle, run_oracle
from opgraph.harness.protocol import oracle_spec
from opgraph.metrics import s1_test_set
from opgraph.registry import build_modality, load_registry

HERE = Path(__file__).parent


def inputs(name):
    t = build_modality(name).in_type
    objs = s1_test_set(t, seed=0)
    return objs[0], objs[10]


def main():
    out = {}
    for rec in load_registry(include_auxiliary=True):
        if not has_oracle(rec.name):
            continue
        spec = oracle_spec(rec.name)
        x0, x1 = inputs(rec.name)
        out[f"{rec.name}__phantom"] = run_oracle(spec, x0)
        out[f"{rec.name}__gaussian"] = run_oracle(spec, x1)
    np.savez_compressed(HERE / "oracles.npz", **out)
    print(f"wrote {len(out)} arrays")


if __name__ == "__main__":
    main()
