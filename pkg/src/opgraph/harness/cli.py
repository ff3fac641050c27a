"""Command-line entry point ``opgraph``.

Exit status is 0 when every threshold of the command passes, 1 when one
fails, and 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from opgraph.errors import OpGraphError
from opgraph.field import Field
from opgraph.graph_ir import D_MAX, N_MAX, compose, deserialize, serialize, validate
from opgraph.harness.io import read_field, write_csv, write_field, write_report

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--size", type=int, default=None, help="spatial extent n for modalities that have one")
    common.add_argument("--epsilon", type=float, default=0.01, help="fidelity tolerance (default 0.01)")
    common.add_argument("--nmax", type=int, default=N_MAX, help=f"node budget (default {N_MAX})")
    common.add_argument("--dmax", type=int, default=D_MAX, help=f"depth budget (default {D_MAX})")
    common.add_argument("--out-dir", type=Path, default=Path("reports"), help="report directory")
    common.add_argument("--quiet", action="store_true", help="print only the summary line")

    ap = argparse.ArgumentParser(prog="opgraph", description="Primitive-graph forward models and their checks.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("validate-adjoints", parents=[common], help="dot tests for all eleven primitives")
    p = sub.add_parser("validate-registry", parents=[common], help="structure and fidelity of every template")
    p.add_argument("--modality", action="append", help="restrict to these modalities")
    p.add_argument("--structure-only", action="store_true", help="skip the oracle comparison")
    p = sub.add_parser("closure-test", parents=[common], help="frozen-library closure test")
    p.add_argument("--frozen", type=Path, required=True, help="file listing the frozen kinds")
    p.add_argument("--modality", action="append", help="restrict to these modalities")
    p = sub.add_parser("extension-check", parents=[common], help="bounded search with kinds removed")
    p.add_argument("--target", required=True, help="registry modality whose oracle is the target")
    p.add_argument("--without", action="append", required=True, help="kind to exclude (repeatable)")
    p.add_argument("--max-nodes", type=int, default=4)
    p.add_argument("--eval-cap", type=int, default=None)
    p = sub.add_parser("basis-growth", parents=[common], help="cumulative primitive count")
    p.add_argument("--csv", type=Path, required=True, help="output CSV path")
    p.add_argument("--plot", type=Path, default=None, help="optional PNG path")
    p = sub.add_parser("compose-run", parents=[common], help="evaluate a graph file on a field file")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p = sub.add_parser("export-graph", parents=[common], help="write a registry graph and a test input")
    p.add_argument("--modality", required=True)
    p.add_argument("--output", type=Path, required=True, help="graph file path")
    p.add_argument("--phantom", type=Path, default=None, help="optional field file of a phantom input")
    sub.add_parser("norms", parents=[common], help="operator-norm report")
    return ap


def _kinds_from_file(path: Path) -> list[str]:
    text = path.read_text()
    text = re.sub(r"#.*", "", text)
    return [t for t in re.split(r"[\s,\[\]\-]+", text) if t]


def _emit(args, name: str, report: dict, summary: str, ok: bool) -> int:
    path = write_report(args.out_dir / f"{name}.json", report)
    if not args.quiet:
        print(summary)
    print(f"{'PASS' if ok else 'FAIL'} {name}: report {path}")
    return EXIT_OK if ok else EXIT_FAIL


def _validate_adjoints(args) -> int:
    from opgraph.harness.suites import adjoint_suite
    rep = adjoint_suite(args.seed)
    lines = [f"{r['symbol']:>2} {r['kind']:<11} max rel err {r['max_rel_err']:.2e} "
             f"(< {r['threshold']:.0e}) {'ok' if r['passed'] else 'FAIL'}" for r in rep["rows"]]
    return _emit(args, "adjoints", rep, "\n".join(lines), rep["passed"])


def _validate_registry(args) -> int:
    from opgraph.harness.suites import registry_report
    rep = registry_report(args.seed, args.modality, args.nmax, args.dmax, not args.structure_only, args.size)
    lines = []
    for r in rep["rows"]:
        e = f" e_mean {r['e_mean']:.2e} (< {r['e_limit']:.1e})" if "e_mean" in r else ""
        lines.append(f"{r['modality']:<24} {r['n_nodes']:>2}/{r['depth']:<2} {r['chain']:<32}{e}"
                     f" {'ok' if r['passed'] else 'FAIL'}")
    return _emit(args, "registry", rep, "\n".join(lines), rep["passed"])


def _closure(args) -> int:
    from opgraph.harness.closure import closure_test
    kinds = _kinds_from_file(args.frozen)
    rep = closure_test(kinds, args.modality, args.seed, args.epsilon)
    lines = [f"frozen: {' '.join(rep['frozen_kinds'])}  seed {rep['seed']}"]
    for r in rep["rows"]:
        lines.append(f"{r['modality']:<24} {r['method']:<8} {r['chain']:<28} e_mean {r['e_mean']:.2e}"
                     f" new primitive: {'Y (' + ' '.join(r['missing_kinds']) + ')' if r['new_primitive'] else 'N'}")
    return _emit(args, "closure", rep, "\n".join(lines), not rep["flagged"])


def _extension(args) -> int:
    from opgraph.harness.protocol import SEARCH_SIZES, search_target
    from opgraph.harness.search import SearchBudget, extension_search
    if args.max_nodes > args.nmax:
        raise OpGraphError(f"--max-nodes {args.max_nodes} exceeds --nmax {args.nmax}")
    budget = SearchBudget(max_nodes=args.max_nodes).without(*args.without)
    if args.eval_cap is not None:
        budget = SearchBudget(**{**budget.to_dict(), "eval_cap": args.eval_cap})
    sizes = {**SEARCH_SIZES.get(args.target, {}), **({"n": args.size} if args.size else {})} or None
    res = extension_search(search_target(args.target, sizes, args.seed), budget, args.seed)
    rep = {**res.to_dict(), "seed": args.seed, "epsilon": args.epsilon, "without": sorted(args.without),
           "extension_needed": res.min_e_img > args.epsilon}
    summary = (f"target {args.target} without {', '.join(args.without)}: best {res.chain} "
               f"min e_img {res.min_e_img:.3e} (upper bound; {res.n_screened} of {res.n_candidates} screened)")
    return _emit(args, f"extension_{args.target}", rep, summary, res.min_e_img <= args.epsilon)


def _growth(args) -> int:
    from opgraph.registry import basis_growth
    steps = basis_growth()
    write_csv(args.csv, [s.to_row() for s in steps], ["N", "K", "introduced_kinds"])
    if args.plot:
        from opgraph.harness.plotting import plot_basis_growth
        plot_basis_growth(args.plot, steps)
    K = [s.K for s in steps]
    ok = all(a <= b for a, b in zip(K, K[1:]))
    if not args.quiet:
        print("\n".join(f"N={s.N:<3} K={s.K:<3} {' '.join(s.introduced)}" for s in steps if s.introduced))
    print(f"{'PASS' if ok else 'FAIL'} basis-growth: {len(steps)} modalities, K={K[-1]}; csv {args.csv}")
    return EXIT_OK if ok else EXIT_FAIL


def _compose_run(args) -> int:
    g = deserialize(args.graph.read_text())
    bad = validate(g, args.nmax, args.dmax)
    if bad:
        raise OpGraphError("invalid graph: " + "; ".join(map(str, bad)))
    f = read_field(args.input)
    write_field(args.output, compose(g, f))
    print(f"wrote {args.output} {tuple(g.out_type.shape)} {g.out_type.dtype}")
    return EXIT_OK


def _export(args) -> int:
    from opgraph.harness.suites import size_override
    from opgraph.metrics import phantom_object
    from opgraph.registry import build_modality
    g = build_modality(args.modality, size_override(args.modality, args.size), args.seed)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text(serialize(g))
    print(f"wrote {args.output}")
    if args.phantom:
        x = phantom_object("shepp_logan", g.in_type)
        write_field(args.phantom, Field.of(x, g.in_type))
        print(f"wrote {args.phantom}")
    return EXIT_OK


def _norms(args) -> int:
    from opgraph.harness.suites import norms_report
    rep = norms_report(args.seed, size=args.size)
    lines = [f"{r['operator']:<18} {r['norm']:.6f} ({'=' if r['relation'] == 'eq' else '<='} {r['expected']:.6f})"
             f" {'ok' if r['passed'] else 'FAIL'}" for r in rep["reference"]]
    for c in rep["chains"]:
        tag = "enforced" if c["enforced"] else "info"
        lines.append(f"{c['modality']:<24} max stage norm {c['max_norm']:.4f} (B={c['bound']}, {tag})"
                     f" {'ok' if c['passed'] else 'FAIL'}")
    return _emit(args, "norms", rep, "\n".join(lines), rep["passed"])


COMMANDS = {
    "validate-adjoints": _validate_adjoints, "validate-registry": _validate_registry,
    "closure-test": _closure, "extension-check": _extension, "basis-growth": _growth,
    "compose-run": _compose_run, "export-graph": _export, "norms": _norms,
}


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (OpGraphError, OSError, KeyError, ValueError) as e:
        print(f"opgraph {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
