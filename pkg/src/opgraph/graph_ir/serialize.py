"""YAML graph files with bit-exact (hexadecimal) floating-point encoding."""

from __future__ import annotations

import dataclasses
import re
from typing import Any

import numpy as np
import yaml

from opgraph.errors import GraphParseError, OpGraphError
from opgraph.field import DTYPES, EdgeType
from opgraph.graph_ir.graph import Merge, OperatorGraph, validate
from opgraph.operators import Kind, PrimitiveNode
from opgraph.operators.params import PARAM_TYPES

FORMAT = "opgraph-graph/1"
_HEX = re.compile(r"^[+-]?(0x[0-9a-f]+(\.[0-9a-f]*)?p[+-]?\d+|inf|nan)$")


def _enc_float(v: float) -> str:
    return float(v).hex()


def _enc(v: Any):
    if isinstance(v, np.ndarray):
        flat = v.ravel()
        if v.dtype.kind == "c":
            data = [_enc_float(z) for c in flat for z in (c.real, c.imag)]
        elif v.dtype.kind == "f":
            data = [_enc_float(z) for z in flat]
        else:
            data = [int(z) for z in flat]
        return {"array": {"shape": list(v.shape), "dtype": str(v.dtype), "data": data}}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _enc_float(v)
    if isinstance(v, tuple):
        return [_enc(z) for z in v]
    return v


def _dec(v: Any, path: str):
    if isinstance(v, dict) and set(v) == {"array"}:
        a = v["array"]
        try:
            dtype = np.dtype(a["dtype"])
            shape = tuple(int(s) for s in a["shape"])
            data = a["data"]
        except (KeyError, TypeError) as exc:
            raise GraphParseError(f"{path}: malformed array ({exc})") from None
        try:
            if dtype.kind == "c":
                f = [_dec_float(z, path) for z in data]
                arr = np.array(f[0::2], dtype=np.float64) + 1j * np.array(f[1::2], dtype=np.float64)
            elif dtype.kind == "f":
                arr = np.array([_dec_float(z, path) for z in data], dtype=np.float64)
            else:
                arr = np.array(data, dtype=dtype)
            return arr.astype(dtype).reshape(shape)
        except ValueError as exc:
            raise GraphParseError(f"{path}: {exc}") from None
    if isinstance(v, list):
        return tuple(_dec(z, f"{path}[{i}]") for i, z in enumerate(v))
    if isinstance(v, str) and _HEX.match(v):
        return float.fromhex(v)
    return v


def _dec_float(z, path):
    if isinstance(z, str):
        try:
            return float.fromhex(z)
        except ValueError:
            raise GraphParseError(f"{path}: bad hexadecimal float {z!r}") from None
    if isinstance(z, (int, float)):
        return float(z)
    raise GraphParseError(f"{path}: expected a number, got {z!r}")


def _type_dict(t: EdgeType) -> dict:
    return t.to_dict()


def _type_from(d: Any, path: str) -> EdgeType:
    if not isinstance(d, dict):
        raise GraphParseError(f"{path}: expected an edge-type mapping")
    for key in ("shape", "dtype", "units"):
        if key not in d:
            raise GraphParseError(f"{path}: missing field {key!r}")
    if d["dtype"] not in DTYPES:
        raise GraphParseError(f"{path}.dtype: unknown dtype {d['dtype']!r}")
    try:
        return EdgeType(tuple(d["shape"]), d["dtype"], str(d["units"]), tuple(d.get("axes") or ()))
    except OpGraphError as exc:
        raise GraphParseError(f"{path}: {exc}") from None


def params_to_dict(params) -> dict:
    return {f.name: _enc(getattr(params, f.name)) for f in dataclasses.fields(params)}


def params_from_dict(kind: Kind, d: Any, path: str):
    cls = PARAM_TYPES[kind]
    if not isinstance(d, dict):
        raise GraphParseError(f"{path}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise GraphParseError(f"{path}: unknown field(s) {sorted(unknown)} for {kind.value}")
    kw = {k: _dec(v, f"{path}.{k}") for k, v in d.items()}
    try:
        return cls(**kw)
    except (OpGraphError, TypeError, ValueError) as exc:
        raise GraphParseError(f"{path}: {exc}") from None


def graph_to_dict(g: OperatorGraph) -> dict:
    return {
        "format": FORMAT,
        "name": g.name,
        "source": _type_dict(g.source_type),
        "nodes": [{
            "id": nid,
            "kind": n.kind.value,
            "in_type": _type_dict(n.in_type),
            "out_units": n.out_units,
            "jacobian": n.jacobian,
            "params": params_to_dict(n.params),
        } for nid, n in g.nodes.items()],
        "edges": [list(e) for e in g.edges],
        "edge_types": [{"edge": list(e), "type": _type_dict(t)} for e, t in g.edge_types.items()],
        "sink": g.sink,
        "merge_policy": {k: str(v) for k, v in g.merge_policy.items()},
    }


def serialize(g: OperatorGraph) -> str:
    """YAML text for a well-formed graph; floats are written as ``float.hex``."""
    bad = validate(g)
    if bad:
        raise GraphParseError("refusing to serialize a malformed graph: " + "; ".join(map(str, bad)))
    return yaml.safe_dump(graph_to_dict(g), sort_keys=False, allow_unicode=True, width=120)


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise GraphParseError(f"{path}: missing field {key!r}")
    return d[key]


def graph_from_dict(doc: Any, path: str = "graph") -> OperatorGraph:
    if not isinstance(doc, dict):
        raise GraphParseError(f"{path}: expected a mapping at top level")
    src = _type_from(_req(doc, "source", path), f"{path}.source")
    nodes = {}
    raw_nodes = _req(doc, "nodes", path)
    if not isinstance(raw_nodes, list):
        raise GraphParseError(f"{path}.nodes: expected a list")
    for i, nd in enumerate(raw_nodes):
        p = f"{path}.nodes[{i}]"
        if not isinstance(nd, dict):
            raise GraphParseError(f"{p}: expected a mapping")
        nid = str(_req(nd, "id", p))
        kind_text = _req(nd, "kind", p)
        try:
            kind = Kind.parse(str(kind_text))
        except OpGraphError:
            raise GraphParseError(f"{p}.kind: unknown primitive kind {kind_text!r}") from None
        in_type = _type_from(_req(nd, "in_type", p), f"{p}.in_type")
        params = params_from_dict(kind, nd.get("params", {}), f"{p}.params")
        try:
            nodes[nid] = PrimitiveNode(kind, params, in_type, nd.get("out_units"), bool(nd.get("jacobian", False)))
        except OpGraphError as exc:
            raise GraphParseError(f"{p}: {exc}") from None
    edges = []
    for i, e in enumerate(_req(doc, "edges", path)):
        if not (isinstance(e, list) and len(e) == 2):
            raise GraphParseError(f"{path}.edges[{i}]: expected [src, dst]")
        edges.append((str(e[0]), str(e[1])))
    etypes = {}
    for i, et in enumerate(doc.get("edge_types") or []):
        p = f"{path}.edge_types[{i}]"
        e = _req(et, "edge", p)
        etypes[(str(e[0]), str(e[1]))] = _type_from(_req(et, "type", p), f"{p}.type")
    merges = {}
    for k, v in (doc.get("merge_policy") or {}).items():
        try:
            merges[str(k)] = Merge.parse(str(v))
        except OpGraphError as exc:
            raise GraphParseError(f"{path}.merge_policy.{k}: {exc}") from None
    return OperatorGraph(src, nodes, tuple(edges), str(_req(doc, "sink", path)), etypes, merges,
                         str(doc.get("name") or ""))


def deserialize(text: str) -> OperatorGraph:
    """Parse YAML text back into a graph (not validated; call ``validate``)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "input"
        raise GraphParseError(f"{where}: {getattr(exc, 'problem', exc)}") from None
    return graph_from_dict(doc)
