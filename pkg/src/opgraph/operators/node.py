"""Primitive nodes and the module-level operator API."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from opgraph.errors import (LinearizationRequiredError, NumericDomainError,
                            OracleTooLargeError, ParamError, TypedInputError)
from opgraph.field import EdgeType, Field, as_array
from opgraph.operators.params import (PARAM_TYPES, DetectParams, Kind,
                                      TransformParams)
from opgraph.operators.primitives import IMPLS, Transform

MATERIALIZE_CAP = 4096


class LinearizationWarning(UserWarning):
    """A Jacobian was taken at a kink, using the left-sided derivative."""


@dataclass(frozen=True, eq=False)
class PrimitiveNode:
    """One primitive: kind, parameters and the input edge type it accepts.

    ``jacobian=True`` marks a Detect or Transform node that has been
    linearized at ``params.x_op``; its forward map is then the Jacobian.
    """

    kind: Kind
    params: object
    in_type: EdgeType
    out_units: Optional[str] = None
    jacobian: bool = False
    flags: tuple[str, ...] = ()
    out_type: EdgeType = field(init=False)

    def __post_init__(self):
        kind = Kind.parse(self.kind) if isinstance(self.kind, str) else Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not isinstance(self.params, PARAM_TYPES[kind]):
            raise ParamError(f"{kind.value} needs {PARAM_TYPES[kind].__name__}, "
                             f"got {type(self.params).__name__}")
        out = IMPLS[kind].infer(self.params, self.in_type)
        if self.out_units is not None:
            out = out.replace(units=self.out_units)
        if self.jacobian:
            if kind not in (Kind.DETECT, Kind.TRANSFORM):
                raise ParamError("only detect and transform nodes can be linearized")
            x_op = self.params.x_op
            if x_op is None:
                raise LinearizationRequiredError("linearized node needs an operating point")
            if x_op.shape != self.in_type.shape:
                raise TypedInputError(f"operating point shape {x_op.shape} != input {self.in_type.shape}")
        object.__setattr__(self, "out_type", out)

    @property
    def symbol(self) -> str:
        return self.kind.symbol

    @property
    def is_linear(self) -> bool:
        """True when the forward map (as evaluated) is linear."""
        if self.jacobian:
            return True
        if self.kind is Kind.DETECT:
            return self.params.is_linear
        return self.kind is not Kind.TRANSFORM

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.jacobian:
            return IMPLS[self.kind].jacobian(self.params, self.params.x_op, x, self.in_type)
        return IMPLS[self.kind].forward(self.params, x, self.in_type, self.out_type)

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        k, p = self.kind, self.params
        if k in (Kind.DETECT, Kind.TRANSFORM):
            if k is Kind.DETECT and p.is_linear:
                return IMPLS[k].adjoint_linear(p, y, self.in_type)
            if p.x_op is None:
                raise LinearizationRequiredError(
                    f"adjoint of a nonlinear {k.value} node needs an operating point x_op")
            return IMPLS[k].jacobian_adjoint(p, p.x_op, y, self.in_type)
        return IMPLS[k].adjoint(p, y, self.in_type, self.out_type)

    # graph-compatible interface used by materialize and the metrics adapters
    def forward(self, x):
        return forward(self, x)

    def adjoint(self, y):
        return adjoint(self, y)


def _check_input(x, t: EdgeType, what: str) -> tuple[np.ndarray, bool]:
    is_field = isinstance(x, Field)
    arr = as_array(x, t, what)
    if not np.all(np.isfinite(arr)):
        raise NumericDomainError(f"{what} contains non-finite values")
    return arr, is_field


def forward(node: PrimitiveNode, x):
    """Apply ``node`` to ``x`` (a Field or an ndarray of the declared type)."""
    arr, is_field = _check_input(x, node.in_type, "input")
    y = np.asarray(node.apply(arr), dtype=node.out_type.np_dtype).reshape(node.out_type.shape)
    return Field.of(y, node.out_type) if is_field else y


def adjoint(node: PrimitiveNode, y):
    """Apply the adjoint (linearized at ``params.x_op`` for nonlinear kinds)."""
    arr, is_field = _check_input(y, node.out_type, "adjoint input")
    x = node.apply_adjoint(arr)
    x = np.asarray(x, dtype=node.in_type.np_dtype).reshape(node.in_type.shape)
    return Field.of(x, node.in_type) if is_field else x


def linearize(node: PrimitiveNode, x_op) -> PrimitiveNode:
    """Jacobian node of a Detect or Transform primitive at ``x_op``.

    At a wrap branch point or saturate boundary the left-sided derivative is
    used and the returned node carries the flag ``"one_sided"``.
    """
    if node.kind not in (Kind.DETECT, Kind.TRANSFORM):
        raise ParamError(f"{node.kind.value} is linear; nothing to linearize")
    arr = as_array(x_op, node.in_type, "operating point")
    if not np.all(np.isfinite(arr)):
        raise NumericDomainError("operating point contains non-finite values")
    arr = np.array(arr, copy=True)
    flags = ()
    if node.kind is Kind.TRANSFORM:
        _, edge = Transform.derivative(node.params, arr)
        if np.any(edge):
            flags = ("one_sided",)
            warnings.warn(f"{node.params.family} linearized at {int(edge.sum())} kink point(s); "
                          "using the left-sided derivative", LinearizationWarning, stacklevel=2)
    params = replace(node.params, x_op=arr)
    return PrimitiveNode(node.kind, params, node.in_type, node.out_units, jacobian=True, flags=flags)


def lipschitz_constant(params: TransformParams, R: float) -> float:
    """Lipschitz constant of a Transform family on the domain |x| <= R."""
    fam, th = params.family, params.theta
    if fam == "exp_atten":
        a = abs(th[0])
        return a * math.exp(a * R)
    if fam == "log":
        return 1.0 / th[0]
    if fam == "poly":
        P = np.polynomial.Polynomial(th)
        d1 = P.deriv()
        pts = [-R, R] + [r.real for r in d1.deriv().roots() if abs(r.imag) < 1e-12 and abs(r.real) <= R]
        return float(max(abs(d1(t)) for t in pts))
    if fam == "saturate":
        return 1.0 if max(th[0], -R) < min(th[1], R) else 0.0
    return 1.0


def materialize(op, input_type: EdgeType | None = None, cap: int = MATERIALIZE_CAP) -> np.ndarray:
    """Dense matrix whose column j is ``op.forward(e_j)``.

    ``op`` is a PrimitiveNode or anything with ``forward`` and ``in_type``
    (an OperatorGraph qualifies). Nonlinear nodes must be linearized first.
    """
    t = input_type or op.in_type
    if t.size > cap:
        raise OracleTooLargeError(f"input dimension {t.size} exceeds the materialization cap {cap}")
    if not getattr(op, "is_linear", True):
        raise LinearizationRequiredError("materialize needs a linear or linearized operator")
    cols = []
    for j in range(t.size):
        e = np.zeros(t.size, dtype=t.np_dtype)
        e[j] = 1
        cols.append(np.asarray(op.forward(e.reshape(t.shape))).reshape(-1))
    return np.stack(cols, axis=1)
