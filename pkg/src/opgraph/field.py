"""Fields and edge types.

A :class:`Field` is a dense array with named axes and a unit tag. An
:class:`EdgeType` is the static annotation ``(shape, dtype, units)`` carried by
every graph edge; axis names ride along so that primitives can address axes by
name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from opgraph.errors import NumericDomainError, TypedInputError

REAL = "real64"
COMPLEX = "complex128"
DTYPES = {REAL: np.dtype(np.float64), COMPLEX: np.dtype(np.complex128)}


def dtype_name(dtype) -> str:
    dt = np.dtype(dtype)
    if dt == np.float64:
        return REAL
    if dt == np.complex128:
        return COMPLEX
    raise TypedInputError(f"unsupported dtype {dt}; expected float64 or complex128")


def result_dtype(*names: str) -> str:
    return COMPLEX if COMPLEX in names else REAL


@dataclass(frozen=True)
class EdgeType:
    """Static type of the data flowing along an edge."""

    shape: tuple[int, ...]
    dtype: str = REAL
    units: str = "a.u."
    axes: tuple[str, ...] = ()

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        if any(s <= 0 for s in shape):
            raise TypedInputError(f"edge extents must be positive, got {shape}")
        if self.dtype not in DTYPES:
            raise TypedInputError(f"dtype must be one of {sorted(DTYPES)}, got {self.dtype!r}")
        axes = tuple(self.axes) if self.axes else default_axes(len(shape))
        if len(axes) != len(shape):
            raise TypedInputError(f"{len(axes)} axis names for a rank-{len(shape)} shape")
        if len(set(axes)) != len(axes):
            raise TypedInputError(f"duplicate axis names {axes}")
        object.__setattr__(self, "axes", axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def is_complex(self) -> bool:
        return self.dtype == COMPLEX

    @property
    def np_dtype(self) -> np.dtype:
        return DTYPES[self.dtype]

    def axis_index(self, name: str) -> int:
        try:
            return self.axes.index(name)
        except ValueError:
            raise TypedInputError(f"axis {name!r} not in {self.axes}") from None

    def extent(self, name: str) -> int:
        return self.shape[self.axis_index(name)]

    def replace(self, **changes) -> "EdgeType":
        kw = dict(shape=self.shape, dtype=self.dtype, units=self.units, axes=self.axes)
        kw.update(changes)
        return EdgeType(**kw)

    def check(self, array: np.ndarray, what: str = "input") -> None:
        """Raise :class:`TypedInputError` unless ``array`` has this shape and dtype."""
        if array.shape != self.shape:
            raise TypedInputError(f"{what} shape {array.shape} != declared {self.shape}")
        if array.dtype != self.np_dtype:
            raise TypedInputError(f"{what} dtype {array.dtype} != declared {self.dtype}")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=self.np_dtype)

    def random(self, rng: np.random.Generator) -> np.ndarray:
        x = rng.standard_normal(self.shape)
        if self.is_complex:
            x = x + 1j * rng.standard_normal(self.shape)
        return x.astype(self.np_dtype)

    def to_dict(self) -> dict:
        return {"shape": list(self.shape), "dtype": self.dtype,
                "units": self.units, "axes": list(self.axes)}


def default_axes(ndim: int) -> tuple[str, ...]:
    return {0: (), 1: ("i",), 2: ("y", "x"), 3: ("c", "y", "x")}.get(
        ndim, tuple(f"a{k}" for k in range(ndim)))


@dataclass(frozen=True)
class Field:
    """A dense array with named axes and a unit tag."""

    data: np.ndarray
    axes: tuple[str, ...] = ()
    units: str = "a.u."
    type: EdgeType = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype.kind in "biu":
            data = data.astype(np.float64)
        elif data.dtype == np.float32:
            data = data.astype(np.float64)
        elif data.dtype == np.complex64:
            data = data.astype(np.complex128)
        name = dtype_name(data.dtype)
        object.__setattr__(self, "data", data)
        et = EdgeType(data.shape, name, self.units, tuple(self.axes))
        object.__setattr__(self, "axes", et.axes)
        object.__setattr__(self, "type", et)

    @classmethod
    def of(cls, data, edge_type: EdgeType) -> "Field":
        return cls(np.asarray(data), edge_type.axes, edge_type.units)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> str:
        return self.type.dtype

    def require_finite(self) -> None:
        if not np.all(np.isfinite(self.data)):
            raise NumericDomainError("field contains non-finite values")


def as_array(x, edge_type: EdgeType | None = None, what: str = "input") -> np.ndarray:
    """Unwrap a Field (or array) and optionally check it against an edge type."""
    arr = x.data if isinstance(x, Field) else np.asarray(x)
    if isinstance(x, Field) and edge_type is not None:
        if x.units != edge_type.units:
            raise TypedInputError(f"{what} units {x.units!r} != declared {edge_type.units!r}")
    if edge_type is not None:
        edge_type.check(arr, what)
    return arr


def broadcast_axes(a: Sequence[str], b: Sequence[str]) -> tuple[str, ...]:
    """Right-aligned axis-name union used by broadcasting operators."""
    a, b = tuple(a), tuple(b)
    longer, shorter = (a, b) if len(a) >= len(b) else (b, a)
    if longer[len(longer) - len(shorter):] != shorter:
        raise TypedInputError(f"axes {a} and {b} do not align for broadcasting")
    return longer
