"""Parameter records for the eleven primitive kinds.

Records are frozen. Array-valued fields are copied into read-only numpy arrays
at construction so that a node can be shared between threads without copies.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from opgraph.errors import ParamError


class Kind(str, enum.Enum):
    PROPAGATE = "propagate"
    MODULATE = "modulate"
    PROJECT = "project"
    ENCODE = "encode"
    CONVOLVE = "convolve"
    ACCUMULATE = "accumulate"
    DETECT = "detect"
    SAMPLE = "sample"
    DISPERSE = "disperse"
    SCATTER = "scatter"
    TRANSFORM = "transform"

    @property
    def symbol(self) -> str:
        return SYMBOLS[self]

    @classmethod
    def parse(cls, text: str) -> "Kind":
        key = text.strip()
        if key in _BY_ALIAS:
            return _BY_ALIAS[key]
        raise ParamError(f"unknown primitive kind {text!r}")


SYMBOLS = {
    Kind.PROPAGATE: "P", Kind.MODULATE: "M", Kind.PROJECT: "Π", Kind.ENCODE: "F",
    Kind.CONVOLVE: "C", Kind.ACCUMULATE: "Σ", Kind.DETECT: "D", Kind.SAMPLE: "S",
    Kind.DISPERSE: "W", Kind.SCATTER: "R", Kind.TRANSFORM: "Λ",
}
ASCII_SYMBOLS = {
    Kind.PROPAGATE: "P", Kind.MODULATE: "M", Kind.PROJECT: "Pi", Kind.ENCODE: "F",
    Kind.CONVOLVE: "C", Kind.ACCUMULATE: "Sigma", Kind.DETECT: "D", Kind.SAMPLE: "S",
    Kind.DISPERSE: "W", Kind.SCATTER: "R", Kind.TRANSFORM: "Lambda",
}
_BY_ALIAS: dict[str, Kind] = {}
for _k in Kind:
    for _alias in (_k.value, _k.name, _k.name.lower(), SYMBOLS[_k], ASCII_SYMBOLS[_k]):
        _BY_ALIAS[_alias] = _k

ALL_KINDS = frozenset(Kind)
LINEAR_KINDS = frozenset(Kind) - {Kind.DETECT, Kind.TRANSFORM}


def _frozen_array(a, *, dtype=None, name="array") -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    if arr.dtype.kind in "biu" and dtype is None:
        arr = arr.astype(np.float64)
    if arr.dtype.kind == "f":
        arr = arr.astype(np.float64)
    elif arr.dtype.kind == "c":
        arr = arr.astype(np.complex128)
    if arr.dtype.kind in "fc" and not np.all(np.isfinite(arr)):
        raise ParamError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def _opt_array(a, name):
    return None if a is None else _frozen_array(a, name=name)


@dataclass(frozen=True, eq=False)
class PropagateParams:
    d: float
    lam: float = 0.5
    pitch: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        pitch = self.pitch
        if np.isscalar(pitch):
            pitch = (float(pitch), float(pitch))
        pitch = tuple(float(p) for p in pitch)
        object.__setattr__(self, "pitch", pitch)
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "lam", float(self.lam))
        if not self.lam > 0:
            raise ParamError("wavelength must be positive")
        if len(pitch) != 2 or not all(p > 0 for p in pitch):
            raise ParamError("pitch must be positive on both spatial axes")


@dataclass(frozen=True, eq=False)
class ModulateParams:
    m: np.ndarray
    axes: tuple[str, ...] = ()

    def __post_init__(self):
        m = _frozen_array(self.m, name="modulation pattern")
        object.__setattr__(self, "m", m)
        axes = tuple(self.axes)
        if axes and len(axes) != m.ndim:
            raise ParamError(f"{len(axes)} axis names for a rank-{m.ndim} pattern")
        object.__setattr__(self, "axes", axes)


@dataclass(frozen=True, eq=False)
class ProjectParams:
    thetas: np.ndarray
    n_det: int
    det_spacing: float = 1.0
    pixel_size: float = 1.0
    step: float = 0.5

    def __post_init__(self):
        th = _frozen_array(np.atleast_1d(np.asarray(self.thetas, dtype=np.float64)), name="thetas")
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "n_det", int(self.n_det))
        for name in ("det_spacing", "pixel_size", "step"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if th.ndim != 1 or th.size == 0:
            raise ParamError("thetas must be a non-empty list")
        if self.n_det < 1:
            raise ParamError("n_det must be at least 1")
        if not (self.det_spacing > 0 and self.pixel_size > 0 and self.step > 0):
            raise ParamError("detector spacing, pixel size and ray step must be positive")


@dataclass(frozen=True, eq=False)
class EncodeParams:
    ktraj: np.ndarray
    normalize: bool = False

    def __post_init__(self):
        k = _frozen_array(np.asarray(self.ktraj, dtype=np.float64), name="ktraj")
        if k.ndim == 1 and k.size == 2:
            k = _frozen_array(k.reshape(1, 2), name="ktraj")
        if k.ndim != 2 or k.shape[1] != 2 or k.shape[0] == 0:
            raise ParamError("ktraj must be a non-empty (m, 2) list of (ky, kx)")
        object.__setattr__(self, "ktraj", k)
        object.__setattr__(self, "normalize", bool(self.normalize))

    @classmethod
    def cartesian(cls, ny: int, nx: int, normalize: bool = False) -> "EncodeParams":
        ky = np.arange(ny) - ny // 2
        kx = np.arange(nx) - nx // 2
        grid = np.stack(np.meshgrid(ky, kx, indexing="ij"), axis=-1).reshape(-1, 2)
        return cls(grid.astype(np.float64), normalize)


@dataclass(frozen=True, eq=False)
class ConvolveParams:
    h: np.ndarray
    axes: tuple[str, ...] = ()

    def __post_init__(self):
        h = _frozen_array(self.h, name="kernel")
        object.__setattr__(self, "h", h)
        if any(s % 2 == 0 for s in h.shape):
            raise ParamError(f"kernel extents must be odd, got {h.shape}")
        axes = tuple(self.axes)
        if axes and len(axes) != h.ndim:
            raise ParamError(f"{len(axes)} axis names for a rank-{h.ndim} kernel")
        object.__setattr__(self, "axes", axes)


@dataclass(frozen=True, eq=False)
class AccumulateParams:
    axis: tuple[str, ...]

    def __post_init__(self):
        axis = (self.axis,) if isinstance(self.axis, str) else tuple(self.axis)
        if not axis:
            raise ParamError("accumulate needs at least one axis")
        object.__setattr__(self, "axis", axis)


DETECT_FAMILIES = ("linear_field", "logarithmic", "sigmoid", "intensity_square", "coherent_field")


@dataclass(frozen=True, eq=False)
class DetectParams:
    family: str
    g: float = 1.0
    x0: Optional[float] = None
    phi: Optional[float] = None
    x_op: Optional[np.ndarray] = None

    def __post_init__(self):
        fam = self.family
        if isinstance(fam, int) or (isinstance(fam, str) and fam.isdigit()):
            idx = int(fam)
            if not 1 <= idx <= 5:
                raise ParamError(f"detect family index must be 1..5, got {idx}")
            fam = DETECT_FAMILIES[idx - 1]
        if fam not in DETECT_FAMILIES:
            raise ParamError(f"unknown detect family {fam!r}")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "g", float(self.g))
        if not self.g > 0:
            raise ParamError("detector gain must be positive")
        if fam in ("logarithmic", "sigmoid"):
            if self.x0 is None:
                raise ParamError(f"{fam} detection needs x0")
            if self.phi is not None:
                raise ParamError(f"{fam} detection takes x0 only")
            object.__setattr__(self, "x0", float(self.x0))
            if fam == "logarithmic" and not self.x0 > 0:
                raise ParamError("logarithmic detection needs x0 > 0")
        elif fam == "coherent_field":
            if self.x0 is not None:
                raise ParamError("coherent detection takes phi only")
            object.__setattr__(self, "phi", float(self.phi or 0.0))
        elif self.x0 is not None or self.phi is not None:
            raise ParamError(f"{fam} detection takes the gain only")
        object.__setattr__(self, "x_op", _opt_array(self.x_op, "x_op"))

    @property
    def index(self) -> int:
        return DETECT_FAMILIES.index(self.family) + 1

    @property
    def is_linear(self) -> bool:
        return self.family in ("linear_field", "coherent_field")


@dataclass(frozen=True, eq=False)
class SampleParams:
    omega: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega)
        if om.dtype.kind == "f":
            if not np.all(om == np.round(om)):
                raise ParamError("sample indices must be integers")
        om = np.array(om, dtype=np.int64).ravel()
        if om.size == 0:
            raise ParamError("sample set must be non-empty")
        if np.any(np.diff(om) <= 0):
            raise ParamError("sample indices must be strictly increasing (sorted, no duplicates)")
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)


@dataclass(frozen=True, eq=False)
class DisperseParams:
    alpha: float
    a: float
    lambdas: np.ndarray
    axis: str = "x"
    spectral_axis: str = "lambda"

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "a", float(self.a))
        lam = _frozen_array(np.atleast_1d(np.asarray(self.lambdas, dtype=np.float64)), name="lambdas")
        if lam.ndim != 1 or lam.size == 0:
            raise ParamError("lambdas must be a non-empty list")
        object.__setattr__(self, "lambdas", lam)
        if self.axis == self.spectral_axis:
            raise ParamError("shift axis and spectral axis must differ")

    @property
    def shifts(self) -> np.ndarray:
        # np.rint rounds half to even; floor(v + 0.5) is the usual half-up rule
        return np.floor(self.alpha * self.lambdas + self.a + 0.5).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ScatterParams:
    kernel: np.ndarray
    axis: str = "E"
    atten: Optional[np.ndarray] = None
    atten_axes: tuple[str, ...] = ()

    def __post_init__(self):
        k = _frozen_array(self.kernel, name="kernel")
        if k.ndim != 2:
            raise ParamError("scatter kernel must be a 2-D (n_out, n_in) matrix")
        object.__setattr__(self, "kernel", k)
        at = _opt_array(self.atten, "atten")
        if at is not None:
            if at.dtype.kind == "c":
                raise ParamError("attenuation must be real")
            if np.any(at < 0):
                raise ParamError("attenuation must be non-negative")
        object.__setattr__(self, "atten", at)
        object.__setattr__(self, "atten_axes", tuple(self.atten_axes))


TRANSFORM_FAMILIES = ("exp_atten", "log", "wrap", "poly", "saturate")


@dataclass(frozen=True, eq=False)
class TransformParams:
    family: str
    theta: tuple[float, ...] = ()
    x_op: Optional[np.ndarray] = None

    def __post_init__(self):
        fam = self.family
        if fam not in TRANSFORM_FAMILIES:
            raise ParamError(f"unknown transform family {fam!r}")
        theta = tuple(float(t) for t in np.atleast_1d(np.asarray(self.theta, dtype=np.float64)))
        want = {"exp_atten": 1, "log": 1, "wrap": 0, "saturate": 2}
        if fam in want and len(theta) != want[fam]:
            raise ParamError(f"{fam} takes {want[fam]} parameter(s), got {len(theta)}")
        if fam == "poly" and not 1 <= len(theta) <= 6:
            raise ParamError("poly takes coefficients a_0..a_d with d <= 5")
        if fam == "log" and not theta[0] > 0:
            raise ParamError("log offset delta must be positive")
        if fam == "saturate" and not theta[0] <= theta[1]:
            raise ParamError("saturate needs x_min <= x_max")
        if not all(math.isfinite(t) for t in theta):
            raise ParamError("transform parameters must be finite")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "x_op", _opt_array(self.x_op, "x_op"))


PARAM_TYPES = {
    Kind.PROPAGATE: PropagateParams, Kind.MODULATE: ModulateParams,
    Kind.PROJECT: ProjectParams, Kind.ENCODE: EncodeParams,
    Kind.CONVOLVE: ConvolveParams, Kind.ACCUMULATE: AccumulateParams,
    Kind.DETECT: DetectParams, Kind.SAMPLE: SampleParams,
    Kind.DISPERSE: DisperseParams, Kind.SCATTER: ScatterParams,
    Kind.TRANSFORM: TransformParams,
}
