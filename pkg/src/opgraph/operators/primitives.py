"""Forward maps, adjoints and Jacobians for each primitive kind.

Every kind is a small class with static methods ``infer`` (output edge type),
``forward``, ``adjoint`` and, for the pointwise nonlinear kinds, ``jacobian``
and ``jacobian_adjoint``. The adjoint is taken with respect to the real inner
product ``Re<x, y>``; for maps that are complex-linear with complex input and
output this coincides with the usual conjugate transpose.
"""

from __future__ import annotations

import functools
import math

import numpy as np
import scipy.sparse as sp
from scipy.signal import fftconvolve
from scipy.special import expit

from opgraph.errors import NumericDomainError, ParamError, TypedInputError
from opgraph.field import COMPLEX, REAL, EdgeType, dtype_name, result_dtype
from opgraph.operators.params import Kind


def _cast(z: np.ndarray, t: EdgeType) -> np.ndarray:
    """Bring an adjoint result back to the domain's dtype."""
    if t.is_complex:
        return np.asarray(z, dtype=np.complex128)
    if np.iscomplexobj(z):
        z = z.real
    return np.ascontiguousarray(z, dtype=np.float64)


def _arr_dtype(a: np.ndarray) -> str:
    return COMPLEX if np.iscomplexobj(a) else REAL


def _align(pattern_shape, pattern_axes, t: EdgeType, what: str):
    """Resolve the axis names of a broadcast operand against an input type."""
    nd = len(pattern_shape)
    if not pattern_axes:
        if nd > t.ndim:
            raise ParamError(f"{what} has rank {nd} > input rank {t.ndim}; name its axes")
        pattern_axes = t.axes[t.ndim - nd:]
    if len(pattern_axes) != nd:
        raise ParamError(f"{what}: {len(pattern_axes)} axis names for rank {nd}")
    k = min(nd, t.ndim)
    if k and tuple(pattern_axes[nd - k:]) != tuple(t.axes[t.ndim - k:]):
        raise TypedInputError(f"{what} axes {tuple(pattern_axes)} do not right-align with input axes {t.axes}")
    return tuple(pattern_axes)


class Propagate:
    """Angular-spectrum free-space propagation over the last two axes."""

    @staticmethod
    def infer(p, t: EdgeType) -> EdgeType:
        if t.ndim < 2:
            raise TypedInputError("propagate needs at least two spatial axes")
        return t.replace(dtype=COMPLEX)

    @staticmethod
    def transfer(p, ny: int, nx: int) -> np.ndarray:
        return _transfer(p.d, p.lam, p.pitch[0], p.pitch[1], ny, nx)

    @staticmethod
    def forward(p, x, t, out):
        H = Propagate.transfer(p, *t.shape[-2:])
        X = np.fft.fft2(x, axes=(-2, -1), norm="ortho")
        return np.fft.ifft2(X * H, axes=(-2, -1), norm="ortho")

    @staticmethod
    def adjoint(p, y, t, out):
        H = Propagate.transfer(p, *t.shape[-2:])
        Y = np.fft.fft2(y, axes=(-2, -1), norm="ortho")
        return _cast(np.fft.ifft2(Y * np.conj(H), axes=(-2, -1), norm="ortho"), t)


@functools.lru_cache(maxsize=64)
def _transfer(d, lam, py, px, ny, nx):
    fy = np.fft.fftfreq(ny, d=py)[:, None]
    fx = np.fft.fftfreq(nx, d=px)[None, :]
    arg = lam ** -2 - fx ** 2 - fy ** 2
    prop = arg > 0
    H = np.where(prop, np.exp(2j * np.pi * d * np.sqrt(np.where(prop, arg, 0.0))), 0.0)
    H.setflags(write=False)
    return H


def propagating_band(p, ny: int, nx: int) -> np.ndarray:
    """Boolean mask of non-evanescent frequencies in FFT order."""
    return np.abs(Propagate.transfer(p, ny, nx)) > 0


class Modulate:
    """Elementwise multiplication by a broadcastable pattern."""

    @staticmethod
    def _axes(p, t):
        return _align(p.m.shape, p.axes, t, "modulation pattern")

    @staticmethod
    def infer(p, t):
        m_axes = Modulate._axes(p, t)
        try:
            shape = np.broadcast_shapes(p.m.shape, t.shape)
        except ValueError:
            raise TypedInputError(f"pattern shape {p.m.shape} does not broadcast with {t.shape}") from None
        axes = m_axes if len(m_axes) > t.ndim else t.axes
        return EdgeType(shape, result_dtype(t.dtype, _arr_dtype(p.m)), t.units, axes)

    @staticmethod
    def forward(p, x, t, out):
        return x * p.m

    @staticmethod
    def adjoint(p, y, t, out):
        z = y * np.conj(p.m)
        lead = z.ndim - t.ndim
        if lead:
            z = z.sum(axis=tuple(range(lead)))
        red = tuple(i for i, (a, b) in enumerate(zip(t.shape, z.shape)) if a == 1 and b != 1)
        if red:
            z = z.sum(axis=red, keepdims=True)
        return _cast(z, t)


@functools.lru_cache(maxsize=16)
def _radon_matrix(theta_bytes, n_det, det_spacing, pixel_size, step, ny, nx):
    thetas = np.frombuffer(theta_bytes, dtype=np.float64)
    half = 0.5 * math.hypot(ny, nx) + 1.0
    n_s = 2 * int(math.ceil(half / step)) + 1
    s = (np.arange(n_s) - (n_s - 1) / 2) * step
    t = (np.arange(n_det) - (n_det - 1) / 2) * det_spacing
    c, sn = np.cos(thetas), np.sin(thetas)
    # sample points along every ray: t*(cos, sin) + s*(-sin, cos)
    u = t[None, :, None] * c[:, None, None] - s[None, None, :] * sn[:, None, None]
    v = t[None, :, None] * sn[:, None, None] + s[None, None, :] * c[:, None, None]
    fj = u + (nx - 1) / 2
    fi = v + (ny - 1) / 2
    j0 = np.floor(fj).astype(np.int64)
    i0 = np.floor(fi).astype(np.int64)
    wj = fj - j0
    wi = fi - i0
    ray = np.broadcast_to(np.arange(len(thetas) * n_det).reshape(len(thetas), n_det, 1), fj.shape)
    rows, cols, vals = [], [], []
    for di, dj, w in ((0, 0, (1 - wi) * (1 - wj)), (0, 1, (1 - wi) * wj),
                      (1, 0, wi * (1 - wj)), (1, 1, wi * wj)):
        ii, jj = i0 + di, j0 + dj
        ok = (ii >= 0) & (ii < ny) & (jj >= 0) & (jj < nx) & (w > 0)
        rows.append(ray[ok])
        cols.append(ii[ok] * nx + jj[ok])
        vals.append(w[ok] * (step * pixel_size))
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(len(thetas) * n_det, ny * nx)).tocsr()
    A.sum_duplicates()
    AT = A.T.tocsr()
    return A, AT


class Project:
    """Parallel-beam line integrals with stored bilinear footprint weights.

    Pixel (i, j) has centre ``(j - (nx-1)/2, i - (ny-1)/2)`` in pixel units.
    The ray for angle theta and detector offset t is
    ``t*(cos, sin) + s*(-sin, cos)``, sampled every ``step`` pixels; each sample
    deposits ``step * pixel_size`` times its bilinear weights.
    """

    @staticmethod
    def matrix(p, ny: int, nx: int):
        return _radon_matrix(p.thetas.tobytes(), p.n_det, p.det_spacing, p.pixel_size, p.step, ny, nx)

    @staticmethod
    def infer(p, t):
        if t.ndim < 2:
            raise TypedInputError("project needs at least two spatial axes")
        shape = (len(p.thetas),) + t.shape[:-2] + (p.n_det,)
        axes = ("angle",) + t.axes[:-2] + ("det",)
        if "angle" in t.axes[:-2] or "det" in t.axes[:-2]:
            raise TypedInputError("input batch axes clash with projection axes")
        return EdgeType(shape, t.dtype, t.units, axes)

    @staticmethod
    def forward(p, x, t, out):
        ny, nx = t.shape[-2:]
        A, _ = Project.matrix(p, ny, nx)
        batch = t.shape[:-2]
        xb = x.reshape(-1, ny * nx)
        yb = (A @ xb.T).reshape(len(p.thetas), p.n_det, -1)
        yb = np.moveaxis(yb, 2, 1)
        return yb.reshape(out.shape)

    @staticmethod
    def adjoint(p, y, t, out):
        ny, nx = t.shape[-2:]
        _, AT = Project.matrix(p, ny, nx)
        na = len(p.thetas)
        yb = np.moveaxis(y.reshape(na, -1, p.n_det), 1, 2).reshape(na * p.n_det, -1)
        xb = (AT @ yb).T
        return _cast(xb.reshape(t.shape), t)


class Encode:
    """Direct-summation Fourier encoding at arbitrary k over the last two axes.

    Samples sit on the centred index grid ``r = index - n//2`` and k is in
    cycles per field of view, so ``y_j = sum_r x(r) exp(-2i pi (ky ry/ny + kx rx/nx))``.
    """

    @staticmethod
    def factors(p, ny, nx):
        ry = np.arange(ny) - ny // 2
        rx = np.arange(nx) - nx // 2
        Ey = np.exp(-2j * np.pi * np.outer(p.ktraj[:, 0], ry) / ny)
        Ex = np.exp(-2j * np.pi * np.outer(p.ktraj[:, 1], rx) / nx)
        scale = 1.0 / math.sqrt(ny * nx) if p.normalize else 1.0
        return Ey, Ex, scale

    @staticmethod
    def infer(p, t):
        if t.ndim < 2:
            raise TypedInputError("encode needs at least two spatial axes")
        if "k" in t.axes[:-2]:
            raise TypedInputError("input batch axes clash with the k axis")
        return EdgeType(t.shape[:-2] + (len(p.ktraj),), COMPLEX, t.units, t.axes[:-2] + ("k",))

    @staticmethod
    def forward(p, x, t, out):
        Ey, Ex, scale = Encode.factors(p, *t.shape[-2:])
        tmp = x @ Ex.T                                  # (..., y, k)
        return scale * np.einsum("...yk,ky->...k", tmp, Ey)

    @staticmethod
    def adjoint(p, y, t, out):
        Ey, Ex, scale = Encode.factors(p, *t.shape[-2:])
        tmp = np.conj(Ey).T[..., :, :] * y[..., None, :]    # (..., y, k)
        return _cast(scale * (tmp @ np.conj(Ex)), t)


class Convolve:
    """Same-size linear convolution with zero padding along named axes."""

    @staticmethod
    def _setup(p, t):
        axes = _align(p.h.shape, p.axes, t, "kernel") if not p.axes else tuple(p.axes)
        idx = [t.axis_index(a) for a in axes]
        if idx != sorted(idx):
            raise TypedInputError(f"kernel axes {axes} must follow the input's axis order {t.axes}")
        shape = [1] * t.ndim
        for a, n in zip(idx, p.h.shape):
            shape[a] = n
        return tuple(idx), p.h.reshape(shape)

    @staticmethod
    def infer(p, t):
        Convolve._setup(p, t)
        return t.replace(dtype=result_dtype(t.dtype, _arr_dtype(p.h)))

    @staticmethod
    def forward(p, x, t, out):
        idx, h = Convolve._setup(p, t)
        return fftconvolve(x, h, mode="same", axes=idx)

    @staticmethod
    def adjoint(p, y, t, out):
        idx, h = Convolve._setup(p, t)
        hf = np.conj(np.flip(h, axis=idx))
        return _cast(fftconvolve(y, hf, mode="same", axes=idx), t)


class Accumulate:
    """Sum over one or more named axes; the adjoint replicates."""

    @staticmethod
    def infer(p, t):
        idx = [t.axis_index(a) for a in p.axis]
        keep = [i for i in range(t.ndim) if i not in idx]
        return EdgeType(tuple(t.shape[i] for i in keep), t.dtype, t.units,
                        tuple(t.axes[i] for i in keep))

    @staticmethod
    def forward(p, x, t, out):
        return x.sum(axis=tuple(t.axis_index(a) for a in p.axis))

    @staticmethod
    def adjoint(p, y, t, out):
        idx = sorted(t.axis_index(a) for a in p.axis)
        z = y
        for i in idx:
            z = np.expand_dims(z, i)
        return _cast(np.broadcast_to(z, t.shape).copy(), t)


def _sq(x):
    return x.real ** 2 + x.imag ** 2 if np.iscomplexobj(x) else x * x


class Detect:
    """Terminal response in one of five families."""

    @staticmethod
    def infer(p, t):
        dt = t.dtype if p.family == "linear_field" else REAL
        return t.replace(dtype=dt)

    @staticmethod
    def forward(p, x, t, out):
        fam, g = p.family, p.g
        if fam == "linear_field":
            return g * x
        if fam == "coherent_field":
            return g * np.real(x * np.exp(1j * p.phi)) if np.iscomplexobj(x) else g * math.cos(p.phi) * x
        s = _sq(x)
        if fam == "logarithmic":
            return g * np.log1p(s / p.x0)
        if fam == "sigmoid":
            return g * expit(s - p.x0)
        return g * s

    @staticmethod
    def weight(p, x_op):
        """Elementwise 2*g*f'(|x_op|^2) for the |x|^2-based families."""
        s = _sq(x_op)
        if p.family == "logarithmic":
            fp = 1.0 / (p.x0 + s)
        elif p.family == "sigmoid":
            e = expit(s - p.x0)
            fp = e * (1 - e)
        else:
            fp = np.ones_like(s)
        return 2.0 * p.g * fp

    @staticmethod
    def adjoint_linear(p, y, t):
        if p.family == "linear_field":
            return _cast(p.g * y, t)
        return _cast(p.g * np.exp(-1j * p.phi) * y if t.is_complex else p.g * math.cos(p.phi) * y, t)

    @staticmethod
    def jacobian(p, x_op, dx, t):
        if p.is_linear:
            return Detect.forward(p, dx, t, None)
        return Detect.weight(p, x_op) * np.real(np.conj(x_op) * dx)

    @staticmethod
    def jacobian_adjoint(p, x_op, y, t):
        if p.is_linear:
            return Detect.adjoint_linear(p, y, t)
        return _cast(Detect.weight(p, x_op) * x_op * y, t)


class Sample:
    """Select flat (C-order) indices; the adjoint zero-fills."""

    @staticmethod
    def infer(p, t):
        if p.omega[-1] >= t.size or p.omega[0] < 0:
            raise ParamError(f"sample index out of range for input of size {t.size}")
        return EdgeType((len(p.omega),), t.dtype, t.units, ("sample",))

    @staticmethod
    def forward(p, x, t, out):
        return x.reshape(-1)[p.omega]

    @staticmethod
    def adjoint(p, y, t, out):
        z = np.zeros(t.size, dtype=t.np_dtype)
        z[p.omega] = y if t.is_complex else np.real(y)
        return z.reshape(t.shape)


class Disperse:
    """Integer per-channel shift along a spatial axis.

    The output extent along the shift axis grows to hold every shifted channel,
    so the map is an injective partial permutation.
    """

    @staticmethod
    def geometry(p, t):
        ax, sx = t.axis_index(p.axis), t.axis_index(p.spectral_axis)
        if t.shape[sx] != len(p.lambdas):
            raise ParamError(f"{len(p.lambdas)} wavelengths for a spectral extent of {t.shape[sx]}")
        s = p.shifts
        lo = min(0, int(s.min()))
        n_out = t.shape[ax] + max(0, int(s.max())) - lo
        return ax, sx, s - lo, n_out

    @staticmethod
    def infer(p, t):
        ax, _, _, n_out = Disperse.geometry(p, t)
        shape = list(t.shape)
        shape[ax] = n_out
        return t.replace(shape=tuple(shape))

    @staticmethod
    def forward(p, x, t, out):
        ax, sx, off, n_out = Disperse.geometry(p, t)
        n = t.shape[ax]
        y = np.zeros(out.shape, dtype=x.dtype)
        xv = np.moveaxis(x, (sx, ax), (0, -1))
        yv = np.moveaxis(y, (sx, ax), (0, -1))
        for j, o in enumerate(off):
            yv[j, ..., o:o + n] = xv[j]
        return y

    @staticmethod
    def adjoint(p, y, t, out):
        ax, sx, off, n_out = Disperse.geometry(p, t)
        n = t.shape[ax]
        yv = np.moveaxis(y, (sx, ax), (0, -1))
        xv = np.stack([yv[j, ..., o:o + n] for j, o in enumerate(off)])
        return _cast(np.moveaxis(xv, (0, -1), (sx, ax)), t)


class Scatter:
    """Dense kernel along one named axis after pointwise attenuation."""

    @staticmethod
    def _atten(p, t):
        if p.atten is None:
            return None
        axes = _align(p.atten.shape, p.atten_axes, t, "attenuation")
        if len(axes) > t.ndim or np.broadcast_shapes(p.atten.shape, t.shape) != t.shape:
            raise TypedInputError(f"attenuation shape {p.atten.shape} does not broadcast to {t.shape}")
        return p.atten

    @staticmethod
    def infer(p, t):
        ax = t.axis_index(p.axis)
        if p.kernel.shape[1] != t.shape[ax]:
            raise ParamError(f"kernel has {p.kernel.shape[1]} input bins, axis {p.axis!r} has {t.shape[ax]}")
        Scatter._atten(p, t)
        shape = list(t.shape)
        shape[ax] = p.kernel.shape[0]
        return t.replace(shape=tuple(shape), dtype=result_dtype(t.dtype, _arr_dtype(p.kernel)))

    @staticmethod
    def forward(p, x, t, out):
        ax = t.axis_index(p.axis)
        a = Scatter._atten(p, t)
        z = x if a is None else x * a
        return np.moveaxis(np.tensordot(p.kernel, z, axes=([1], [ax])), 0, ax)

    @staticmethod
    def adjoint(p, y, t, out):
        ax = t.axis_index(p.axis)
        z = np.moveaxis(np.tensordot(np.conj(p.kernel).T, y, axes=([1], [ax])), 0, ax)
        a = Scatter._atten(p, t)
        return _cast(z if a is None else z * a, t)


TWO_PI = 2.0 * np.pi


def wrap_phase(x: np.ndarray) -> np.ndarray:
    """Map real phases into (-pi, pi]."""
    return x - TWO_PI * np.ceil((x - np.pi) / TWO_PI)


class Transform:
    """Pointwise nonlinearity in one of five families."""

    @staticmethod
    def infer(p, t):
        if p.family in ("log", "saturate") and t.is_complex:
            raise TypedInputError(f"{p.family} transform is defined on real input only")
        if p.family == "wrap":
            return t.replace(dtype=REAL)
        return t

    @staticmethod
    def forward(p, x, t, out):
        fam, th = p.family, p.theta
        if fam == "exp_atten":
            return np.exp(-th[0] * x)
        if fam == "log":
            if np.any(x + th[0] <= 0):
                raise NumericDomainError("log transform needs x + delta > 0")
            return np.log(x + th[0])
        if fam == "wrap":
            return np.angle(x) if np.iscomplexobj(x) else wrap_phase(x)
        if fam == "poly":
            return np.polynomial.polynomial.polyval(x, th)
        return np.clip(x, th[0], th[1])

    @staticmethod
    def derivative(p, x_op):
        """f'(x_op) and a boolean mask of points where a one-sided rule was used."""
        fam, th = p.family, p.theta
        edge = np.zeros(np.shape(x_op), dtype=bool)
        if fam == "exp_atten":
            d = -th[0] * np.exp(-th[0] * x_op)
        elif fam == "log":
            if np.any(x_op + th[0] <= 0):
                raise NumericDomainError("log transform linearized outside its domain")
            d = 1.0 / (x_op + th[0])
        elif fam == "wrap":
            if np.iscomplexobj(x_op):
                d = None
            else:
                r = (x_op - np.pi) / TWO_PI
                edge = r == np.round(r)
                d = np.ones_like(x_op)
        elif fam == "poly":
            d = np.polynomial.polynomial.polyval(x_op, np.polynomial.polynomial.polyder(th)) \
                if len(th) > 1 else np.zeros_like(x_op)
        else:
            lo, hi = th
            edge = (x_op == lo) | (x_op == hi)
            # one-sided from the left: flat below lo, slope 1 up to and at hi
            d = ((x_op > lo) & (x_op <= hi)).astype(np.float64)
        return d, edge

    @staticmethod
    def jacobian(p, x_op, dx, t):
        if p.family == "wrap" and np.iscomplexobj(x_op):
            return np.imag(dx / x_op)
        d, _ = Transform.derivative(p, x_op)
        return d * dx

    @staticmethod
    def jacobian_adjoint(p, x_op, y, t):
        if p.family == "wrap" and np.iscomplexobj(x_op):
            return _cast(1j * y / np.conj(x_op), t)
        d, _ = Transform.derivative(p, x_op)
        return _cast(np.conj(d) * y, t)


IMPLS = {
    Kind.PROPAGATE: Propagate, Kind.MODULATE: Modulate, Kind.PROJECT: Project,
    Kind.ENCODE: Encode, Kind.CONVOLVE: Convolve, Kind.ACCUMULATE: Accumulate,
    Kind.DETECT: Detect, Kind.SAMPLE: Sample, Kind.DISPERSE: Disperse,
    Kind.SCATTER: Scatter, Kind.TRANSFORM: Transform,
}
