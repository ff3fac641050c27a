"""Loop-based reference forward models, one per registry modality.

Written directly from the physics with explicit DFT matrices, per-ray
interpolation and per-channel loops. Only numpy, the shared parameter
generator and the physics kernels are imported, so these functions do not
depend on the operator or graph code they are used to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from opgraph import physics
from opgraph.modality_params import modality_parameters


@dataclass(frozen=True)
class OracleSpec:
    name: str
    sizes: dict = field(default_factory=dict, hash=False)
    seed: int = 0

    def params(self) -> dict:
        return modality_parameters(self.name, self.sizes, self.seed)


def _dft(n):
    j = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(j, j) / n) / math.sqrt(n)


def _freqs(n, pitch=1.0):
    f = np.empty(n)
    for k in range(n):
        f[k] = (k if k < (n + 1) // 2 else k - n) / (n * pitch)
    return f


def _propagate(x, d, lam):
    """Angular spectrum over the last two axes with evanescent waves dropped."""
    ny, nx = x.shape[-2:]
    Fy, Fx = _dft(ny), _dft(nx)
    fy, fx = _freqs(ny), _freqs(nx)
    H = np.zeros((ny, nx), dtype=np.complex128)
    for i in range(ny):
        for j in range(nx):
            arg = lam ** -2 - fy[i] ** 2 - fx[j] ** 2
            if arg > 0:
                H[i, j] = np.exp(2j * np.pi * d * math.sqrt(arg))
    X = Fy @ x @ Fx.T
    return np.conj(Fy).T @ (X * H) @ np.conj(Fx)


def _conv_same(x, h):
    """Zero-padded same-size convolution over the last two axes."""
    ky, kx = h.shape
    cy, cx = (ky - 1) // 2, (kx - 1) // 2
    ny, nx = x.shape[-2:]
    out = np.zeros(x.shape, dtype=np.result_type(x, h))
    for a in range(ky):
        for b in range(kx):
            dy, dx = a - cy, b - cx
            ys, yd = (slice(0, ny - dy), slice(dy, ny)) if dy >= 0 else (slice(-dy, ny), slice(0, ny + dy))
            xs, xd = (slice(0, nx - dx), slice(dx, nx)) if dx >= 0 else (slice(-dx, nx), slice(0, nx + dx))
            out[..., yd, xd] += h[a, b] * x[..., ys, xs]
    return out


def _bilinear(img, fi, fj):
    """Bilinear samples of ``img`` at fractional (row, col); zero outside."""
    ny, nx = img.shape
    i0, j0 = np.floor(fi).astype(int), np.floor(fj).astype(int)
    wi, wj = fi - i0, fj - j0
    out = np.zeros(fi.shape, dtype=img.dtype)
    for di, dj, w in ((0, 0, (1 - wi) * (1 - wj)), (0, 1, (1 - wi) * wj),
                      (1, 0, wi * (1 - wj)), (1, 1, wi * wj)):
        ii, jj = i0 + di, j0 + dj
        ok = (ii >= 0) & (ii < ny) & (jj >= 0) & (jj < nx)
        out[ok] += w[ok] * img[ii[ok], jj[ok]]
    return out


def _radon(img, p, step=0.5):
    """Parallel-beam line integrals of a 2D image, one angle at a time."""
    ny, nx = img.shape
    half = 0.5 * math.hypot(ny, nx) + 1.0
    n_s = 2 * int(math.ceil(half / step)) + 1
    s = (np.arange(n_s) - (n_s - 1) / 2) * step
    t = (np.arange(p["n_det"]) - (p["n_det"] - 1) / 2) * p["det_spacing"]
    out = np.zeros((len(p["thetas"]), p["n_det"]), dtype=img.dtype)
    for a, th in enumerate(p["thetas"]):
        c, sn = math.cos(th), math.sin(th)
        u = t[:, None] * c - s[None, :] * sn
        v = t[:, None] * sn + s[None, :] * c
        vals = _bilinear(img, v + (ny - 1) / 2, u + (nx - 1) / 2)
        out[a] = vals.sum(axis=1) * step * p["pixel_size"]
    return out


def _radon_stack(x, p):
    """Radon of every leading slice: (..., y, x) -> (angle, ..., det)."""
    lead = x.shape[:-2]
    flat = x.reshape((-1,) + x.shape[-2:])
    r = np.stack([_radon(sl, p) for sl in flat], axis=1)
    return r.reshape((r.shape[0],) + lead + (r.shape[-1],))


def _detect(y, fam, p):
    g = p.get("g", 1.0)
    if fam == 1:
        return g * y
    if fam == 5:
        return g * np.real(y * np.exp(1j * p.get("phi", 0.0)))
    power = np.abs(y) ** 2
    if fam == 4:
        return g * power
    raise ValueError(f"no oracle detector for family {fam}")


def _kernel_along(x, K, axis):
    x = np.moveaxis(x, axis, 0)
    out = np.zeros((K.shape[0],) + x.shape[1:], dtype=np.result_type(x, K))
    for i in range(K.shape[0]):
        for j in range(K.shape[1]):
            out[i] += K[i, j] * x[j]
    return np.moveaxis(out, 0, axis)


def _fourier_samples(x, ktraj, normalize=True):
    ny, nx = x.shape
    ry = np.arange(ny) - ny // 2
    rx = np.arange(nx) - nx // 2
    out = np.zeros(len(ktraj), dtype=np.complex128)
    for m, (ky, kx) in enumerate(ktraj):
        phase = np.exp(-2j * np.pi * (ky * ry[:, None] / ny + kx * rx[None, :] / nx))
        out[m] = np.sum(x * phase)
    return out / math.sqrt(ny * nx) if normalize else out


def lensless(x, s, p):
    return _detect(_conv_same(x, p["psf"]), 4, p)


def tomography(fam):
    def run(x, s, p):
        return _detect(_radon(x, p), fam, p)
    return run


def pattern_sum(x, s, p):
    pats = p["patterns"]
    y = np.array([np.sum(pats[k] * x) for k in range(len(pats))])
    return _detect(y, 4, p)


def cacti(x, s, p):
    y = np.zeros(x.shape[1:])
    for t in range(x.shape[0]):
        y += p["masks"][t] * x[t]
    return _detect(y, 4, p)


def ptychography(x, s, p):
    fields = [_propagate(probe * x, p["d"], p["lam"]) for probe in p["probes"]]
    return _detect(np.stack(fields), 4, p)


def mri(x, s, p, wrap=False):
    k = p["ktraj"][p["omega"]]
    y = _fourier_samples(p["coil"] * x, k)
    if wrap:
        y = np.arctan2(y.imag, y.real)
    return _detect(y, 1, p)


def cassi(x, s, p):
    shifts = [int(math.floor(p["alpha"] * lam + p["a"] + 0.5)) for lam in p["lambdas"]]
    lo = min(0, min(shifts))
    nb, ny, nx = x.shape
    width = nx + max(0, max(shifts)) - lo
    y = np.zeros((ny, width))
    for b in range(nb):
        o = shifts[b] - lo
        y[:, o:o + nx] += p["mask"] * x[b]
    return _detect(y, 4, p)


def oct_oracle(x, s, p):
    y = np.zeros(x.shape[1:], dtype=np.complex128)
    for band in x:
        y += _propagate(band, p["d_ref"], p["lam"]) + _propagate(band, p["d_sample"], p["lam"])
    return _detect(y, 5, p)


def mod_prop(key, fam):
    def run(x, s, p):
        m = p[key]
        if np.ndim(m) == 3:
            return _detect(np.stack([_propagate(mk * x, p["d"], p["lam"]) for mk in m]), fam, p)
        return _detect(_propagate(m * x, p["d"], p["lam"]), fam, p)
    return run


def sim(x, s, p):
    return _detect(np.stack([_conv_same(il * x, p["psf"]) for il in p["illum"]]), 4, p)


def phase_contrast(x, s, p):
    proj = _radon_stack(x, p)
    y = np.stack([_propagate(proj[a], p["d"], p["lam"]) for a in range(proj.shape[0])])
    return _detect(y * p["grating"], 4, p)


def thz(x, s, p):
    return _detect(_conv_same(x, p["kernel"]), 5, p)


def spectral_ct(x, s, p):
    return _detect(_radon_stack(x, p).ravel()[p["omega"]], 4, p)


def spect(x, s, p):
    return _detect(_radon(p["atten"] * x, p), 1, p)


def prop_mod(key, fam):
    def run(x, s, p):
        return _detect(_propagate(x, p["d"], p["lam"]) * p[key], fam, p)
    return run


def scatter_spectral(x, s, p):
    return _detect(_kernel_along(x * p["density"], p["kernel"], 0), 4, p)


def dot(x, s, p):
    K = p["kernel"]
    u = _kernel_along(x * p["absorption"], K, 0)
    u = np.stack([_propagate(u[k], p["d"], p["lam"]) for k in range(u.shape[0])])
    return _detect(_kernel_along(u, K, 0), 4, p)


def dot_strong(x, s, p):
    u = x * p["absorption"]
    for _ in range(s.get("born_order", 2)):
        u = np.stack([_propagate(u[k], p["d"], p["lam"]) for k in range(u.shape[0])])
        u = _kernel_along(u, p["kernel"], 0)
    return _detect(u.sum(axis=0), 4, p)


def eit(x, s, p):
    u = np.stack([inj * x for inj in p["injection"]]).astype(np.complex128)
    for sigma in p["conductivity"]:
        u = np.stack([_propagate(sigma * u[k], p["d"], p["lam"]) for k in range(u.shape[0])])
    boundary = u.sum(axis=1)
    return _detect(boundary.ravel()[p["omega"]], 1, p)


def beam_hardening(x, s, p):
    total = np.zeros((len(p["thetas"]), p["n_det"]))
    for e in range(x.shape[0]):
        total += np.exp(-p["alpha"] * _radon(x[e], p))
    return _detect(np.log(total + p["delta"]), 4, p)


def _poly(coeffs, z):
    out = np.zeros_like(z)
    for k, a in enumerate(coeffs):
        out = out + a * z ** k
    return out


def nl_ultrasound(x, s, p, fam=1):
    u = _propagate(x, p["d1"], p["lam"]) * p["medium"]
    return _detect(_propagate(_poly(p["poly"], u), p["d2"], p["lam"]), fam, p)


def fdtd_nonlinear(x, s, p):
    u = _propagate(x, p["d"], p["lam"]) * p["medium"]
    return _detect(_propagate(_poly(p["poly"], u), p["d2"], p["lam"]), 4, p)


def mpi(x, s, p):
    """Langevin magnetization response, not its polynomial truncation."""
    m = physics.langevin(p["drive"] * x)
    return _detect(_fourier_samples(m, p["ktraj"]), 1, p)


def qst(x, s, p):
    probs = np.array([np.dot(e, x) for e in p["effects"]])
    return _detect(probs[p["omega"]], 1, p)


ORACLES = {
    "lensless": lensless, "ct": tomography(4), "spc": pattern_sum, "cacti": cacti,
    "ptychography": ptychography, "mri": mri, "cassi": cassi, "oct": oct_oracle,
    "photoacoustic": mod_prop("absorption", 1), "sim": sim, "phase_contrast": phase_contrast,
    "electron_ptychography": ptychography, "ghost_imaging": pattern_sum, "thz_tds": thz,
    "neutron": tomography(4), "holography": mod_prop("pattern", 4), "sted": lensless,
    "light_field": mod_prop("pattern", 4), "fpm": mod_prop("pattern", 4), "spectral_ct": spectral_ct,
    "pet": tomography(1), "spect": spect, "ultrasound": prop_mod("reflectivity", 1),
    "sar": prop_mod("reflectivity", 5), "radar": prop_mod("reflectivity", 5),
    "electron_tomography": tomography(1), "compton": scatter_spectral, "raman": scatter_spectral,
    "fluorescence": scatter_spectral, "dot": dot, "brillouin": scatter_spectral,
    "dot_strong_scattering": dot_strong, "eit": eit, "mc_photon_transport": dot,
    "beam_hardening_ct": beam_hardening, "phase_wrapped_mri": lambda x, s, p: mri(x, s, p, wrap=True),
    "nonlinear_ultrasound": nl_ultrasound, "mpi": mpi, "fdtd_linear": prop_mod("medium", 4),
    "fdtd_nonlinear": fdtd_nonlinear, "qst": qst,
}


def has_oracle(name: str) -> bool:
    return name in ORACLES


def run_oracle(spec: OracleSpec, x, params: dict | None = None) -> np.ndarray:
    """Reference output for one input; ``params`` skips regeneration when given."""
    if spec.name not in ORACLES:
        raise KeyError(f"no reference oracle for {spec.name!r}")
    p = spec.params() if params is None else params
    return np.asarray(ORACLES[spec.name](np.asarray(x), spec.sizes, p))


def oracle_fn(spec: OracleSpec):
    """Callable ``x -> y`` with parameters generated once."""
    p = spec.params()
    return lambda x: run_oracle(spec, x, p)
