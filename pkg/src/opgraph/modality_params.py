"""Seeded physical parameters for every registry modality.

Numpy only: both the graph builders and the loop-based reference oracles draw
their masks, kernels and geometries from here, so the two sides agree on the
physics while sharing no evaluation code.
"""

from __future__ import annotations

import math
import zlib

import numpy as np

from opgraph import physics


def rng_for(name: str, seed: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


def _centered(n):
    return np.arange(n) - (n - 1) / 2


def ct_geometry(n: int, angles: int) -> dict:
    return {
        "thetas": np.linspace(0.0, np.pi, angles, endpoint=False),
        "n_det": int(math.ceil(math.sqrt(2.0) * n)) | 1,
        "det_spacing": 1.0,
        "pixel_size": 2.0 / n,
    }


def cartesian_k(n: int) -> np.ndarray:
    k = np.arange(n) - n // 2
    return np.stack(np.meshgrid(k, k, indexing="ij"), axis=-1).reshape(-1, 2).astype(np.float64)


def k_subset(n: int, m: int, rng) -> np.ndarray:
    """Sorted flat indices into the n x n Cartesian grid; the DC sample is always kept."""
    total = n * n
    m = min(m, total)
    dc = (n // 2) * n + n // 2
    rest = rng.choice(np.setdiff1d(np.arange(total), [dc]), size=m - 1, replace=False)
    return np.sort(np.concatenate([[dc], rest])).astype(np.int64)


def smooth_coil(n: int, rng) -> np.ndarray:
    y, x = np.meshgrid(_centered(n) / n, _centered(n) / n, indexing="ij")
    cy, cx = rng.uniform(-0.4, 0.4, 2)
    mag = np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / 0.3)
    phase = rng.uniform(-1, 1) * np.pi * (y + 0.5 * x)
    s = mag * np.exp(1j * phase)
    return s / np.abs(s).max()


def gaussian_psf(k: int, sigma: float) -> np.ndarray:
    c = _centered(k)
    g = np.exp(-(c[:, None] ** 2 + c[None, :] ** 2) / (2 * sigma * sigma))
    return g / g.sum()


def probe_stack(n: int, positions: int, rng) -> np.ndarray:
    """Circular probes on a square scan grid with a weak random phase."""
    side = int(math.ceil(math.sqrt(positions)))
    y, x = np.meshgrid(_centered(n), _centered(n), indexing="ij")
    r = n / 4
    offs = (np.arange(side) - (side - 1) / 2) * (n / 4)
    out = []
    for k in range(positions):
        oy, ox = offs[k // side], offs[k % side]
        ap = ((y - oy) ** 2 + (x - ox) ** 2 <= r * r).astype(np.float64)
        out.append(ap * np.exp(1j * 0.3 * rng.standard_normal((n, n))))
    return np.stack(out)


def _binary(shape, rng, p=0.5):
    return (rng.random(shape) < p).astype(np.float64)


def modality_parameters(name: str, sizes: dict, seed: int = 0) -> dict:
    """Parameters for modality ``name`` at the bound ``sizes``."""
    fn = _GENERATORS.get(name)
    if fn is None:
        raise KeyError(name)
    return fn(dict(sizes), rng_for(name, seed))


def _lensless(s, rng):
    k = s.get("kernel", 9)
    psf = rng.random((k, k)) ** 3 * gaussian_psf(k, k / 3)
    return {"psf": psf / psf.sum(), "g": 1.0}


def _ct(s, rng):
    return {**ct_geometry(s["n"], s["angles"]), "g": 1.0}


def _spc(s, rng):
    m = s.get("patterns", s["n"] * s["n"] // 4)
    return {"patterns": _binary((m, s["n"], s["n"]), rng), "g": 1.0}


def _cacti(s, rng):
    return {"masks": _binary((s["frames"], s["n"], s["n"]), rng), "g": 1.0}


def _ptycho(s, rng, d=20.0, lam=0.5):
    return {"probes": probe_stack(s["n"], s.get("positions", 4), rng), "d": d, "lam": lam, "g": 1.0}


def _eptycho(s, rng):
    return _ptycho(s, rng, d=8.0, lam=0.25)


def _mri(s, rng):
    n = s["n"]
    return {"coil": smooth_coil(n, rng), "ktraj": cartesian_k(n),
            "omega": k_subset(n, s["k_samples"], rng), "g": 1.0}


def _cassi(s, rng):
    return {"mask": _binary((s["n"], s["n"]), rng), "alpha": 1.0, "a": 0.0,
            "lambdas": np.arange(s["bands"], dtype=np.float64), "g": 1.0}


def _oct(s, rng):
    return {"d_ref": 5.0, "d_sample": 5.0 + rng.uniform(1.0, 3.0), "lam": 0.5, "phi": 0.0, "g": 1.0}


def _photoacoustic(s, rng):
    return {"absorption": 0.5 + 0.5 * rng.random((s["n"], s["n"])), "d": 10.0, "lam": 0.5, "g": 1.0}


def _sim(s, rng):
    n = s["n"]
    y, x = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    f = 0.15
    pats = [0.5 * (1 + np.cos(2 * np.pi * f * x + ph)) for ph in (0, 2 * np.pi / 3, 4 * np.pi / 3)]
    return {"illum": np.stack(pats), "psf": gaussian_psf(7, 1.2), "g": 1.0}


def _phase_contrast(s, rng):
    geo = ct_geometry(s["n"], s["angles"])
    grating = np.tile([1.0, 0.0], geo["n_det"] // 2 + 1)[:geo["n_det"]]
    return {**geo, "d": 6.0, "lam": 0.5,
            "grating": np.broadcast_to(grating, (s["depth_z"], geo["n_det"])).copy(), "g": 1.0}


def _ghost(s, rng):
    m = s.get("patterns", s["n"] * s["n"] // 4)
    speckle = rng.exponential(1.0, (m, s["n"], s["n"]))
    return {"patterns": speckle / speckle.max(), "g": 1.0}


def _thz(s, rng):
    k = 5
    h = gaussian_psf(k, 1.0) * np.exp(1j * rng.uniform(-np.pi, np.pi, (k, k)))
    return {"kernel": h, "phi": 0.4, "g": 1.0}


def _probe_prop(s, rng, d=15.0):
    n = s["n"]
    y, x = np.meshgrid(_centered(n), _centered(n), indexing="ij")
    return {"pattern": np.exp(1j * 0.02 * (x ** 2 + y ** 2)), "d": d, "lam": 0.5, "g": 1.0}


def _light_field(s, rng):
    n = s["n"]
    y, x = np.meshgrid(np.arange(n) % 8 - 3.5, np.arange(n) % 8 - 3.5, indexing="ij")
    return {"pattern": np.exp(-1j * 0.2 * (x ** 2 + y ** 2)), "d": 12.0, "lam": 0.5, "g": 1.0}


def _fpm(s, rng):
    n = s["n"]
    y, x = np.meshgrid(_centered(n), _centered(n), indexing="ij")
    tilts = [(0, 0), (0.05, 0), (-0.05, 0), (0, 0.05), (0, -0.05)]
    stack = np.stack([np.exp(2j * np.pi * (ky * y + kx * x)) for ky, kx in tilts])
    return {"pattern": stack, "d": 10.0, "lam": 0.5, "g": 1.0}


def _spectral_ct(s, rng):
    geo = ct_geometry(s["n"], s["angles"])
    nE = s["energy_bins"]
    shape = (s["angles"], nE, geo["n_det"])
    keep = np.arange(int(np.prod(shape))).reshape(shape)[:, 1:, :].ravel()
    return {**geo, "omega": np.sort(keep), "g": 1.0}


def _spect(s, rng):
    return {**ct_geometry(s["n"], s["angles"]), "atten": 0.6 + 0.4 * rng.random((s["n"], s["n"])), "g": 1.0}


def _wave_reflect(s, rng, phi=None):
    out = {"d": 8.0, "lam": 0.5, "reflectivity": rng.uniform(0.2, 1.0, (s["n"], s["n"])), "g": 1.0}
    if phi is not None:
        out["phi"] = phi
    return out


def _scatter_common(s, rng, kernel):
    n = s["n"]
    return {"density": rng.uniform(0.2, 1.0, (n, n)), "kernel": kernel, "g": 1.0}


def _compton(s, rng):
    return _scatter_common(s, rng, physics.klein_nishina_kernel(s["energy_bins"]))


def _raman(s, rng):
    return _scatter_common(s, rng, physics.raman_kernel(s["energy_bins"]))


def _fluorescence(s, rng):
    return _scatter_common(s, rng, physics.fluorescence_kernel(s["energy_bins"]))


def _brillouin(s, rng):
    return _scatter_common(s, rng, physics.brillouin_kernel(s["energy_bins"]))


def _dot(s, rng):
    n = s["n"]
    return {"absorption": rng.uniform(0.3, 1.0, (n, n)),
            "kernel": physics.henyey_greenstein_kernel(s["dirs"]), "d": 4.0, "lam": 0.5, "g": 1.0}


def _eit(s, rng):
    n = s["n"]
    reps = s.get("born_order", 2)
    y, x = np.meshgrid(_centered(n) / n, _centered(n) / n, indexing="ij")
    src = np.stack([np.cos(np.pi * (k + 1) * x) for k in range(s["sources"])])
    conductivity = [0.5 + 0.5 * rng.random((n, n)) for _ in range(reps)]
    electrodes = np.arange(0, s["sources"] * n, 2, dtype=np.int64)
    return {"injection": src, "conductivity": conductivity, "d": 3.0, "lam": 0.5,
            "omega": electrodes, "g": 1.0}


def _beam_hardening(s, rng):
    return {**ct_geometry(s["n"], s["angles"]), "alpha": s.get("alpha", 20.0), "delta": 1e-8, "g": 1.0}


def _phase_mri(s, rng):
    return _mri(s, rng)


def _nl_ultrasound(s, rng):
    return {"d1": 6.0, "d2": 6.0, "lam": 0.5, "medium": rng.uniform(0.5, 1.0, (s["n"], s["n"])),
            "poly": (0.0, 1.0, 0.3), "g": 1.0}


def _mpi(s, rng):
    n = s["n"]
    return {"drive": s.get("drive", 10.0) * rng.uniform(0.5, 1.0, (n, n)),
            "poly": (0.0, 1.0 / 3.0, 0.0, -1.0 / 45.0), "ktraj": cartesian_k(n), "g": 1.0}


def _fdtd(s, rng):
    return {"d": 5.0, "lam": 0.5, "medium": rng.uniform(0.5, 1.0, (s["n"], s["n"])), "g": 1.0}


def _fdtd_nl(s, rng):
    return {**_fdtd(s, rng), "d2": 5.0, "poly": (0.0, 1.0, 0.0, 0.2)}


def _qst(s, rng):
    d = s["qudit"]
    m = s.get("effects", 2 * d * d)
    eff = rng.standard_normal((m, d * d))
    eff /= np.linalg.norm(eff, axis=1, keepdims=True)
    return {"effects": eff, "omega": np.arange(0, m, 2, dtype=np.int64), "g": 1.0}


_GENERATORS = {
    "lensless": _lensless, "ct": _ct, "spc": _spc, "cacti": _cacti, "ptychography": _ptycho,
    "mri": _mri, "cassi": _cassi, "oct": _oct, "photoacoustic": _photoacoustic, "sim": _sim,
    "phase_contrast": _phase_contrast, "electron_ptychography": _eptycho, "ghost_imaging": _ghost,
    "thz_tds": _thz, "neutron": _ct, "holography": _probe_prop, "sted": _lensless,
    "light_field": _light_field, "fpm": _fpm, "spectral_ct": _spectral_ct, "pet": _ct,
    "spect": _spect, "ultrasound": _wave_reflect,
    "sar": lambda s, r: _wave_reflect(s, r, phi=0.0),
    "radar": lambda s, r: _wave_reflect(s, r, phi=0.7), "electron_tomography": _ct,
    "compton": _compton, "raman": _raman, "fluorescence": _fluorescence, "dot": _dot,
    "brillouin": _brillouin, "dot_strong_scattering": _dot, "eit": _eit,
    "mc_photon_transport": _dot, "beam_hardening_ct": _beam_hardening,
    "phase_wrapped_mri": _phase_mri, "nonlinear_ultrasound": _nl_ultrasound, "mpi": _mpi,
    "fdtd_linear": _fdtd, "fdtd_nonlinear": _fdtd_nl, "qst": _qst,
}
