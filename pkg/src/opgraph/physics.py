"""Numpy-only physics kernels shared by the operator builders and the reference oracles."""

from __future__ import annotations

import numpy as np

ELECTRON_REST_KEV = 510.99895


def compton_energy(e_kev, theta):
    """Scattered photon energy after deflection by ``theta``."""
    return e_kev / (1.0 + (e_kev / ELECTRON_REST_KEV) * (1.0 - np.cos(theta)))


def klein_nishina_dsigma(e_kev, theta):
    """Differential cross section per solid angle, in units of r_e^2."""
    ratio = compton_energy(e_kev, theta) / e_kev
    return 0.5 * ratio ** 2 * (ratio + 1.0 / ratio - np.sin(theta) ** 2)


def energy_bins(n: int, e_min: float = 50.0, e_max: float = 850.0):
    edges = np.linspace(e_min, e_max, n + 1)
    return edges, 0.5 * (edges[:-1] + edges[1:])


def klein_nishina_kernel(n_bins: int, e_min: float = 50.0, e_max: float = 850.0,
                         n_theta: int = 721, theta_max: float = np.pi) -> np.ndarray:
    """Dense (n_bins x n_bins) kernel; column j is the scattered spectrum of bin j.

    For each incident bin centre the cross section is integrated over exit
    angles in [0, theta_max] and the exit energies are histogrammed into the
    same bins. Columns are scaled by a common factor so the largest column sum
    is 1, which keeps the operator norm at or below 1.
    """
    edges, centers = energy_bins(n_bins, e_min, e_max)
    theta = np.linspace(0.0, theta_max, n_theta)
    dtheta = theta[1] - theta[0]
    K = np.zeros((n_bins, n_bins))
    for j, e in enumerate(centers):
        w = klein_nishina_dsigma(e, theta) * 2.0 * np.pi * np.sin(theta) * dtheta
        e_out = compton_energy(e, theta)
        idx = np.clip(np.searchsorted(edges, e_out, side="right") - 1, 0, n_bins - 1)
        np.add.at(K[:, j], idx, w)
    return K / K.sum(axis=0).max()


def raman_kernel(n_bins: int, shift: int = 2, width: float = 0.8) -> np.ndarray:
    """Stokes-shifted Lorentzian line: input bin j feeds bins near j + shift."""
    i = np.arange(n_bins)[:, None]
    j = np.arange(n_bins)[None, :]
    K = 1.0 / (1.0 + ((i - j - shift) / width) ** 2)
    K[i < j] = 0.0
    return K / K.sum(axis=0).max()


def fluorescence_kernel(n_bins: int, stokes: float = 1.5, width: float = 1.2) -> np.ndarray:
    """Absorption-weighted emission spectrum red-shifted by ``stokes`` bins."""
    i = np.arange(n_bins)[:, None]
    j = np.arange(n_bins)[None, :]
    absorb = np.exp(-((j - 0.3 * n_bins) / (0.35 * n_bins)) ** 2)
    K = absorb * np.exp(-((i - j - stokes) / width) ** 2)
    return K / K.sum(axis=0).max()


def brillouin_kernel(n_bins: int, elastic: float = 0.8, sideband: float = 0.1) -> np.ndarray:
    """Rayleigh line plus Stokes/anti-Stokes sidebands one bin away."""
    return elastic * np.eye(n_bins) + sideband * (np.eye(n_bins, k=1) + np.eye(n_bins, k=-1))


def henyey_greenstein_kernel(n_dirs: int, g: float = 0.6, albedo: float = 0.9) -> np.ndarray:
    """Circulant in-plane phase function over ``n_dirs`` directions, columns sum to ``albedo``."""
    ang = 2 * np.pi * np.arange(n_dirs) / n_dirs
    d = ang[:, None] - ang[None, :]
    p = (1 - g * g) / (1 + g * g - 2 * g * np.cos(d))
    return albedo * p / p.sum(axis=0, keepdims=True)


def langevin(x):
    """L(x) = coth(x) - 1/x, with the small-argument series near zero."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    big = 1.0 / np.tanh(safe) - 1.0 / safe
    series = x / 3 - x ** 3 / 45
    return np.where(small, series, big)
