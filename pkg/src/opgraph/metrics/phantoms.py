"""Built-in analytic phantoms and the 20-object fidelity test set."""

from __future__ import annotations

import numpy as np

from opgraph.field import EdgeType

# (value, a, b, x0, y0, phi_deg) on [-1, 1]^2, the modified Shepp-Logan set
_SHEPP_LOGAN = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
]


def grid(ny: int, nx: int):
    """Pixel-centre coordinates spanning [-1, 1] (y increases with the row index)."""
    y = (np.arange(ny) - (ny - 1) / 2) * (2.0 / ny)
    x = (np.arange(nx) - (nx - 1) / 2) * (2.0 / nx)
    return np.meshgrid(y, x, indexing="ij")


def _ellipses(ny, nx, table):
    Y, X = grid(ny, nx)
    img = np.zeros((ny, nx))
    for v, a, b, x0, y0, phi in table:
        c, s = np.cos(np.radians(phi)), np.sin(np.radians(phi))
        xr = (X - x0) * c + (Y - y0) * s
        yr = -(X - x0) * s + (Y - y0) * c
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1] += v
    return img


def shepp_logan(ny, nx):
    return _ellipses(ny, nx, _SHEPP_LOGAN)


def disk(ny, nx, r=0.6, supersample=1):
    """Centred disk; ``supersample > 1`` averages sub-pixel samples (anti-aliasing)."""
    s = supersample
    Y, X = grid(ny * s, nx * s)
    img = (X ** 2 + Y ** 2 <= r * r).astype(np.float64)
    return img.reshape(ny, s, nx, s).mean(axis=(1, 3))


def checkerboard(ny, nx, cells=4):
    iy = (np.arange(ny) * cells) // ny
    ix = (np.arange(nx) * cells) // nx
    return ((iy[:, None] + ix[None, :]) % 2).astype(np.float64)


def gaussian_blobs(ny, nx):
    Y, X = grid(ny, nx)
    out = np.zeros((ny, nx))
    for a, y0, x0, w in ((1.0, -0.4, -0.3, 0.15), (0.7, 0.3, 0.4, 0.25), (0.5, 0.2, -0.5, 0.1)):
        out += a * np.exp(-((Y - y0) ** 2 + (X - x0) ** 2) / (2 * w * w))
    return out


def bar_target(ny, nx, bars=5):
    Y, X = grid(ny, nx)
    stripes = (np.floor((X + 1) * bars) % 2 == 0) & (np.abs(Y) < 0.7)
    return stripes.astype(np.float64)


def ring(ny, nx):
    Y, X = grid(ny, nx)
    r = np.hypot(Y, X)
    return ((r > 0.35) & (r < 0.65)).astype(np.float64)


def square(ny, nx):
    Y, X = grid(ny, nx)
    return ((np.abs(Y + 0.1) < 0.45) & (np.abs(X - 0.15) < 0.3)).astype(np.float64)


def ramp(ny, nx):
    Y, X = grid(ny, nx)
    return 0.5 * (X + 1) * (np.hypot(X, Y) < 0.9)


def grating(ny, nx, cycles=3.0):
    Y, X = grid(ny, nx)
    return 0.5 + 0.5 * np.cos(np.pi * cycles * (X + 0.5 * Y))


def ellipse_field(ny, nx, seed=11):
    rng = np.random.default_rng(seed)
    table = [(rng.uniform(0.2, 1.0), rng.uniform(0.05, 0.4), rng.uniform(0.05, 0.4),
              rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0, 180)) for _ in range(6)]
    return _ellipses(ny, nx, table)


PHANTOMS = {
    "shepp_logan": shepp_logan, "disk": disk, "checkerboard": checkerboard,
    "gaussian_blobs": gaussian_blobs, "bar_target": bar_target, "ring": ring,
    "square": square, "ramp": ramp, "grating": grating, "ellipse_field": ellipse_field,
}


def _profile(n: int, k: int) -> np.ndarray:
    """Smooth positive profile along a non-spatial axis, varied with k."""
    if n == 1:
        return np.ones(1)
    t = np.linspace(0.0, 1.0, n)
    c = (0.15 + 0.7 * ((k * 0.37) % 1.0))
    return 0.3 + np.exp(-((t - c) ** 2) / 0.08)


def phantom_object(name: str, t: EdgeType, k: int = 0) -> np.ndarray:
    """Phantom ``name`` lifted to the shape and dtype of ``t``, unit norm."""
    fn = PHANTOMS[name]
    if t.ndim >= 2:
        ny, nx = t.shape[-2:]
        img = fn(ny, nx)
        for i, n in enumerate(reversed(t.shape[:-2])):
            img = _profile(n, k + 3 * i).reshape((n,) + (1,) * img.ndim) * img
    elif t.ndim == 1:
        n = t.shape[0]
        side = int(np.ceil(np.sqrt(n)))
        img = fn(side, side).ravel()[:n]
    else:
        img = np.array(1.0 + k)
    img = np.asarray(img, dtype=np.float64)
    if t.is_complex:
        phase = np.pi * (np.linspace(-1, 1, img.size).reshape(img.shape) * (0.3 + 0.1 * k))
        img = img * np.exp(1j * phase)
    norm = np.linalg.norm(img)
    if norm == 0:
        img = np.ones(t.shape, dtype=img.dtype)
        norm = np.linalg.norm(img)
    return (img / norm).astype(t.np_dtype)


def gaussian_objects(t: EdgeType, n: int, seed: int) -> list[np.ndarray]:
    """``n`` i.i.d. standard normal objects (complex when ``t`` is), unit norm."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        x = t.random(rng)
        out.append(x / np.linalg.norm(x))
    return out


def s1_test_set(t: EdgeType, seed: int = 0) -> list[np.ndarray]:
    """Ten phantoms followed by ten unit-norm Gaussian objects."""
    phantoms = [phantom_object(name, t, k) for k, name in enumerate(PHANTOMS)]
    return phantoms + gaussian_objects(t, 10, seed)
