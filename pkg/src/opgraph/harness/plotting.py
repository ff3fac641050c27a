"""Basis-growth figure."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from opgraph.registry import basis_growth  # noqa: E402


def plot_basis_growth(path, steps=None) -> Path:
    steps = steps if steps is not None else basis_growth()
    N = [s.N for s in steps]
    K = [s.K for s in steps]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.step(N, K, where="post", color="k", lw=1.5)
    ax.plot(N, K, "o", ms=3, color="k")
    for s in steps:
        if s.introduced:
            ax.annotate(" ".join(s.introduced), (s.N, s.K),
                        textcoords="offset points", xytext=(3, 4), fontsize=8)
    ax.set_xlabel("modalities added (N)")
    ax.set_ylabel("primitives needed (K)")
    ax.set_ylim(0, max(K) + 1.5)
    ax.set_xlim(0, max(N) + 1)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
