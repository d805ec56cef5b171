"""Three SVG panels per training trace: horizon, loss components, horizon gradient."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from perihorizon.training import TrainTrace  # noqa: E402

PANELS = ("delta", "loss", "grad")


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_trace(trace: TrainTrace, out_dir, stem: str = "trace", delta_true: float | None = None) -> dict:
    """Write ``<stem>_delta.svg``, ``<stem>_loss.svg`` and ``<stem>_grad.svg``.

    The gradient panel is on a log scale of |dL/d delta|; positive values are
    drawn as a solid line, negative values as crosses.
    """
    if len(trace) == 0:
        raise ValueError("cannot plot an empty trace")
    out_dir = Path(out_dir)
    epoch = trace.column("epoch")
    paths = {}

    fig, ax = plt.subplots(figsize=(4, 3))
    ax.plot(epoch, trace.delta, color="C0")
    if delta_true is not None:
        ax.axhline(delta_true, color="0.5", linestyle=":", linewidth=1)
    ax.set_xlabel("epoch")
    ax.set_ylabel("delta")
    paths["delta"] = _save(fig, out_dir / f"{stem}_delta.svg")

    fig, ax = plt.subplots(figsize=(4, 3))
    for name, color in (("R_s", "C1"), ("R_d", "C2")):
        col = trace.column(name)
        ax.plot(epoch, col, color=color, label=name)
    if np.all(np.concatenate([trace.column("R_s"), trace.column("R_d")]) > 0):
        ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    paths["loss"] = _save(fig, out_dir / f"{stem}_loss.svg")

    fig, ax = plt.subplots(figsize=(4, 3))
    g = trace.column("dL_ddelta")
    mag = np.abs(g)
    pos = np.where(g > 0, mag, np.nan)
    neg = np.where(g < 0, mag, np.nan)
    ax.plot(epoch, pos, color="C3", linestyle="-", label="dL/d delta > 0", gid="grad-positive")
    ax.plot(epoch, neg, color="C4", linestyle="none", marker="x", markersize=3, label="dL/d delta < 0", gid="grad-negative")
    if np.any(mag > 0):
        ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("|dL/d delta|")
    ax.legend()
    paths["grad"] = _save(fig, out_dir / f"{stem}_grad.svg")
    return paths
