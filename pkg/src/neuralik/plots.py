"""Figure rendering for experiment reports (PNG files next to the CSVs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .evaluate import gmm_probe_rows


def loss_figure(history, path):
    epochs = [row["epoch"] for row in history if np.isfinite(row["train_nll"])]
    tr = [row["train_nll"] for row in history if np.isfinite(row["train_nll"])]
    ve = [(row["epoch"], row["val_nll"]) for row in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, tr, label="train NLL")
    ax.plot([e for e, _ in ve], [v for _, v in ve], label="validation NLL")
    ax.set_xlabel("epoch")
    ax.set_ylabel("negative log likelihood")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def gmm_figure(model, pose, path):
    rows = gmm_probe_rows(model, pose)
    n = model.cfg.n_joints
    fig, axes = plt.subplots(1, n, figsize=(3.5 * n, 3), squeeze=False)
    grid = np.linspace(-np.pi, np.pi, 600)
    for k in range(n):
        ax = axes[0][k]
        comps = [r for r in rows if r[0] == k]
        dens = np.zeros_like(grid)
        for _, _, mu, var, pi in comps:
            if pi > 0:
                dens += pi * np.exp(-(grid - mu) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var)
        ax.plot(grid, dens)
        ax.set_title(f"joint {k + 1}")
        ax.set_xlabel("angle (rad)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _chain_points(chain, angles):
    """Joint origins plus the end-effector, for 2-D layout drawing."""
    pts = [np.zeros(3)]
    origins, _, tip = chain._frames(np.asarray(angles, dtype=float))
    for k in range(1, chain.n_joints):
        pts.append(origins[k])
    pts.append(tip)
    return np.array(pts)


def solutions_figure(chain, model, target, path, n_samples=100, seed=0):
    """Sampled chain layouts for one target (planar chains only)."""
    rng = np.random.default_rng(seed)
    sols = model.sample_solutions(np.asarray(target)[None, :], n_samples, rng)[0]
    fig, ax = plt.subplots(figsize=(5, 5))
    for y in sols:
        pts = _chain_points(chain, chain.clamp(y))
        ax.plot(pts[:, 0], pts[:, 1], "-o", color="tab:blue", alpha=0.08, markersize=2)
    ax.plot(0, 0, "ko", markersize=8)
    ax.plot(target[0], target[1], "rx", markersize=10)
    ax.set_aspect("equal")
    ax.set_title(f"{n_samples} sampled solutions")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_experiment(out, chain, model, test_ds, result):
    out = Path(out)
    if result is not None:
        loss_figure(result.history, out / "loss.png")
    gmm_figure(model, test_ds.X[0], out / "gmm_probe.png")
    if np.allclose(chain._axes, [0.0, 0.0, 1.0]):
        solutions_figure(chain, model, test_ds.X[0], out / "solutions.png")


def render_path_experiment(out):
    out = Path(out)
    for csv in sorted(out.glob("trajectory_*_best.csv")):
        data = np.genfromtxt(csv, delimiter=",", names=True)
        names = [n for n in data.dtype.names if n.startswith("joint")]
        fig, ax = plt.subplots(figsize=(6, 4))
        for n in names:
            ax.plot(data["t"], data[n], label=n)
        ax.set_xlabel("step")
        ax.set_ylabel("angle (rad)")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(csv.with_suffix(".png"), dpi=120)
        plt.close(fig)
