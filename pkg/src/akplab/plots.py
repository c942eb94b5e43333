"""Matplotlib figures written next to the CSV/JSON outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STRESS_COLORS = {"none": "tab:blue", "mild": "tab:green", "severe": "tab:red"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_curves(records, path, title: str = "", swap_epochs=()) -> None:
    """Training and validation accuracy per epoch, one line per trial."""
    fig, (ax_tr, ax_va) = plt.subplots(1, 2, figsize=(10, 3.6), sharey=True)
    for r in records:
        if not r.curves:
            continue
        ep = [c.epoch for c in r.curves]
        label = f"trial {r.trial}"
        ax_tr.plot(ep, [c.train_acc for c in r.curves], lw=1.2, label=label)
        ax_va.plot(ep, [c.val_acc for c in r.curves], lw=1.2, label=label)
    for ax, name in ((ax_tr, "training accuracy"), (ax_va, "validation accuracy")):
        for e in swap_epochs:
            ax.axvline(e, color="0.8", lw=0.8, zorder=0)
        ax.set_xlabel("epoch")
        ax.set_title(name)
        ax.set_ylim(0, 1.02)
    ax_tr.set_ylabel("accuracy")
    ax_va.legend(fontsize=7, loc="lower right")
    if title:
        fig.suptitle(title)
    _save(fig, path)


def plot_ordination(coords, model_ids, stresses, path, explained=None) -> None:
    fig, ax = plt.subplots(figsize=(5, 4.2))
    coords = np.asarray(coords)
    ys = coords[:, 1] if coords.shape[1] > 1 else np.zeros(len(coords))
    for (x, y), mid, st in zip(zip(coords[:, 0], ys), model_ids, stresses):
        ax.scatter(x, y, s=60, color=STRESS_COLORS.get(st, "k"), edgecolor="k", lw=0.5)
        ax.annotate(mid, (x, y), fontsize=6, xytext=(3, 3), textcoords="offset points")
    for st, col in STRESS_COLORS.items():
        if st in stresses:
            ax.scatter([], [], color=col, label=st)
    ax.legend(title="stress", fontsize=7)
    if explained is not None:
        ax.set_xlabel(f"PC1 ({explained[0]:.0%})")
        if len(explained) > 1:
            ax.set_ylabel(f"PC2 ({explained[1]:.0%})")
    _save(fig, path)


def plot_similarity(matrix, model_ids, path) -> None:
    n = len(model_ids)
    fig, ax = plt.subplots(figsize=(1.2 + 0.5 * n, 1 + 0.45 * n))
    im = ax.imshow(matrix, vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(n), model_ids, rotation=90, fontsize=7)
    ax.set_yticks(range(n), model_ids, fontsize=7)
    fig.colorbar(im, ax=ax, label="Pearson r")
    _save(fig, path)


def plot_lv(times, states, features, values, path) -> None:
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.4))
    axes[0].plot(times, states[:, 0], label="W1 (prey)")
    axes[0].plot(times, states[:, 1], label="W2 (predator)")
    axes[0].set_xlabel("t")
    axes[0].legend(fontsize=7)
    axes[1].plot(features[:, 0], features[:, 1], lw=1)
    axes[1].set_xlabel("f1")
    axes[1].set_ylabel("f2")
    axes[2].plot(times, np.asarray(values) - values[0])
    axes[2].set_xlabel("t")
    axes[2].set_ylabel("V(t) - V(0)")
    _save(fig, path)
