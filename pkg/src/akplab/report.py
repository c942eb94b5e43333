"""Table-shaped run summaries and similarity analyses written to disk with their figures."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import plots
from .errors import InsufficientDataError
from .metrics import aggregate
from .repsim import akp_report, final_snapshots, pca_ordinate, similarity_matrix

TABLE_FIELDS = ("group", "perturbation", "optimizer", "class", "precision", "recall", "f1", "accuracy")


def summarize_runs(records) -> dict:
    """Group records by (group, perturbation, optimizer) and average each block."""
    blocks = defaultdict(list)
    for r in records:
        blocks[(r.group, r.perturbation, r.optimizer)].append(r)
    experiments, rows = [], []
    for (group, pert, opt), recs in sorted(blocks.items()):
        entry = {"group": group, "perturbation": pert, "optimizer": opt, "n_trials": len(recs)}
        try:
            s = aggregate(recs)
        except InsufficientDataError as exc:
            entry.update(n_failed=len(recs), error=str(exc))
            experiments.append(entry)
            continue
        entry.update(n_failed=s.n_failed, accuracy=s.accuracy,
                     classes={str(k): v for k, v in s.per_class.items()}, per_record=s.per_record)
        experiments.append(entry)
        for i, (k, m) in enumerate(sorted(s.per_class.items())):
            # one accuracy per experiment, printed on its first class row
            rows.append({"group": group, "perturbation": pert, "optimizer": opt, "class": k, **m,
                         "accuracy": s.accuracy if i == 0 else None})
    return {"experiments": experiments, "rows": rows}


def write_report(records, out_path) -> dict:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    summary = summarize_runs(records)
    with open(out_path.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TABLE_FIELDS)
        w.writeheader()
        for row in summary["rows"]:
            w.writerow({k: ("" if row[k] is None else row[k]) for k in TABLE_FIELDS})

    blocks = defaultdict(list)
    for r in records:
        blocks[(r.group, r.perturbation, r.optimizer)].append(r)
    figures = []
    for (group, pert, opt), recs in sorted(blocks.items()):
        swaps = sorted({e["epoch"] if isinstance(e, dict) else e.epoch for r in recs for e in r.events})
        fig = out_path.with_name(f"{out_path.stem}_{group}_{pert}_{opt}_curves.png".replace("+", "-"))
        plots.plot_curves(sorted(recs, key=lambda r: r.trial), fig, f"group {group}: {pert} swaps, {opt}", swaps)
        figures.append(fig.name)
    summary["figures"] = figures
    with open(out_path, "w") as fh:
        json.dump(summary, fh, indent=1)
    return summary


def write_similarity(snapshots, out_dir, threshold: float = 0.75, layer: int = 2) -> dict:
    """Final-epoch snapshots of ``layer`` -> similarity.csv, ordination.csv, akp_report.json and figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    snaps = final_snapshots(snapshots, layer)
    if len(snaps) < 2:
        raise InsufficientDataError(f"need at least two models with layer-{layer} snapshots, found {len(snaps)}")
    ids = [s.model_id for s in snaps]
    sim = similarity_matrix(snaps, undefined="nan")
    with open(out_dir / "similarity.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model_id", *ids])
        for mid, row in zip(ids, sim):
            w.writerow([mid, *(repr(float(x)) for x in row)])

    ordn = pca_ordinate(snaps, dims=2)
    coords = ordn.coords if ordn.coords.shape[1] == 2 else np.column_stack([ordn.coords, np.zeros(len(snaps))])
    with open(out_dir / "ordination.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model_id", "stress", "x", "y"])
        for s, (x, y) in zip(snaps, coords):
            w.writerow([s.model_id, s.stress.value, repr(float(x)), repr(float(y))])

    runs = [(s, s.meta["test_accuracy"]) for s in snaps if s.meta.get("test_accuracy") is not None]
    rep = akp_report(runs, threshold).to_dict() if runs else {"error": "no snapshot carries a test accuracy"}
    rep["layer"] = layer
    rep["explained_variance"] = ordn.explained.tolist()
    with open(out_dir / "akp_report.json", "w") as fh:
        json.dump(rep, fh, indent=1)

    plots.plot_similarity(sim, ids, out_dir / "similarity.png")
    plots.plot_ordination(coords, ids, [s.stress.value for s in snaps], out_dir / "ordination.png", ordn.explained)
    return rep
