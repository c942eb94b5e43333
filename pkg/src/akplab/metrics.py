"""Confusion-matrix metrics, per-epoch curves, run records and group aggregation."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InsufficientDataError, ShapeError


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(preds, labels, positive_class: int = 1) -> Confusion:
    preds = np.asarray(preds).ravel()
    labels = np.asarray(labels).ravel()
    if preds.shape != labels.shape:
        raise ShapeError(f"{preds.size} predictions vs {labels.size} labels")
    p = preds == positive_class
    t = labels == positive_class
    return Confusion(int(np.sum(p & t)), int(np.sum(p & ~t)), int(np.sum(~p & t)), int(np.sum(~p & ~t)))


def precision_recall_f1(c: Confusion) -> tuple[float, float, float]:
    """Zero denominators give 0 rather than an error."""
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    return p, r, f1_score(p, r)


def f1_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds).ravel()
    labels = np.asarray(labels).ravel()
    if preds.shape != labels.shape:
        raise ShapeError(f"{preds.size} predictions vs {labels.size} labels")
    if preds.size == 0:
        raise InsufficientDataError("accuracy of an empty set is undefined")
    return float(np.mean(preds == labels))


@dataclass(frozen=True)
class CurvePoint:
    epoch: int
    train_acc: float
    val_acc: float
    train_loss: float
    val_loss: float


CURVE_FIELDS = ("epoch", "train_acc", "val_acc", "train_loss", "val_loss")


def write_curves_csv(path, curves) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_FIELDS)
        for c in curves:
            w.writerow([c.epoch] + [repr(float(getattr(c, f))) for f in CURVE_FIELDS[1:]])


def read_curves_csv(path) -> list[CurvePoint]:
    with open(path, newline="") as fh:
        return [CurvePoint(int(r["epoch"]), *(float(r[f]) for f in CURVE_FIELDS[1:])) for r in csv.DictReader(fh)]


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    curves: list = field(default_factory=list)
    confusion: dict = field(default_factory=dict)  # class index -> Confusion, that class as positive
    test_accuracy: float | None = None
    events: list = field(default_factory=list)
    group: str = "custom"
    trial: int = 0
    optimizer: str = ""
    perturbation: str = "none"
    initializer: str = ""
    status: str = "ok"
    error: str = ""

    def class_metrics(self) -> dict[int, tuple[float, float, float]]:
        return {k: precision_recall_f1(c) for k, c in sorted(self.confusion.items())}

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["curves"] = [asdict(c) for c in self.curves]
        doc["confusion"] = {str(k): asdict(c) for k, c in self.confusion.items()}
        doc["events"] = [asdict(e) if hasattr(e, "__dataclass_fields__") else e for e in self.events]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        doc = dict(doc)
        doc["curves"] = [CurvePoint(**c) for c in doc.get("curves", [])]
        doc["confusion"] = {int(k): Confusion(**c) for k, c in doc.get("confusion", {}).items()}
        return cls(**doc)


@dataclass
class GroupSummary:
    n_records: int
    n_failed: int
    per_class: dict  # class -> {"precision", "recall", "f1"} means
    accuracy: float
    per_record: list  # [{"trial", "seed", "accuracy", "per_class"}]

    def to_dict(self) -> dict:
        return {"n_records": self.n_records, "n_failed": self.n_failed,
                "per_class": {str(k): v for k, v in self.per_class.items()},
                "accuracy": self.accuracy, "per_record": self.per_record}


def aggregate(records) -> GroupSummary:
    """Arithmetic means over completed records; failed records are only counted."""
    records = list(records)
    if not records:
        raise InsufficientDataError("cannot aggregate an empty record list")
    done = [r for r in records if r.status == "ok"]
    if not done:
        raise InsufficientDataError("no completed records to aggregate")
    classes = sorted(done[0].confusion)
    if any(sorted(r.confusion) != classes for r in done):
        raise ShapeError("records report different class sets")
    per_record = []
    for r in sorted(done, key=lambda r: (r.trial, r.seed)):
        m = r.class_metrics()
        per_record.append({"trial": r.trial, "seed": r.seed, "accuracy": r.test_accuracy,
                           "per_class": {str(k): dict(zip(("precision", "recall", "f1"), v)) for k, v in m.items()}})
    # sorting makes the float sums independent of input order
    per_class = {}
    for k in classes:
        rows = sorted(r.class_metrics()[k] for r in done)
        per_class[k] = {name: float(np.mean([row[i] for row in rows]))
                        for i, name in enumerate(("precision", "recall", "f1"))}
    acc = float(np.mean(sorted(r.test_accuracy for r in done)))
    return GroupSummary(len(done), len(records) - len(done), per_class, acc, per_record)
