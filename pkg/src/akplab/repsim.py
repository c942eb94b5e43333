"""Representation snapshots, Pearson similarity, PCA ordination and the happy/unhappy gap."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ComparabilityError, InsufficientDataError, UndefinedCorrelationError, UsageError
from .network import Network, forward


class StressLevel(str, enum.Enum):
    NONE = "none"
    MILD = "mild"
    SEVERE = "severe"


def stress_level(activation_policy, loss_policy) -> StressLevel:
    """No active policy -> none; one of activation/loss -> mild; both -> severe."""
    active = sum(p is not None and len(p.swap_epochs) > 0 for p in (activation_policy, loss_policy))
    return (StressLevel.NONE, StressLevel.MILD, StressLevel.SEVERE)[active]


def probe_fingerprint(probe: np.ndarray) -> str:
    probe = np.ascontiguousarray(probe, dtype=np.float64)
    h = hashlib.sha256(str(probe.shape).encode())
    h.update(probe.tobytes())
    return h.hexdigest()[:16]


@dataclass
class Snapshot:
    model_id: str
    epoch: int
    layer: int
    matrix: np.ndarray  # [probe_count, unit_count]
    stress: StressLevel = StressLevel.NONE
    probe_id: str = ""
    meta: dict = field(default_factory=dict)

    def flat(self) -> np.ndarray:
        return np.ascontiguousarray(self.matrix).reshape(-1)

    def to_dict(self) -> dict:
        return {"model_id": self.model_id, "epoch": self.epoch, "layer": self.layer,
                "stress": StressLevel(self.stress).value, "probe_id": self.probe_id,
                "shape": list(self.matrix.shape), "matrix": self.matrix.tolist(), "meta": self.meta}

    @classmethod
    def from_dict(cls, doc: dict) -> "Snapshot":
        shape = tuple(doc.get("shape") or (len(doc["matrix"]), -1))
        matrix = np.array(doc["matrix"], dtype=np.float64).reshape(shape)
        return cls(doc["model_id"], int(doc["epoch"]), int(doc["layer"]), matrix,
                   StressLevel(doc.get("stress", "none")), doc.get("probe_id", ""), doc.get("meta", {}))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "Snapshot":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def capture_snapshot(net: Network, probe, layer: int, *, model_id: str = "", epoch: int = 0,
                     stress: StressLevel = StressLevel.NONE, meta: dict | None = None) -> Snapshot:
    """Post-activation values of head layer 1 or 2 on the probe set."""
    if layer not in (1, 2):
        raise UsageError(f"snapshot layer must be 1 or 2, got {layer}")
    probe = np.asarray(probe, dtype=np.float64).reshape(-1, net.d_in)
    _, cache = forward(net, probe)
    return Snapshot(model_id, epoch, layer, cache.post[layer - 1].copy(), StressLevel(stress),
                    probe_fingerprint(probe), dict(meta or {}))


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size or x.size < 2:
        raise InsufficientDataError("pearson needs two vectors of equal length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.dot(dx, dx))
    sy = np.sqrt(np.dot(dy, dy))
    if sx == 0 or sy == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant vector")
    r = np.dot(dx, dy) / (sx * sy)
    return float(min(1.0, max(-1.0, r)))


def _check_comparable(snaps) -> None:
    if not snaps:
        return
    ref = snaps[0]
    for s in snaps[1:]:
        if s.layer != ref.layer or s.probe_id != ref.probe_id or s.matrix.shape != ref.matrix.shape:
            raise ComparabilityError(
                f"snapshots {ref.model_id!r} and {s.model_id!r} differ in layer, probe set or shape")


def similarity_matrix(snaps: list[Snapshot], undefined: str = "raise") -> np.ndarray:
    """Pairwise Pearson r of flattened snapshots.

    A constant snapshot has no defined correlation: ``undefined="raise"``
    propagates the error, ``"nan"`` stores NaN for its off-diagonal entries.
    """
    _check_comparable(snaps)
    n = len(snaps)
    flats = [s.flat() for s in snaps]
    out = np.eye(n)
    for i, j in combinations(range(n), 2):
        try:
            r = pearson(flats[i], flats[j])
        except UndefinedCorrelationError:
            if undefined != "nan":
                raise
            r = np.nan
        out[i, j] = out[j, i] = r
    return out


@dataclass
class Ordination:
    coords: np.ndarray  # [n, dims]
    explained: np.ndarray  # [dims], fraction of total variance
    axes: np.ndarray  # [dims, features]


def pca_ordinate(snaps, dims: int = 2) -> Ordination:
    """Project mean-centred flattened snapshots (or raw row vectors) on the top principal axes.

    Axis signs are fixed so the largest-magnitude loading is positive.
    """
    if len(snaps) and isinstance(snaps[0], Snapshot):
        _check_comparable(snaps)
        data = np.stack([s.flat() for s in snaps])
    else:
        data = np.asarray(snaps, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise InsufficientDataError("ordination needs at least two snapshots")
    centred = data - data.mean(axis=0)
    _, sv, vt = np.linalg.svd(centred, full_matrices=False)
    var = sv**2
    total = var.sum()
    dims = min(dims, vt.shape[0])
    axes = vt[:dims].copy()
    for k in range(dims):
        if axes[k, np.argmax(np.abs(axes[k]))] < 0:
            axes[k] = -axes[k]
    explained = var[:dims] / total if total > 0 else np.zeros(dims)
    return Ordination(centred @ axes.T, explained, axes)


@dataclass
class AkpReport:
    happy: list
    unhappy: list
    happy_mean_r: float | None
    unhappy_mean_r: float | None
    gap: float | None
    threshold: float
    undefined_pairs: int = 0

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "happy": self.happy, "unhappy": self.unhappy,
                "happy_mean_r": self.happy_mean_r, "unhappy_mean_r": self.unhappy_mean_r, "gap": self.gap,
                "undefined_pairs": self.undefined_pairs}


def _mean_pairwise(snaps) -> tuple[float | None, int]:
    # pairs involving a constant snapshot are left out and counted
    if len(snaps) < 2:
        return None, 0
    m = similarity_matrix(snaps, undefined="nan")
    vals = m[np.triu_indices(len(snaps), 1)]
    ok = vals[~np.isnan(vals)]
    return (float(np.mean(ok)) if ok.size else None), int(vals.size - ok.size)


def akp_report(runs, happy_threshold: float = 0.75) -> AkpReport:
    """Split runs at ``happy_threshold`` (accuracy >= threshold is happy) and compare intra-family similarity."""
    runs = list(runs)
    if not runs:
        raise InsufficientDataError("akp_report needs at least one run")
    _check_comparable([s for s, _ in runs])
    happy = [(s, a) for s, a in runs if a >= happy_threshold]
    unhappy = [(s, a) for s, a in runs if a < happy_threshold]
    h, h_bad = _mean_pairwise([s for s, _ in happy])
    u, u_bad = _mean_pairwise([s for s, _ in unhappy])
    gap = h - u if h is not None and u is not None else None
    return AkpReport(sorted(s.model_id for s, _ in happy), sorted(s.model_id for s, _ in unhappy), h, u, gap,
                     happy_threshold, h_bad + u_bad)


def final_snapshots(snaps: list[Snapshot], layer: int) -> list[Snapshot]:
    """Latest-epoch snapshot of ``layer`` per model, ordered by model id."""
    best: dict[str, Snapshot] = {}
    for s in snaps:
        if s.layer != layer:
            continue
        if s.model_id not in best or s.epoch > best[s.model_id].epoch:
            best[s.model_id] = s
    return [best[k] for k in sorted(best)]

