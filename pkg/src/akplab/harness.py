"""Experiment configuration, single training runs and the group runner.

Every trial owns its PRNG streams, network and optimizer state, so trials
can run in any order or in parallel and still reproduce bit-identically from
(resolved config, seed).

Output layout under ``out_root``::

    <group>/summary.json
    <group>/trial_000/run.json, curves.csv, events.csv, checkpoint.json, snapshots/*.json
"""

from __future__ import annotations

import hashlib
import json
import logging
import secrets
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import permutations
from pathlib import Path

import numpy as np

from . import optim
from .core_math import Prng, derive_seed, initializer_to_dict, parse_initializer
from .data_io import Dataset, SynthSpec, load_image_dir, split, synth_generate
from .errors import AkpError, ConfigError
from .metrics import CurvePoint, RunRecord, accuracy, aggregate, confusion, write_curves_csv
from .network import (ActivationKind, LossKind, build_network, checkpoint_dict, forward_features, backward,
                      predict_from_probs, sample_losses)
from .perturb import LossSlot, SwapPolicy, SwapTarget, active_value_at, apply_swap, write_events_csv
from .repsim import Snapshot, akp_report, capture_snapshot, final_snapshots, stress_level

log = logging.getLogger(__name__)

GROUP_C_INITIALIZERS = ["zeros", "glorot_normal", "he_uniform", {"kind": "truncated_normal", "mean": 0.0, "std": 0.5}]

_GROUP_DEFAULTS = {
    "A": {"epochs": 30, "trials": 5, "seed": {"policy": "fixed", "value": 7}},
    "B": {"epochs": 30, "trials": 5, "seed": {"policy": "random"}},
    "C": {"epochs": 100, "trials": 4, "seed": {"policy": "fixed", "value": 7},
          "initializers": GROUP_C_INITIALIZERS},
}


@dataclass
class ExperimentConfig:
    group: str = "custom"
    name: str = ""
    optimizer: dict = field(default_factory=lambda: {"kind": "rmsprop", "lr": 0.001, "rho": 0.9, "eps": 1e-7})
    activation_policy: dict | None = field(default_factory=lambda: SwapPolicy.default_activation().to_dict())
    loss_policy: dict | None = None
    default_loss: str = "binary_ce"
    hidden_activation: str = "tanh"
    epochs: int = 30
    trials: int = 5
    seed: dict = field(default_factory=lambda: {"policy": "fixed", "value": 7})
    first_layer_init: object = "glorot_normal"
    initializers: list | None = None
    trial_variation: str = "none"
    data: dict = field(default_factory=lambda: {"source": "synth"})
    split: list = field(default_factory=lambda: [0.7, 0.15, 0.15])
    split_seed: int = 11
    extractor_seed: int = 101
    init_seed: int | None = None
    d_feat: int = 128
    head_widths: list = field(default_factory=lambda: [64, 32])
    batch_size: int = 16
    probe_count: int = 64
    probe_seed: int = 5
    snapshot_layer: int = 2
    happy_threshold: float = 0.75

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        group = str(doc.get("group", "custom"))
        if group.upper() in _GROUP_DEFAULTS:
            group = group.upper()
            for k, v in _GROUP_DEFAULTS[group].items():
                doc.setdefault(k, v)
        doc["group"] = group
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("activation_policy", "loss_policy"):
            if doc.get(key) == "default":
                pol = SwapPolicy.default_activation() if key == "activation_policy" else SwapPolicy.default_loss()
                doc[key] = pol.to_dict()
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def label(self) -> str:
        return self.name or self.group

    def policies(self) -> tuple[SwapPolicy | None, SwapPolicy | None]:
        try:
            act = SwapPolicy.from_dict(SwapTarget.ACTIVATION, self.activation_policy) if self.activation_policy else None
            loss = SwapPolicy.from_dict(SwapTarget.LOSS, self.loss_policy) if self.loss_policy else None
        except (AkpError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad swap policy: {exc}") from None
        return act, loss

    @property
    def perturbation(self) -> str:
        act, loss = self.policies()
        return "+".join(n for n, p in (("activation", act), ("loss", loss)) if p is not None) or "none"

    def trial_initializer(self, trial: int):
        spec = self.initializers[trial] if self.initializers else self.first_layer_init
        return parse_initializer(spec)

    def validate(self) -> None:
        if self.epochs < 1 or self.trials < 1 or self.batch_size < 1:
            raise ConfigError("epochs, trials and batch_size must be >= 1")
        act, loss = self.policies()
        for pol in (act, loss):
            if pol is not None and pol.swap_epochs and self.epochs < pol.swap_epochs[-1]:
                raise ConfigError(f"schedule violation: {self.epochs} epochs but a swap is scheduled at epoch "
                                  f"{pol.swap_epochs[-1]}")
        if self.initializers is not None and len(self.initializers) != self.trials:
            raise ConfigError(f"{self.trials} trials but {len(self.initializers)} initializers")
        try:
            for t in range(self.trials):
                self.trial_initializer(t)
            optim.make_optimizer(self.optimizer)
            ActivationKind.parse(self.hidden_activation)
            LossKind.parse(self.default_loss)
        except (AkpError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        policy = self.seed.get("policy")
        if policy == "fixed" and not isinstance(self.seed.get("value"), int):
            raise ConfigError("fixed seed policy needs an integer 'value'")
        if policy == "list" and len(self.seed.get("values", [])) < self.trials:
            raise ConfigError("seed list shorter than the trial count")
        if policy not in ("fixed", "random", "list"):
            raise ConfigError(f"unknown seed policy {policy!r}")
        if self.trial_variation not in ("none", "permute_policy"):
            raise ConfigError(f"unknown trial_variation {self.trial_variation!r}")
        if self.data.get("source", "synth") not in ("synth", "dir"):
            raise ConfigError(f"unknown data source {self.data.get('source')!r}")
        if self.snapshot_layer not in (1, 2):
            raise ConfigError("snapshot_layer must be 1 or 2")
        if len(self.split) != 3 or abs(sum(self.split) - 1) > 1e-9 or min(self.split) < 0:
            raise ConfigError("split must be three non-negative fractions summing to 1")


def resolve_seeds(cfg: ExperimentConfig) -> list[int]:
    """One seed per trial; random seeds are drawn from OS entropy once and recorded."""
    policy = cfg.seed["policy"]
    if policy == "fixed":
        return [int(cfg.seed["value"])] * cfg.trials
    if policy == "list":
        return [int(v) for v in cfg.seed["values"][:cfg.trials]]
    return [secrets.randbits(63) for _ in range(cfg.trials)]


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    data = dict(cfg.data)
    source = data.pop("source", "synth")
    if source == "dir":
        return load_image_dir(data["path"])
    try:
        return synth_generate(SynthSpec(**data))
    except TypeError as exc:
        raise ConfigError(f"bad synthetic data spec: {exc}") from None


def choose_probe(val: Dataset, test: Dataset, count: int, seed: int) -> np.ndarray:
    """Fixed held-out probe inputs (drawn from validation and test samples)."""
    pool = np.concatenate([val.flat(), test.flat()])
    order = Prng(seed).permutation(len(pool))
    return pool[np.sort(order[:count])]


def _trial_policy(policy: SwapPolicy | None, cfg: ExperimentConfig, trial: int) -> SwapPolicy | None:
    if policy is None or cfg.trial_variation == "none":
        return policy
    orders = list(permutations(policy.sequence))
    seq = orders[trial % len(orders)]
    return SwapPolicy(policy.target, seq, policy.swap_epochs, policy.final_value)


@dataclass
class TrialResult:
    record: RunRecord
    snapshots: list
    checkpoint: dict
    config: dict


def _evaluate(net, feats, labels, loss_kind) -> tuple[float, float, np.ndarray]:
    probs, _ = forward_features(net, feats)
    loss_val = float(np.mean(sample_losses(loss_kind, probs, labels))) if len(labels) else 0.0
    preds = predict_from_probs(probs)
    acc = accuracy(preds, labels) if len(labels) else 0.0
    return acc, loss_val, preds


def train_one(cfg: ExperimentConfig, trial: int = 0, seed: int | None = None) -> TrialResult:
    if seed is None:
        seed = resolve_seeds(cfg)[trial] if cfg.seed["policy"] != "random" else secrets.randbits(63)
    act_policy, loss_policy = (_trial_policy(p, cfg, trial) for p in cfg.policies())
    ds = load_dataset(cfg)
    train, val, test = split(ds, cfg.split, cfg.split_seed)
    probe = choose_probe(val, test, cfg.probe_count, cfg.probe_seed)

    init = cfg.trial_initializer(trial)
    initial_act = active_value_at(act_policy, 0) if act_policy else ActivationKind.parse(cfg.hidden_activation)
    head_seed = derive_seed(seed if cfg.init_seed is None else cfg.init_seed, 1)
    net = build_network(ds.flat().shape[1], cfg.d_feat, tuple(cfg.head_widths), extractor_seed=cfg.extractor_seed,
                        head_seed=head_seed, first_layer_init=init, hidden_activation=initial_act)
    slot = LossSlot(active_value_at(loss_policy, 0) if loss_policy else LossKind.parse(cfg.default_loss))
    opt = optim.make_optimizer(cfg.optimizer)
    shuffle_rng = Prng(derive_seed(seed, 2))

    # the extractor is frozen, so its outputs are computed once
    f_train, f_val, f_test = (net.extract(d.flat()) for d in (train, val, test))
    stress = stress_level(act_policy, loss_policy)
    model_id = f"{cfg.label}-t{trial:03d}"
    snap_meta = {"group": cfg.group, "trial": trial, "seed": seed, "config_hash": cfg.fingerprint(),
                 "initializer": init.name}
    snap_epochs = set()
    for pol in (act_policy, loss_policy):
        if pol is not None:
            snap_epochs.update(pol.swap_epochs)

    record = RunRecord(config_hash=cfg.fingerprint(), seed=seed, group=cfg.group, trial=trial,
                       optimizer=optim.optimizer_dict(opt)["kind"], perturbation=cfg.perturbation,
                       initializer=init.name)
    snapshots = []
    extractor_before = net.extractor.copy()
    try:
        for epoch in range(cfg.epochs):
            for pol in (act_policy, loss_policy):
                if pol is not None:
                    ev = apply_swap(net, slot, pol, epoch)
                    if ev is not None:
                        record.events.append(ev)
            assert net.layers[2].activation is ActivationKind.SOFTMAX

            order = shuffle_rng.permutation(len(train))
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                _, cache = forward_features(net, f_train[idx])
                grads = backward(net, cache, train.labels[idx], slot.kind)
                flat = [g for pair in grads for g in pair]
                net.set_params(optim.step(opt, net.params(), flat))

            train_acc, train_loss, _ = _evaluate(net, f_train, train.labels, slot.kind)
            val_acc, val_loss, _ = _evaluate(net, f_val, val.labels, slot.kind)
            if not (np.isfinite(train_loss) and np.isfinite(val_loss)
                    and all(np.all(np.isfinite(p)) for p in net.params())):
                raise FloatingPointError(f"non-finite loss or weights at epoch {epoch}")
            record.curves.append(CurvePoint(epoch, train_acc, val_acc, train_loss, val_loss))

            if epoch in snap_epochs or epoch == cfg.epochs - 1:
                for layer in (1, 2):
                    snapshots.append(capture_snapshot(net, probe, layer, model_id=model_id, epoch=epoch,
                                                      stress=stress, meta=snap_meta))
    except (FloatingPointError, AkpError) as exc:
        record.status = "failed"
        record.error = str(exc)
        log.warning("trial %d failed: %s", trial, exc)

    assert np.array_equal(extractor_before, net.extractor)
    if record.status == "ok":
        test_acc, _, preds = _evaluate(net, f_test, test.labels, slot.kind)
        record.test_accuracy = test_acc
        record.confusion = {c: confusion(preds, test.labels, c) for c in (0, 1)}
        for s in snapshots:
            s.meta["test_accuracy"] = test_acc

    meta = {"seed": seed, "config_hash": cfg.fingerprint(), "trial": trial, "epochs": cfg.epochs,
            "optimizer": optim.optimizer_dict(opt), "initializer": initializer_to_dict(init)}
    return TrialResult(record, snapshots, checkpoint_dict(net, meta), cfg.to_dict())


def trial_dir(out_root, cfg: ExperimentConfig, trial: int) -> Path:
    return Path(out_root) / cfg.label / f"trial_{trial:03d}"


def write_trial(result: TrialResult, directory) -> Path:
    d = Path(directory)
    (d / "snapshots").mkdir(parents=True, exist_ok=True)
    run = result.record.to_dict()
    run["config"] = result.config
    with open(d / "run.json", "w") as fh:
        json.dump(run, fh, indent=1, sort_keys=True)
    write_curves_csv(d / "curves.csv", result.record.curves)
    write_events_csv(d / "events.csv", result.record.events)
    with open(d / "checkpoint.json", "w") as fh:
        json.dump(result.checkpoint, fh)
    for s in result.snapshots:
        s.save(d / "snapshots" / f"epoch{s.epoch:03d}_layer{s.layer}.json")
    return d


def _train_job(args):
    cfg_doc, trial, seed = args
    return train_one(ExperimentConfig.from_dict(cfg_doc), trial, seed)


@dataclass
class GroupResult:
    results: list
    summary: dict


def run_group(cfg: ExperimentConfig, out_root=None, parallel: int = 1) -> GroupResult:
    seeds = resolve_seeds(cfg)
    jobs = [(cfg.to_dict(), t, seeds[t]) for t in range(cfg.trials)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_train_job, jobs))
    else:
        results = [_train_job(j) for j in jobs]

    records = [r.record for r in results]
    summary = {"group": cfg.group, "name": cfg.label, "perturbation": cfg.perturbation,
               "optimizer": records[0].optimizer, "config_hash": cfg.fingerprint(),
               "seeds": [r.seed for r in records],
               "failed_trials": [r.trial for r in records if r.status != "ok"]}
    try:
        summary.update(aggregate(records).to_dict())
    except AkpError as exc:
        summary["aggregate_error"] = str(exc)
    finals = final_snapshots([s for r in results if r.record.status == "ok" for s in r.snapshots],
                             cfg.snapshot_layer)
    if finals:
        summary["akp"] = akp_report([(s, s.meta["test_accuracy"]) for s in finals], cfg.happy_threshold).to_dict()

    if out_root is not None:
        for r in results:
            write_trial(r, trial_dir(out_root, cfg, r.record.trial))
        with open(Path(out_root) / cfg.label / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
    return GroupResult(results, summary)


def load_runs(root) -> list[RunRecord]:
    out = []
    for path in sorted(Path(root).rglob("run.json")):
        with open(path) as fh:
            doc = json.load(fh)
        doc.pop("config", None)
        out.append(RunRecord.from_dict(doc))
    return out


def load_snapshots(root) -> list[Snapshot]:
    """Every snapshot document under ``root`` (other JSON files are skipped)."""
    out = []
    for path in sorted(Path(root).rglob("*.json")):
        if path.name in ("run.json", "checkpoint.json", "summary.json"):
            continue
        with open(path) as fh:
            doc = json.load(fh)
        if isinstance(doc, dict) and "matrix" in doc and "model_id" in doc:
            out.append(Snapshot.from_dict(doc))
    return out
