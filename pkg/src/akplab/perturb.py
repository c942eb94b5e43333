"""Hot-swap schedules for hidden activations and the training loss.

Epochs are 0-indexed. A swap listed at epoch ``e`` takes effect at the start
of pass ``e`` (so "epoch three" is the start of the fourth pass). Between
swaps the schedule cycles through ``sequence``; from the last swap epoch on
it holds ``final_value``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

from .errors import PolicyError
from .network import ActivationKind, LossKind, Network

DEFAULT_SWAP_EPOCHS = (3, 6, 9, 12, 15, 18, 21)


class SwapTarget(str, enum.Enum):
    ACTIVATION = "activation"
    LOSS = "loss"


@dataclass(frozen=True)
class SwapPolicy:
    target: SwapTarget
    sequence: tuple
    swap_epochs: tuple = DEFAULT_SWAP_EPOCHS
    final_value: object = None  # defaults to sequence[-1]

    def __post_init__(self):
        target = SwapTarget(self.target)
        parse = ActivationKind.parse if target is SwapTarget.ACTIVATION else LossKind.parse
        try:
            seq = tuple(parse(v) for v in self.sequence)
            final = parse(self.final_value) if self.final_value is not None else (seq[-1] if seq else None)
        except ValueError as exc:
            raise PolicyError(str(exc)) from None
        if not seq:
            raise PolicyError("swap sequence must be non-empty")
        epochs = tuple(int(e) for e in self.swap_epochs)
        if any(e < 0 for e in epochs) or any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise PolicyError(f"swap epochs must be non-negative and strictly increasing: {epochs}")
        if target is SwapTarget.ACTIVATION and ActivationKind.SOFTMAX in seq + (final,):
            raise PolicyError("softmax cannot be swapped into the hidden layers")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "sequence", seq)
        object.__setattr__(self, "swap_epochs", epochs)
        object.__setattr__(self, "final_value", final)

    @classmethod
    def default_activation(cls) -> "SwapPolicy":
        return cls(SwapTarget.ACTIVATION, (ActivationKind.TANH, ActivationKind.SOFTPLUS, ActivationKind.RELU))

    @classmethod
    def default_loss(cls) -> "SwapPolicy":
        return cls(SwapTarget.LOSS, (LossKind.POISSON, LossKind.KL_DIVERGENCE, LossKind.SPARSE_CATEGORICAL_CE))

    @classmethod
    def from_dict(cls, target, doc: dict) -> "SwapPolicy":
        return cls(target, tuple(doc["sequence"]), tuple(doc.get("swap_epochs", DEFAULT_SWAP_EPOCHS)),
                   doc.get("final_value"))

    def to_dict(self) -> dict:
        return {"sequence": [v.value for v in self.sequence], "swap_epochs": list(self.swap_epochs),
                "final_value": self.final_value.value}

    @property
    def last_epoch(self) -> int:
        return self.swap_epochs[-1] if self.swap_epochs else 0


def active_value_at(policy: SwapPolicy, epoch: int):
    if epoch < 0:
        raise PolicyError("epoch must be >= 0")
    if not policy.swap_epochs:
        return policy.sequence[0]
    if epoch >= policy.swap_epochs[-1]:
        return policy.final_value
    k = sum(1 for e in policy.swap_epochs if e <= epoch)
    return policy.sequence[k % len(policy.sequence)]


@dataclass
class LossSlot:
    kind: LossKind = LossKind.BINARY_CE


@dataclass(frozen=True)
class SwapEvent:
    epoch: int
    target: str
    old: str
    new: str


def apply_swap(net: Network, loss_slot: LossSlot | None, policy: SwapPolicy, epoch: int) -> SwapEvent | None:
    """Apply the policy at the start of ``epoch``; returns the event on a swap epoch.

    Only the two hidden activation slots or the loss slot change; weights,
    optimizer state and RNG streams are untouched.
    """
    if epoch not in policy.swap_epochs:
        return None
    new = active_value_at(policy, epoch)
    if policy.target is SwapTarget.ACTIVATION:
        if new is ActivationKind.SOFTMAX:
            raise PolicyError("softmax cannot be assigned to hidden layers")
        old = net.layers[0].activation
        net.set_hidden_activation(new)
    else:
        if loss_slot is None:
            raise PolicyError("loss policy needs a loss slot")
        old = loss_slot.kind
        loss_slot.kind = new
    return SwapEvent(epoch, policy.target.value, old.value, new.value)


def write_events_csv(path, events) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "target", "old", "new"])
        for ev in events:
            w.writerow([ev.epoch, ev.target, ev.old, ev.new])


def read_events_csv(path) -> list[SwapEvent]:
    with open(path, newline="") as fh:
        return [SwapEvent(int(r["epoch"]), r["target"], r["old"], r["new"]) for r in csv.DictReader(fh)]
