"""Known-intent sampling, open-set task construction, and evaluation metrics.

The sampler is pinned to SplitMix64 + Fisher-Yates so that any language can
reproduce identical known-intent sets from (labels, ratio, seed).  Metrics
follow the open-set convention: macro-F1 over known classes (F1-IND), F1 of
the single open class (F1-OOD), macro-F1 over all classes including open
(F1-All), and overall accuracy (Acc-All), all reported as percentages with
two decimals, rounding half up.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

from .corpus import LabeledDataset, LabeledUtterance, SplitTriple

OPEN_LABEL = "oos"

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 PRNG with the standard constants; 64-bit state."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


@dataclass(frozen=True)
class OpenTaskConfig:
    known_ratio: float
    seed: int

    def __post_init__(self) -> None:
        if not (0.0 < self.known_ratio <= 1.0):
            raise ValueError(f"known_ratio must be in (0, 1], got {self.known_ratio}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class OpenTask:
    known_intents: frozenset[str]
    train: LabeledDataset
    dev: LabeledDataset
    test: LabeledDataset
    open_label: str = OPEN_LABEL


@dataclass(frozen=True)
class Metrics:
    f1_ind: float
    f1_ood: float
    f1_all: float
    acc_all: float

    def to_dict(self) -> dict[str, float]:
        return {
            "f1_ind": self.f1_ind,
            "f1_ood": self.f1_ood,
            "f1_all": self.f1_all,
            "acc_all": self.acc_all,
        }


@dataclass(frozen=True)
class RunAggregate:
    per_seed: tuple[Metrics, ...]
    mean: Metrics


def _round2(value: Decimal | float) -> float:
    if not isinstance(value, Decimal):
        value = Decimal(str(value))
    return float(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def known_count(n_labels: int, known_ratio: float) -> int:
    """Number of known intents: ratio times label count, half rounded up, floor 1."""
    k = int(
        (Decimal(str(known_ratio)) * n_labels).quantize(Decimal("1"), rounding=ROUND_HALF_UP)
    )
    return max(1, k)


def sample_known_intents(intents: Iterable[str], config: OpenTaskConfig) -> frozenset[str]:
    """Pick the known-intent subset for one seed.

    Labels are sorted by code point, shuffled with Fisher-Yates (descending
    index i, partner ``next_random mod (i+1)``) driven by SplitMix64, and the
    first k are taken.  Bit-identical across platforms.
    """
    labels = sorted(set(intents))
    if not labels:
        raise ValueError("cannot sample known intents from an empty label set")
    k = known_count(len(labels), config.known_ratio)
    rng = SplitMix64(config.seed)
    for i in range(len(labels) - 1, 0, -1):
        j = rng.next() % (i + 1)
        labels[i], labels[j] = labels[j], labels[i]
    return frozenset(labels[:k])


def make_open_task(split: SplitTriple, config: OpenTaskConfig) -> OpenTask:
    """Build the open-set task: known-only train/dev, test relabeled to `oos`.

    The sampling inventory is the training split's intent set (minus a
    pre-existing open label, which can never be "known").  Train and dev
    drop instances of unknown intents; test keeps every instance, with
    unknown labels rewritten to the open label.
    """
    inventory = split.train.intents - {OPEN_LABEL}
    if not inventory:
        raise ValueError("training split has no intents to sample from")
    known = sample_known_intents(inventory, config)

    def filtered(ds: LabeledDataset) -> LabeledDataset:
        kept = tuple(u for u in ds.utterances if u.intent in known)
        return LabeledDataset(name=ds.name, split_tag=ds.split_tag, utterances=kept)

    relabeled = tuple(
        u if u.intent in known else LabeledUtterance(id=u.id, text=u.text, intent=OPEN_LABEL)
        for u in split.test.utterances
    )
    test = LabeledDataset(name=split.test.name, split_tag="test", utterances=relabeled)
    return OpenTask(known_intents=known, train=filtered(split.train), dev=filtered(split.dev), test=test)


def compute_metrics(gold: Sequence[str], pred: Sequence[str], known: Iterable[str]) -> Metrics:
    """Four-score evaluation over aligned gold/predicted label lists.

    Per-class F1 is one-vs-rest with F1 = 0 when precision + recall = 0;
    classes absent from both gold and pred still count toward macro means.
    """
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} labels but pred has {len(pred)}")
    if not gold:
        raise ValueError("cannot score an empty label list")
    known_set = frozenset(known) - {OPEN_LABEL}
    allowed = known_set | {OPEN_LABEL}
    for label in set(gold) | set(pred):
        if label not in allowed:
            raise ValueError(f"label {label!r} is neither a known intent nor {OPEN_LABEL!r}")

    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}
    correct = 0
    for g, p in zip(gold, pred):
        if g == p:
            correct += 1
            tp[g] = tp.get(g, 0) + 1
        else:
            fp[p] = fp.get(p, 0) + 1
            fn[g] = fn.get(g, 0) + 1

    def f1(label: str) -> float:
        t, false_p, false_n = tp.get(label, 0), fp.get(label, 0), fn.get(label, 0)
        denom = 2 * t + false_p + false_n
        if denom == 0:
            return 0.0
        return 2 * t / denom

    known_sorted = sorted(known_set)
    f1_known = [f1(label) for label in known_sorted]
    f1_ood = f1(OPEN_LABEL)
    f1_all = f1_known + [f1_ood]
    return Metrics(
        f1_ind=_round2(100.0 * sum(f1_known) / len(f1_known)) if f1_known else 0.0,
        f1_ood=_round2(100.0 * f1_ood),
        f1_all=_round2(100.0 * sum(f1_all) / len(f1_all)),
        acc_all=_round2(100.0 * correct / len(gold)),
    )


def aggregate_runs(per_seed: Sequence[Metrics]) -> RunAggregate:
    """Per-field arithmetic mean of multi-seed runs, two decimals, half up."""
    if not per_seed:
        raise ValueError("cannot aggregate an empty run list")
    n = len(per_seed)

    def mean(values: Iterable[float]) -> float:
        total = sum((Decimal(str(v)) for v in values), Decimal(0))
        return _round2(total / n)

    return RunAggregate(
        per_seed=tuple(per_seed),
        mean=Metrics(
            f1_ind=mean(m.f1_ind for m in per_seed),
            f1_ood=mean(m.f1_ood for m in per_seed),
            f1_all=mean(m.f1_all for m in per_seed),
            acc_all=mean(m.acc_all for m in per_seed),
        ),
    )
