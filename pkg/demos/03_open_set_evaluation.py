"""Known-intent sampling, open-set relabeling, and the four-score metrics.

Ten seeds sample different known subsets; a toy predictor that answers with
the majority known label shows how F1-IND / F1-OOD / F1-All / Acc-All react,
and the per-seed runs aggregate into a mean row.
"""
import random
from collections import Counter

from cgsplit import (
    OpenTaskConfig,
    aggregate_runs,
    compute_metrics,
    make_open_task,
    sample_known_intents,
)
from cgsplit.corpus import SplitTriple, dataset_from_rows

rng = random.Random(3)
INTENTS = [f"intent_{chr(ord('a') + i)}" for i in range(8)]


def rows(n):
    return [(" ".join(rng.choice("abcdefgh") for _ in range(6)), rng.choice(INTENTS)) for _ in range(n)]


triple = SplitTriple(
    train=dataset_from_rows("train", rows(120)),
    dev=dataset_from_rows("dev", rows(30)),
    test=dataset_from_rows("test", rows(60)),
)

print("intent inventory:", sorted(triple.train.intents))
for seed in range(3):
    known = sample_known_intents(triple.train.intents, OpenTaskConfig(known_ratio=0.5, seed=seed))
    print(f"seed {seed}: known = {sorted(known)}")

per_seed = []
for seed in range(10):
    task = make_open_task(triple, OpenTaskConfig(known_ratio=0.5, seed=seed))
    majority = Counter(u.intent for u in task.train.utterances).most_common(1)[0][0]
    gold = [u.intent for u in task.test.utterances]
    pred = [majority] * len(gold)
    per_seed.append(compute_metrics(gold, pred, task.known_intents))

agg = aggregate_runs(per_seed)
print("\nmajority-class predictor across 10 seeds (F1-IND / F1-OOD / F1-All / Acc-All):")
for seed, m in enumerate(agg.per_seed):
    print(f"  seed {seed}: {m.f1_ind:6.2f} {m.f1_ood:6.2f} {m.f1_all:6.2f} {m.acc_all:6.2f}")
m = agg.mean
print(f"  mean  : {m.f1_ind:6.2f} {m.f1_ood:6.2f} {m.f1_all:6.2f} {m.acc_all:6.2f}")
