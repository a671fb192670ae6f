"""Build a compositionally-diverse split from a corpus with planted overlap.

A synthetic intent corpus gets ten train sentences copied into the test set
with light edits -- exactly the cross-split leakage the pruning pipeline is
meant to remove.  After pruning, re-scoring the survivors finds nothing
above the threshold.
"""
import random

from cgsplit import CgJob, PruneConfig, RougeConfig, SplitTriple, construct_cg_split
from cgsplit.corpus import dataset_from_rows, intent_histogram
from cgsplit.rouge import pairwise_scores

rng = random.Random(7)
VOCAB = [f"word{i}" for i in range(300)]
INTENTS = ["billing", "delivery", "returns"]


def sentence() -> str:
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(7, 13)))


train_rows = [(sentence(), rng.choice(INTENTS)) for _ in range(80)]
test_rows = [(sentence(), rng.choice(INTENTS)) for _ in range(40)]
dev_rows = [(sentence(), rng.choice(INTENTS)) for _ in range(20)]

# plant ten near-duplicates: copy a train sentence, swap ~25% of its tokens
for i in range(10):
    tokens = train_rows[i][0].split()
    for pos in rng.sample(range(len(tokens)), max(1, len(tokens) // 4)):
        tokens[pos] = rng.choice(VOCAB)
    test_rows[i] = (" ".join(tokens), test_rows[i][1])

triple = SplitTriple(
    train=dataset_from_rows("train", train_rows),
    dev=dataset_from_rows("dev", dev_rows),
    test=dataset_from_rows("test", test_rows),
)

job = CgJob(
    input=triple,
    rouge=RougeConfig(threshold=0.3),
    prune=PruneConfig(stop_rule="all_edges_removed"),
)
result = construct_cg_split(job)

print("input sizes:  ", {t: len(d) for t, d in zip(("train", "dev", "test"), triple.datasets())})
print("output sizes: ", {t: len(d) for t, d in zip(("train", "dev", "test"), result.output.datasets())})
print("pruned:       ", {t: len(ids) for t, ids in result.report.pruned_by_split().items()})
print("iterations:   ", result.report.iterations)
print("edges:        ", result.report.edges_initial, "->", result.report.edges_final)
print("train intents:", intent_histogram(result.output.train))

survivors = list(result.output.dev.utterances) + list(result.output.test.utterances)
leftover = pairwise_scores(result.output.train, survivors, job.rouge)
print("pairs above threshold after pruning:", len(leftover))
assert leftover == []
