"""The full iterative loop against the built-in nearest-neighbour trainer.

The orchestrator spawns the trainer as a subprocess and talks newline-
delimited JSON: train on round_<n>/train.tsv, eval dev, keep going while
dev accuracy improves.  Paraphrases come from an offline source here, so
the demo runs without any endpoint.
"""
import sys
import tempfile
from pathlib import Path

from cgsplit import (
    AugStrategy,
    LoopConfig,
    OpenTaskConfig,
    ParaphraseSet,
    TrainerProcess,
    make_open_task,
    run_loop,
)
from cgsplit.corpus import SplitTriple, dataset_from_rows


class WordDropSource:
    """Offline paraphrases: drop one word per variant (cyclically)."""

    def paraphrases_for(self, instances, k):
        out = []
        for utt in instances:
            words = utt.text.split()
            variants = []
            for i in range(k):
                kept = [w for j, w in enumerate(words) if j != i % len(words)]
                variants.append(" ".join(kept) or words[0])
            out.append(
                ParaphraseSet(
                    source_id=utt.id,
                    source_text=utt.text,
                    paraphrases=tuple(variants),
                    model="word-drop",
                    prompt_version="demo",
                )
            )
        return out


triple = SplitTriple(
    train=dataset_from_rows(
        "train",
        [
            ("check my account balance", "balance"),
            ("what is the balance right now", "balance"),
            ("show me how much money i have", "balance"),
            ("my card was swallowed by the atm", "card_swallowed"),
            ("the cash machine kept my card", "card_swallowed"),
            ("atm took my card and will not return it", "card_swallowed"),
            ("i lost my phone yesterday", "lost_phone"),
            ("someone stole my phone on the bus", "lost_phone"),
        ],
    ),
    dev=dataset_from_rows(
        "dev",
        [
            ("what is my balance", "balance"),
            ("card stuck inside the atm", "card_swallowed"),
            ("my phone is gone", "lost_phone"),
        ],
    ),
    test=dataset_from_rows(
        "test",
        [
            ("how much money is in my account", "balance"),
            ("the atm ate my card", "card_swallowed"),
            ("phone got stolen", "lost_phone"),
            ("i want to apply for a mortgage", "mortgage"),
        ],
    ),
)

task = make_open_task(triple, OpenTaskConfig(known_ratio=1.0, seed=0))
print("known intents:", sorted(task.known_intents))
print("test labels after relabeling:", sorted({u.intent for u in task.test.utterances}))

trainer_cmd = [sys.executable, "-m", "cgsplit.trainers", "heuristic", "--threshold", "0.35"]
with tempfile.TemporaryDirectory() as tmp:
    with TrainerProcess(trainer_cmd) as trainer:
        result = run_loop(
            task,
            LoopConfig(strategy=AugStrategy.full(3), max_rounds=4),
            trainer,
            WordDropSource(),
            Path(tmp) / "loop",
        )
    print("\ndev accuracy by round:", result.state.dev_acc_history)
    print("best round:", result.state.best_round, "| stop reason:", result.stop_reason)
    m = result.test_metrics
    print(f"test metrics of the best round: F1-IND {m.f1_ind}  F1-OOD {m.f1_ood}  "
          f"F1-All {m.f1_all}  Acc-All {m.acc_all}")
