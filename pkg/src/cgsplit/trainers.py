"""Built-in trainers speaking the wire protocol on stdin/stdout.

Two desk-scale trainers ship with the toolkit:

* ``scripted`` replays a JSON script (per-round dev accuracies, optional
  wrong-prediction markers) -- the deterministic harness for loop tests.
* ``heuristic`` is a nearest-neighbour Rouge-L predictor with an open-set
  threshold -- a cheap stand-in for a real model.

Run as ``python -m cgsplit.trainers {scripted,heuristic} ...``.  Any error
produces a single ``{"fatal": ...}`` reply and a nonzero exit.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import LabeledDataset, load_tsv
from .trainloop import (
    EvalMsg,
    EvalResultReply,
    FatalReply,
    InitMsg,
    OkReply,
    TrainMsg,
    decode_message,
    encode_message,
    heuristic_trainer,
)


class _Fatal(Exception):
    pass


class _TrainerBase:
    """Shared request loop: init once, train before eval, one reply per line."""

    def __init__(self) -> None:
        self.config: dict | None = None
        self.train_set: LabeledDataset | None = None
        self.dev_set: LabeledDataset | None = None
        self.test_set: LabeledDataset | None = None
        self.train_count = 0

    def handle_init(self, config: dict) -> None:
        self.config = config
        self.dev_set = load_tsv(Path(config["dev_path"]).read_bytes(), "dev")
        self.test_set = load_tsv(Path(config["test_path"]).read_bytes(), "test")

    def handle_train(self, train_path: str) -> None:
        self.train_set = load_tsv(Path(train_path).read_bytes(), "train")
        self.train_count += 1
        self.fit()

    def fit(self) -> None:
        raise NotImplementedError

    def predictions(self, split: str) -> list[tuple[str, str]]:
        raise NotImplementedError

    def acc_all(self, split: str) -> float:
        dataset = self.split_set(split)
        preds = dict(self.predictions(split))
        correct = sum(1 for u in dataset.utterances if preds[u.id] == u.intent)
        return round(100.0 * correct / len(dataset), 2)

    def split_set(self, split: str) -> LabeledDataset:
        dataset = {"train": self.train_set, "dev": self.dev_set, "test": self.test_set}[split]
        if dataset is None:
            raise _Fatal(f"eval requested for {split!r} before the data is available")
        return dataset

    def handle(self, msg) -> object:
        if isinstance(msg, InitMsg):
            self.handle_init(msg.config)
            return OkReply()
        if self.config is None:
            raise _Fatal("first request must be init")
        if isinstance(msg, TrainMsg):
            self.handle_train(msg.train_path)
            return OkReply()
        if isinstance(msg, EvalMsg):
            if self.train_set is None:
                raise _Fatal("eval requested before train")
            return EvalResultReply(
                acc_all=self.acc_all(msg.split),
                predictions=tuple(self.predictions(msg.split)),
            )
        raise _Fatal(f"unexpected message {type(msg).__name__}")

    def serve(self, stdin=None, stdout=None) -> int:
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        for line in stdin:
            if not line.strip():
                continue
            try:
                reply = self.handle(decode_message(line))
            except Exception as exc:  # single fatal reply, then nonzero exit
                stdout.write(encode_message(FatalReply(message=str(exc))))
                stdout.flush()
                return 1
            stdout.write(encode_message(reply))
            stdout.flush()
        return 0


class ScriptedTrainer(_TrainerBase):
    """Replays scripted dev accuracies; predicts gold except marked-wrong rows.

    Script format::

        {"rounds": [{"dev_acc": 60.0,
                     "wrong_train_texts": ["..."],   # optional
                     "wrong_train_rows": [0, 3]},    # optional
                    ...]}

    Dev/test predictions are the gold labels (so test metrics are exact);
    the reported dev accuracy is the scripted value.  Train-set evals mark
    the configured rows/texts wrong, which drives the wrong-prediction
    augmentation strategy deterministically.
    """

    def __init__(self, script: dict) -> None:
        super().__init__()
        self.rounds = script["rounds"]

    def fit(self) -> None:
        if self.train_count > len(self.rounds):
            raise _Fatal(f"script has {len(self.rounds)} rounds; train #{self.train_count} requested")

    def _round(self) -> dict:
        return self.rounds[self.train_count - 1]

    def _wrong_label(self, gold: str) -> str:
        open_label = (self.config or {}).get("open_label", "oos")
        if gold != open_label:
            return open_label
        known = (self.config or {}).get("known_labels") or ["__wrong__"]
        return known[0]

    def predictions(self, split: str) -> list[tuple[str, str]]:
        dataset = self.split_set(split)
        if split != "train":
            return [(u.id, u.intent) for u in dataset.utterances]
        spec = self._round()
        wrong_rows = set(spec.get("wrong_train_rows", []))
        wrong_texts = set(spec.get("wrong_train_texts", []))
        out = []
        for row, u in enumerate(dataset.utterances):
            if row in wrong_rows or u.text in wrong_texts:
                out.append((u.id, self._wrong_label(u.intent)))
            else:
                out.append((u.id, u.intent))
        return out

    def acc_all(self, split: str) -> float:
        if split == "dev":
            return float(self._round()["dev_acc"])
        return super().acc_all(split)


class HeuristicTrainer(_TrainerBase):
    """Nearest-neighbour Rouge-L trainer with an open-set threshold."""

    def __init__(self, threshold: float) -> None:
        super().__init__()
        self.threshold = threshold
        self._predict = None

    def fit(self) -> None:
        open_label = (self.config or {}).get("open_label", "oos")
        assert self.train_set is not None
        self._predict = heuristic_trainer(self.train_set, self.threshold, open_label)

    def predictions(self, split: str) -> list[tuple[str, str]]:
        dataset = self.split_set(split)
        assert self._predict is not None
        return [(u.id, self._predict(u.id, u.text)) for u in dataset.utterances]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="cgsplit.trainers", description=__doc__)
    sub = parser.add_subparsers(dest="trainer", required=True)
    scripted = sub.add_parser("scripted", help="replay a JSON script of rounds")
    scripted.add_argument("--script", required=True, help="path to the script JSON")
    heuristic = sub.add_parser("heuristic", help="nearest-neighbour Rouge-L trainer")
    heuristic.add_argument("--threshold", type=float, default=0.4, help="open-set score threshold")
    args = parser.parse_args(argv)

    if args.trainer == "scripted":
        trainer: _TrainerBase = ScriptedTrainer(json.loads(Path(args.script).read_text(encoding="utf-8")))
    else:
        trainer = HeuristicTrainer(threshold=args.threshold)
    return trainer.serve()


if __name__ == "__main__":
    sys.exit(main())
