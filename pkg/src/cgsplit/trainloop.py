"""Trainer wire protocol and the iterative augmentation training loop.

The orchestrator talks to an external trainer process over newline-delimited
JSON on its standard streams.  Requests:

    {"cmd": "init", "config": {...}}
    {"cmd": "train", "train_path": "..."}
    {"cmd": "eval", "split": "dev"}          # also "test", and "train"
                                             # (train-set predictions drive
                                             # the wrong-prediction strategy)

Replies, strictly one line per request:

    {"ok": true}
    {"acc_all": 64.25, "predictions": [["dev:00001", "pending_top_up"], ...]}
    {"fatal": "..."}

Datasets cross the boundary as TSV files; both sides derive instance ids
positionally from the file (row i of split s is ``s:NNNNN``), so prediction
ids always refer to rows of the file named in the request.
"""
from __future__ import annotations

import json
import logging
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .augment import (
    AugStrategy,
    ParaphraseSource,
    WRONG_PRED,
    augment_dataset,
    select_wrong_predictions,
)
from .corpus import LabeledDataset, LabeledUtterance, make_id, write_tsv
from .openset import Metrics, OpenTask, compute_metrics
from .rouge import LCS_OVER_MAX, RougeConfig, rouge_l, tokenize

logger = logging.getLogger(__name__)

# One non-improving dev round ends the loop.
PATIENCE = 1

EVAL_SPLITS = ("train", "dev", "test")


class ProtocolError(RuntimeError):
    """The other side violated the wire protocol."""


class TrainerFailure(RuntimeError):
    """The trainer reported fatal or died."""


@dataclass(frozen=True)
class InitMsg:
    config: dict


@dataclass(frozen=True)
class TrainMsg:
    train_path: str


@dataclass(frozen=True)
class EvalMsg:
    split: str

    def __post_init__(self) -> None:
        if self.split not in EVAL_SPLITS:
            raise ValueError(f"unknown eval split {self.split!r}")


@dataclass(frozen=True)
class OkReply:
    pass


@dataclass(frozen=True)
class EvalResultReply:
    acc_all: float
    predictions: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class FatalReply:
    message: str


TrainerMsg = InitMsg | TrainMsg | EvalMsg | OkReply | EvalResultReply | FatalReply


def encode_message(msg: TrainerMsg) -> str:
    """Serialize a message to its single JSON line (with trailing newline)."""
    if isinstance(msg, InitMsg):
        doc: dict = {"cmd": "init", "config": msg.config}
    elif isinstance(msg, TrainMsg):
        doc = {"cmd": "train", "train_path": msg.train_path}
    elif isinstance(msg, EvalMsg):
        doc = {"cmd": "eval", "split": msg.split}
    elif isinstance(msg, OkReply):
        doc = {"ok": True}
    elif isinstance(msg, EvalResultReply):
        doc = {"acc_all": msg.acc_all, "predictions": [list(p) for p in msg.predictions]}
    elif isinstance(msg, FatalReply):
        doc = {"fatal": msg.message}
    else:
        raise TypeError(f"not a trainer message: {msg!r}")
    return json.dumps(doc, ensure_ascii=False) + "\n"


def decode_message(line: str) -> TrainerMsg:
    """Parse one protocol line; unknown fields are ignored."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON line: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProtocolError(f"expected a JSON object, got {type(doc).__name__}")
    if "cmd" in doc:
        cmd = doc["cmd"]
        if cmd == "init":
            return InitMsg(config=doc.get("config", {}))
        if cmd == "train":
            return TrainMsg(train_path=doc["train_path"])
        if cmd == "eval":
            return EvalMsg(split=doc["split"])
        raise ProtocolError(f"unknown command tag {cmd!r}")
    if doc.get("ok") is True:
        return OkReply()
    if "acc_all" in doc:
        preds = tuple((str(i), str(lbl)) for i, lbl in doc.get("predictions", []))
        return EvalResultReply(acc_all=float(doc["acc_all"]), predictions=preds)
    if "fatal" in doc:
        return FatalReply(message=str(doc["fatal"]))
    raise ProtocolError(f"unrecognizable message: {line.strip()!r}")


def protocol_roundtrip(msg: TrainerMsg) -> TrainerMsg:
    """Encode to one JSON line and decode back."""
    return decode_message(encode_message(msg))


class TrainerProcess:
    """A child process speaking the trainer protocol on stdin/stdout."""

    def __init__(self, cmd: str | Sequence[str], cwd: str | Path | None = None) -> None:
        argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            cwd=cwd,
            text=True,
            bufsize=1,
        )

    def request(self, msg: TrainerMsg) -> TrainerMsg:
        assert self._proc.stdin is not None and self._proc.stdout is not None
        try:
            self._proc.stdin.write(encode_message(msg))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TrainerFailure(f"trainer process is gone: {exc}") from exc
        line = self._proc.stdout.readline()
        if line == "":
            raise TrainerFailure("trainer closed its stdout (process exit?)")
        reply = decode_message(line)
        if isinstance(reply, FatalReply):
            raise TrainerFailure(f"trainer reported fatal: {reply.message}")
        return reply

    def close(self) -> int:
        if self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            return self._proc.wait(timeout=30)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            return self._proc.wait()

    def __enter__(self) -> "TrainerProcess":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


@dataclass(frozen=True)
class LoopConfig:
    strategy: AugStrategy
    max_rounds: int = 10

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass
class RoundState:
    round: int
    train_path: str
    dev_acc_history: list[float] = field(default_factory=list)
    best_round: int = 0
    best_acc: float = float("-inf")


@dataclass(frozen=True)
class LoopResult:
    state: RoundState
    test_metrics: Metrics
    stop_reason: str
    log_path: str


def _positional_ids(split_tag: str, n: int) -> list[str]:
    return [make_id(split_tag, i) for i in range(n)]


def _predictions_in_row_order(
    reply: EvalResultReply, split_tag: str, n: int, round_no: int
) -> list[str]:
    expected = _positional_ids(split_tag, n)
    got = {i: lbl for i, lbl in reply.predictions}
    if len(got) != len(reply.predictions) or set(got) != set(expected):
        raise ProtocolError(
            f"round {round_no}: eval predictions do not cover split {split_tag!r} exactly "
            f"({len(reply.predictions)} predictions for {n} instances)"
        )
    return [got[i] for i in expected]


def _expect(reply: TrainerMsg, kind: type, round_no: int) -> TrainerMsg:
    if not isinstance(reply, kind):
        raise ProtocolError(f"round {round_no}: expected {kind.__name__}, got {type(reply).__name__}")
    return reply


def _base_source_id(instance_id: str) -> str:
    return instance_id.split("#p", 1)[0]


def run_loop(
    task: OpenTask,
    config: LoopConfig,
    trainer: TrainerProcess,
    paraphrases: ParaphraseSource,
    workdir: str | Path,
) -> LoopResult:
    """Drive train/eval rounds until dev accuracy stops improving.

    Round 1 trains on the strategy's starting set (fully augmented for
    ``full``, the plain training set for ``wrong_pred``); later
    ``wrong_pred`` rounds cumulatively add paraphrases for training
    instances the trainer got wrong in the previous round.  Test metrics
    are computed from the trainer's test predictions taken immediately
    after each new best dev round, so the reported numbers belong to the
    best model state.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    (workdir / "dev.tsv").write_bytes(write_tsv(task.dev))
    (workdir / "test.tsv").write_bytes(write_tsv(task.test))
    known_sorted = sorted(task.known_intents)
    (workdir / "known_labels.json").write_text(json.dumps(known_sorted, indent=2), encoding="utf-8")

    test_gold = [u.intent for u in task.test.utterances]

    reply = trainer.request(
        InitMsg(
            config={
                "dev_path": str(workdir / "dev.tsv"),
                "test_path": str(workdir / "test.tsv"),
                "known_labels": known_sorted,
                "open_label": task.open_label,
            }
        )
    )
    _expect(reply, OkReply, 0)

    base = task.train
    base_by_id = base.by_id()
    if config.strategy.kind == WRONG_PRED:
        current = base
    else:
        sets = paraphrases.paraphrases_for(base.utterances, config.strategy.k)
        current = augment_dataset(base, sets)
    augmented_sources: set[str] = set() if config.strategy.kind == WRONG_PRED else set(base_by_id)

    state = RoundState(round=0, train_path="")
    best_test_metrics: Metrics | None = None
    stop_reason = ""
    log_rounds: list[dict] = []

    round_no = 0
    while True:
        round_no += 1
        state.round = round_no
        round_dir = workdir / f"round_{round_no}"
        round_dir.mkdir(exist_ok=True)
        train_path = round_dir / "train.tsv"
        train_path.write_bytes(write_tsv(current))
        state.train_path = str(train_path)
        row_instances = list(current.utterances)

        _expect(trainer.request(TrainMsg(train_path=str(train_path))), OkReply, round_no)

        dev_reply = _expect(trainer.request(EvalMsg("dev")), EvalResultReply, round_no)
        dev_pred = _predictions_in_row_order(dev_reply, "dev", len(task.dev), round_no)
        with open(round_dir / "dev_predictions.tsv", "w", encoding="utf-8") as fh:
            fh.write("id\tlabel\n")
            for i, label in enumerate(dev_pred):
                fh.write(f"{make_id('dev', i)}\t{label}\n")

        acc = dev_reply.acc_all
        state.dev_acc_history.append(acc)
        improved = acc > state.best_acc
        added = 0

        if improved:
            state.best_round = round_no
            state.best_acc = acc
            test_reply = _expect(trainer.request(EvalMsg("test")), EvalResultReply, round_no)
            test_pred = _predictions_in_row_order(test_reply, "test", len(task.test), round_no)
            best_test_metrics = compute_metrics(test_gold, test_pred, task.known_intents)

        if not improved:
            stop_reason = "no_improvement"
        elif round_no >= config.max_rounds:
            stop_reason = "max_rounds"

        if not stop_reason and config.strategy.kind == WRONG_PRED:
            train_reply = _expect(trainer.request(EvalMsg("train")), EvalResultReply, round_no)
            row_pred = _predictions_in_row_order(train_reply, "train", len(row_instances), round_no)
            row_gold = [u.intent for u in row_instances]
            row_ids = _positional_ids("train", len(row_instances))
            wrong_rows = [
                int(rid.split(":")[1])
                for rid in select_wrong_predictions(row_gold, row_pred, row_ids)
            ]
            targets: list[LabeledUtterance] = []
            seen: set[str] = set()
            for row in wrong_rows:
                source_id = _base_source_id(row_instances[row].id)
                if source_id in augmented_sources or source_id in seen:
                    continue
                seen.add(source_id)
                targets.append(base_by_id[source_id])
            if targets:
                sets = paraphrases.paraphrases_for(targets, config.strategy.k)
                current = augment_dataset(current, sets)
                augmented_sources.update(seen)
                added = len(targets)

        log_rounds.append(
            {
                "round": round_no,
                "train_path": str(train_path),
                "train_size": len(row_instances),
                "dev_acc": acc,
                "improved": improved,
                "sources_augmented": added,
            }
        )
        if stop_reason:
            break

    assert best_test_metrics is not None  # round 1 always improves over -inf
    log = {
        "strategy": config.strategy.kind,
        "k": config.strategy.k,
        "max_rounds": config.max_rounds,
        "patience": PATIENCE,
        "rounds": log_rounds,
        "best_round": state.best_round,
        "best_acc": state.best_acc,
        "stop_reason": stop_reason,
        "test_metrics": best_test_metrics.to_dict(),
    }
    log_path = workdir / "loop_log.json"
    log_path.write_text(json.dumps(log, indent=2, sort_keys=True), encoding="utf-8")
    return LoopResult(
        state=state, test_metrics=best_test_metrics, stop_reason=stop_reason, log_path=str(log_path)
    )


def heuristic_trainer(
    train: LabeledDataset, threshold: float, open_label: str = "oos"
) -> Callable[[str, str], str]:
    """Desk-scale stand-in for a real model: nearest neighbour by Rouge-L.

    The returned predictor answers with the intent of the most similar
    training utterance, or the open label when the best similarity falls
    below ``threshold``.  Ties break on the lexicographically smallest
    instance id.
    """
    if len(train) == 0:
        raise ValueError("heuristic trainer needs a non-empty training set")
    cfg = RougeConfig(variant=LCS_OVER_MAX)
    corpus = sorted(
        ((u.id, tokenize(u.text), u.intent) for u in train.utterances), key=lambda t: t[0]
    )

    def predict(query_id: str, text: str) -> str:
        query = tokenize(text)
        best_score = -1.0
        best_intent = open_label
        for _, tokens, intent in corpus:
            if not tokens and not query:
                continue  # rouge is undefined when both sides are empty
            score = rouge_l(query, tokens, cfg)
            if score > best_score:
                best_score = score
                best_intent = intent
        if best_score < threshold:
            return open_label
        return best_intent

    return predict
