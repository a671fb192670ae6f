"""Protocol-conformance checks for trainer implementations.

Any trainer -- the built-in mocks or an external adapter in another
ecosystem -- must pass the same checks: well-formed replies, strictly one
reply per request, prediction ids covering the requested split exactly,
and a single fatal reply followed by a nonzero exit on error.  The checks
drive the trainer purely over its stdin/stdout wire protocol.
"""
from __future__ import annotations

import json
import subprocess
from pathlib import Path
from typing import Sequence

from .corpus import LabeledDataset, make_id, write_tsv
from .trainloop import (
    EvalMsg,
    EvalResultReply,
    FatalReply,
    InitMsg,
    OkReply,
    TrainMsg,
    TrainerProcess,
    decode_message,
    encode_message,
)


class ConformanceError(AssertionError):
    pass


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConformanceError(message)


def write_task_files(
    workdir: Path,
    train: LabeledDataset,
    dev: LabeledDataset,
    test: LabeledDataset,
    known_labels: Sequence[str],
    open_label: str = "oos",
) -> dict:
    """Write the task TSVs and return the init config for them."""
    workdir.mkdir(parents=True, exist_ok=True)
    (workdir / "train.tsv").write_bytes(write_tsv(train))
    (workdir / "dev.tsv").write_bytes(write_tsv(dev))
    (workdir / "test.tsv").write_bytes(write_tsv(test))
    (workdir / "known_labels.json").write_text(json.dumps(sorted(known_labels)), encoding="utf-8")
    return {
        "dev_path": str(workdir / "dev.tsv"),
        "test_path": str(workdir / "test.tsv"),
        "known_labels": sorted(known_labels),
        "open_label": open_label,
    }


def _check_eval_result(reply, split: str, size: int, allowed_labels: set[str]) -> None:
    _require(isinstance(reply, EvalResultReply), f"eval {split}: expected an eval_result reply")
    _require(0.0 <= reply.acc_all <= 100.0, f"eval {split}: acc_all {reply.acc_all} out of [0, 100]")
    expected = {make_id(split, i) for i in range(size)}
    got = [i for i, _ in reply.predictions]
    _require(len(got) == len(set(got)), f"eval {split}: duplicate prediction ids")
    _require(set(got) == expected, f"eval {split}: prediction ids do not cover the split exactly")
    labels = {lbl for _, lbl in reply.predictions}
    _require(
        labels <= allowed_labels,
        f"eval {split}: predicted labels outside known+open: {sorted(labels - allowed_labels)}",
    )


def _expect_fatal_then_exit(cmd: Sequence[str], lines: list[str], cwd: Path | None = None) -> None:
    proc = subprocess.Popen(
        list(cmd),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        cwd=cwd,
        text=True,
        bufsize=1,
    )
    assert proc.stdin is not None and proc.stdout is not None
    reply = None
    for line in lines:
        proc.stdin.write(line if line.endswith("\n") else line + "\n")
        proc.stdin.flush()
        out = proc.stdout.readline()
        _require(out != "", "trainer closed stdout without replying")
        reply = decode_message(out)
        if isinstance(reply, FatalReply):
            break
    _require(isinstance(reply, FatalReply), f"expected a fatal reply, got {reply!r}")
    proc.stdin.close()
    code = proc.wait(timeout=60)
    _require(code != 0, f"trainer exited {code} after a fatal reply; expected nonzero")


def run_conformance_suite(
    cmd: Sequence[str],
    workdir: Path,
    train: LabeledDataset,
    dev: LabeledDataset,
    test: LabeledDataset,
    known_labels: Sequence[str],
    open_label: str = "oos",
) -> None:
    """Run the full conformance suite against a trainer command line.

    Raises ConformanceError on the first violation; returns None when the
    trainer conforms.
    """
    config = write_task_files(workdir, train, dev, test, known_labels, open_label)
    allowed = set(known_labels) | {open_label}
    train_path = str(workdir / "train.tsv")

    # happy path: init, train, eval dev, eval test, clean EOF shutdown
    proc = TrainerProcess(cmd)
    try:
        _require(isinstance(proc.request(InitMsg(config=config)), OkReply), "init: expected ok")
        _require(isinstance(proc.request(TrainMsg(train_path=train_path)), OkReply), "train: expected ok")
        _check_eval_result(proc.request(EvalMsg("dev")), "dev", len(dev), allowed)
        _check_eval_result(proc.request(EvalMsg("test")), "test", len(test), allowed)
    finally:
        code = proc.close()
    _require(code == 0, f"trainer exited {code} after clean EOF; expected 0")

    # eval before train must be fatal
    _expect_fatal_then_exit(
        cmd,
        [
            encode_message(InitMsg(config=config)),
            encode_message(EvalMsg("dev")),
        ],
    )

    # malformed request line must be fatal
    _expect_fatal_then_exit(cmd, ["this is not json"])
