"""Shared helpers for training-loop tests: toy task, fake sources, scripts."""
from __future__ import annotations

import json
import sys
from pathlib import Path

from cgsplit.augment import ParaphraseSet
from cgsplit.corpus import SplitTriple, dataset_from_rows
from cgsplit.openset import OpenTaskConfig, make_open_task


class FakeParaphraseSource:
    """Offline source: '<text> alt<i>' paraphrases, counts its calls."""

    def __init__(self):
        self.calls = []

    def paraphrases_for(self, instances, k):
        self.calls.append([u.id for u in instances])
        return [
            ParaphraseSet(
                source_id=u.id,
                source_text=u.text,
                paraphrases=tuple(f"{u.text} alt{i}" for i in range(1, k + 1)),
                model="fake",
                prompt_version="v1",
            )
            for u in instances
        ]


def toy_triple() -> SplitTriple:
    return SplitTriple(
        train=dataset_from_rows(
            "train",
            [
                ("check my account balance", "balance"),
                ("what is the balance now", "balance"),
                ("my card was swallowed by the atm", "card_swallowed"),
                ("the machine kept my card", "card_swallowed"),
                ("i lost my phone yesterday", "lost_phone"),
                ("someone stole my phone", "lost_phone"),
            ],
        ),
        dev=dataset_from_rows(
            "dev",
            [
                ("balance please", "balance"),
                ("card stuck in atm", "card_swallowed"),
                ("phone is gone", "lost_phone"),
            ],
        ),
        test=dataset_from_rows(
            "test",
            [
                ("show me the balance", "balance"),
                ("atm ate my card", "card_swallowed"),
                ("my phone was stolen", "lost_phone"),
                ("how do i apply for a loan", "loan"),
            ],
        ),
    )


def toy_task():
    return make_open_task(toy_triple(), OpenTaskConfig(known_ratio=1.0, seed=0))


def scripted_cmd(tmp_path: Path, rounds: list[dict]) -> list[str]:
    tmp_path.mkdir(parents=True, exist_ok=True)
    script = tmp_path / "script.json"
    script.write_text(json.dumps({"rounds": rounds}), encoding="utf-8")
    return [sys.executable, "-m", "cgsplit.trainers", "scripted", "--script", str(script)]
