"""External trainer: TF-IDF + SGD classifier with open-set rejection.

Speaks the orchestrator's wire protocol on stdin/stdout -- newline-delimited
JSON, strictly one reply per request:

    {"cmd": "init", "config": {...}}   -> {"ok": true}
    {"cmd": "train", "train_path": p}  -> {"ok": true}
    {"cmd": "eval", "split": s}        -> {"acc_all": x, "predictions": [[id, label], ...]}

Datasets arrive as ``text<TAB>label`` TSV files; instance ids are positional
(``<split>:NNNNN``).  Any error produces a single ``{"fatal": ...}`` reply
followed by a nonzero exit.  The adapter depends only on the wire protocol
and the file formats, not on the orchestrator's code.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.linear_model import SGDClassifier


@dataclass(frozen=True)
class AdapterConfig:
    model: str = "tfidf_sgd"
    epochs: int = 5
    threshold: float = 0.6
    device: str = "cpu"  # hint only; this model is CPU-bound anyway

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must be in (0, 1)")

    @classmethod
    def from_file(cls, path: str | Path) -> "AdapterConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {"model", "epochs", "threshold", "device"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown adapter config keys: {sorted(unknown)}")
        return cls(**doc)


def load_dataset(path: str | Path, split: str) -> tuple[list[str], list[str], list[str]]:
    """Read a labeled TSV; returns (positional ids, texts, labels)."""
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != "text\tlabel":
        raise ValueError(f"{path}: expected header 'text<TAB>label'")
    ids, texts, labels = [], [], []
    for row, raw in enumerate(lines[1:]):
        fields = raw.rstrip("\r").split("\t")
        if len(fields) != 2:
            raise ValueError(f"{path}: line {row + 2}: expected 2 fields")
        ids.append(f"{split}:{row:05d}")
        texts.append(fields[0])
        labels.append(fields[1])
    return ids, texts, labels


class OpenSetClassifier:
    """TF-IDF features, SGD log-loss fit for a fixed number of epochs,
    and rejection to the open label when max class probability is low."""

    def __init__(self, config: AdapterConfig, open_label: str) -> None:
        self.config = config
        self.open_label = open_label
        self.vectorizer: TfidfVectorizer | None = None
        self.classifier: SGDClassifier | None = None
        self.single_class: str | None = None

    def fit(self, texts: list[str], labels: list[str]) -> None:
        self.vectorizer = TfidfVectorizer(
            lowercase=True, ngram_range=(1, 2), token_pattern=r"(?u)\b\w+\b"
        )
        features = self.vectorizer.fit_transform(texts)
        classes = np.unique(labels)
        if len(classes) == 1:
            self.single_class = str(classes[0])
            self.classifier = None
            return
        self.single_class = None
        labels_arr = np.asarray(labels)
        clf = SGDClassifier(loss="log_loss", alpha=1e-4, random_state=0)
        rng = np.random.default_rng(0)
        for _ in range(self.config.epochs):
            order = rng.permutation(features.shape[0])
            clf.partial_fit(features[order], labels_arr[order], classes=classes)
        self.classifier = clf

    def predict(self, texts: list[str]) -> list[str]:
        if self.vectorizer is None:
            raise RuntimeError("eval requested before train")
        if self.single_class is not None:
            return [self.single_class] * len(texts)
        assert self.classifier is not None
        probabilities = self.classifier.predict_proba(self.vectorizer.transform(texts))
        best = probabilities.argmax(axis=1)
        out = []
        for row, col in enumerate(best):
            if probabilities[row, col] < self.config.threshold:
                out.append(self.open_label)
            else:
                out.append(str(self.classifier.classes_[col]))
        return out


class Adapter:
    def __init__(self, config: AdapterConfig) -> None:
        self.config = config
        self.task: dict | None = None
        self.model: OpenSetClassifier | None = None
        self.splits: dict[str, tuple[list[str], list[str], list[str]]] = {}

    def handle(self, request: dict) -> dict:
        cmd = request.get("cmd")
        if cmd == "init":
            self.task = request.get("config", {})
            for split in ("dev", "test"):
                path = self.task.get(f"{split}_path")
                if path is None:
                    raise ValueError(f"init config is missing {split}_path")
                self.splits[split] = load_dataset(path, split)
            return {"ok": True}
        if self.task is None:
            raise RuntimeError("first request must be init")
        if cmd == "train":
            ids, texts, labels = load_dataset(request["train_path"], "train")
            self.splits["train"] = (ids, texts, labels)
            model = OpenSetClassifier(self.config, self.task.get("open_label", "oos"))
            model.fit(texts, labels)
            self.model = model
            return {"ok": True}
        if cmd == "eval":
            if self.model is None:
                raise RuntimeError("eval requested before train")
            split = request["split"]
            if split not in self.splits:
                raise ValueError(f"unknown eval split {split!r}")
            ids, texts, labels = self.splits[split]
            predicted = self.model.predict(texts)
            correct = sum(1 for p, g in zip(predicted, labels) if p == g)
            acc = round(100.0 * correct / len(labels), 2) if labels else 0.0
            return {"acc_all": acc, "predictions": [[i, p] for i, p in zip(ids, predicted)]}
        raise ValueError(f"unknown command {cmd!r}")


def serve_protocol(config: AdapterConfig, stdin=None, stdout=None) -> int:
    """Run the request loop; returns the process exit status."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    adapter = Adapter(config)
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
            reply = adapter.handle(request)
        except Exception as exc:  # one fatal reply, then nonzero exit
            stdout.write(json.dumps({"fatal": str(exc)}) + "\n")
            stdout.flush()
            return 1
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
    return 0
