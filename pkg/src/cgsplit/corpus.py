"""Intent-labeled datasets, their train/dev/test splits, and TSV I/O.

Datasets are immutable after construction and safe to share across threads.
The on-disk format is a 2-column TSV with the header ``text<TAB>label``,
UTF-8, ``\\n`` line endings on output (``\\r\\n`` accepted on input).
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

SPLIT_TAGS = ("train", "dev", "test")

TSV_HEADER = "text\tlabel"


class TsvFormatError(ValueError):
    """Raised for malformed TSV input or unwritable dataset content."""


def _check_split_tag(split_tag: str) -> None:
    if split_tag not in SPLIT_TAGS:
        raise ValueError(f"unknown split tag {split_tag!r}; expected one of {SPLIT_TAGS}")


@dataclass(frozen=True, slots=True)
class LabeledUtterance:
    """One text instance with its intent label and a stable positional id."""

    id: str
    text: str
    intent: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"utterance {self.id!r}: text is empty after trimming")
        if not self.intent:
            raise ValueError(f"utterance {self.id!r}: intent is empty")


@dataclass(frozen=True)
class LabeledDataset:
    """An ordered collection of labeled utterances for one split."""

    name: str
    split_tag: str
    utterances: tuple[LabeledUtterance, ...]

    def __post_init__(self) -> None:
        _check_split_tag(self.split_tag)
        seen: set[str] = set()
        for utt in self.utterances:
            if utt.id in seen:
                raise ValueError(f"duplicate utterance id {utt.id!r} in dataset {self.name!r}")
            seen.add(utt.id)

    @property
    def intents(self) -> frozenset[str]:
        return frozenset(u.intent for u in self.utterances)

    def __len__(self) -> int:
        return len(self.utterances)

    def by_id(self) -> dict[str, LabeledUtterance]:
        return {u.id: u for u in self.utterances}


@dataclass(frozen=True)
class SplitTriple:
    """A train/dev/test bundle with globally unique instance ids."""

    train: LabeledDataset
    dev: LabeledDataset
    test: LabeledDataset

    def __post_init__(self) -> None:
        for expected, ds in zip(SPLIT_TAGS, (self.train, self.dev, self.test)):
            if ds.split_tag != expected:
                raise ValueError(
                    f"dataset {ds.name!r} has split tag {ds.split_tag!r}, expected {expected!r}"
                )
        ids: set[str] = set()
        for ds in (self.train, self.dev, self.test):
            for utt in ds.utterances:
                if utt.id in ids:
                    raise ValueError(f"instance id {utt.id!r} occurs in more than one split")
                ids.add(utt.id)

    def datasets(self) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
        return (self.train, self.dev, self.test)


def make_id(split_tag: str, row: int) -> str:
    """Positional instance id: split tag plus zero-based row index."""
    return f"{split_tag}:{row:05d}"


def dataset_from_rows(
    split_tag: str, rows: list[tuple[str, str]], name: str | None = None
) -> LabeledDataset:
    """Build a dataset from (text, intent) rows, assigning positional ids."""
    _check_split_tag(split_tag)
    utterances = tuple(
        LabeledUtterance(id=make_id(split_tag, i), text=text, intent=intent)
        for i, (text, intent) in enumerate(rows)
    )
    return LabeledDataset(name=name or split_tag, split_tag=split_tag, utterances=utterances)


def load_tsv(source: bytes | io.IOBase, split_tag: str, name: str | None = None) -> LabeledDataset:
    """Read a ``text<TAB>label`` TSV byte stream into a dataset.

    Ids are assigned sequentially in file order, so loading the same bytes
    twice yields identical ids.
    """
    _check_split_tag(split_tag)
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
        if isinstance(data, str):
            raise TypeError("load_tsv expects a byte stream, got text")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TsvFormatError(f"input is not valid UTF-8: {exc}") from exc

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TsvFormatError("line 1: missing header; expected 'text<TAB>label'")
    header = lines[0].rstrip("\r")
    if header != TSV_HEADER:
        raise TsvFormatError(f"line 1: bad header {header!r}; expected 'text<TAB>label'")

    rows: list[tuple[str, str]] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r")
        fields = line.split("\t")
        if len(fields) != 2:
            raise TsvFormatError(f"line {lineno}: expected 2 tab-separated fields, got {len(fields)}")
        utt_text, label = fields
        if not utt_text.strip():
            raise TsvFormatError(f"line {lineno}: empty text field")
        if not label:
            raise TsvFormatError(f"line {lineno}: empty label field")
        rows.append((utt_text, label))
    return dataset_from_rows(split_tag, rows, name=name)


def write_tsv(dataset: LabeledDataset) -> bytes:
    """Serialize a dataset to TSV bytes; deterministic byte-for-byte."""
    parts = [TSV_HEADER, "\n"]
    for utt in dataset.utterances:
        for ch, label in (("\t", "TAB"), ("\r", "CR"), ("\n", "LF")):
            if ch in utt.text or ch in utt.intent:
                raise TsvFormatError(f"utterance {utt.id!r} contains a {label}; not representable in TSV")
        parts.append(f"{utt.text}\t{utt.intent}\n")
    return "".join(parts).encode("utf-8")


def intent_histogram(dataset: LabeledDataset) -> dict[str, int]:
    """Per-intent instance counts, keyed in sorted label order."""
    counts: dict[str, int] = {}
    for utt in dataset.utterances:
        counts[utt.intent] = counts.get(utt.intent, 0) + 1
    return dict(sorted(counts.items()))
