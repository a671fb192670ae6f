import random

import pytest

from cgsplit.corpus import (
    LabeledDataset,
    LabeledUtterance,
    SplitTriple,
    TsvFormatError,
    dataset_from_rows,
    intent_histogram,
    load_tsv,
    write_tsv,
)

from corpora import random_triple


def test_load_header_only():
    ds = load_tsv(b"text\tlabel\n", "train")
    assert len(ds) == 0
    assert ds.intents == frozenset()


def test_load_single_row():
    ds = load_tsv(b"text\tlabel\ni have a pending top-up\tpending_top_up\n", "train")
    assert len(ds) == 1
    utt = ds.utterances[0]
    assert utt.id == "train:00000"
    assert utt.text == "i have a pending top-up"
    assert utt.intent == "pending_top_up"


def test_load_crlf_input():
    ds = load_tsv(b"text\tlabel\r\nhello there\tgreeting\r\n", "dev")
    assert ds.utterances[0].text == "hello there"
    assert ds.utterances[0].id == "dev:00000"


def test_load_rejects_bad_header():
    with pytest.raises(TsvFormatError, match="line 1"):
        load_tsv(b"utterance\tintent\nfoo\tbar\n", "train")
    with pytest.raises(TsvFormatError, match="line 1"):
        load_tsv(b"", "train")


def test_load_rejects_bad_field_count():
    with pytest.raises(TsvFormatError, match="line 3"):
        load_tsv(b"text\tlabel\nok\ta\nbroken line\n", "train")
    with pytest.raises(TsvFormatError, match="line 2"):
        load_tsv(b"text\tlabel\na\tb\tc\n", "train")


def test_load_rejects_empty_text():
    with pytest.raises(TsvFormatError, match="line 2.*empty text"):
        load_tsv(b"text\tlabel\n \tsome_label\n", "train")


def test_round_trip_three_rows():
    ds = dataset_from_rows(
        "test",
        [("what is my balance", "balance"), ("lost my card", "lost_card"), ("hi", "greeting")],
    )
    again = load_tsv(write_tsv(ds), "test", name=ds.name)
    assert again == ds


def test_round_trip_random_datasets():
    rng = random.Random(13)
    triple = random_triple(rng, 40, 10, 10)
    for ds in triple.datasets():
        assert load_tsv(write_tsv(ds), ds.split_tag, name=ds.name) == ds


def test_write_empty_dataset():
    ds = dataset_from_rows("train", [])
    assert write_tsv(ds) == b"text\tlabel\n"


def test_write_rejects_tab_in_text():
    ds = LabeledDataset(
        name="x",
        split_tag="train",
        utterances=(LabeledUtterance(id="train:00000", text="has\ttab", intent="a"),),
    )
    with pytest.raises(TsvFormatError, match="train:00000"):
        write_tsv(ds)


def test_write_rejects_newline_in_text():
    ds = LabeledDataset(
        name="x",
        split_tag="train",
        utterances=(LabeledUtterance(id="train:00042", text="two\nlines", intent="a"),),
    )
    with pytest.raises(TsvFormatError, match="train:00042"):
        write_tsv(ds)


def test_same_bytes_same_ids():
    raw = b"text\tlabel\nfoo bar\ta\nbaz qux\tb\n"
    first = load_tsv(raw, "train")
    second = load_tsv(raw, "train")
    assert [u.id for u in first.utterances] == [u.id for u in second.utterances]


def test_histogram_empty():
    assert intent_histogram(dataset_from_rows("train", [])) == {}


def test_histogram_hand_counts():
    ds = dataset_from_rows(
        "train",
        [("a a", "x"), ("b b", "x"), ("c c", "x"), ("d d", "y"), ("e e", "y")],
    )
    assert intent_histogram(ds) == {"x": 3, "y": 2}


def test_histogram_sums_to_size():
    rng = random.Random(5)
    triple = random_triple(rng, 70, 20, 20)
    for ds in triple.datasets():
        hist = intent_histogram(ds)
        assert sum(hist.values()) == len(ds)
        assert set(hist) == set(ds.intents)


def test_duplicate_ids_rejected():
    utt = LabeledUtterance(id="train:00000", text="x y", intent="a")
    with pytest.raises(ValueError, match="duplicate"):
        LabeledDataset(name="d", split_tag="train", utterances=(utt, utt))


def test_triple_checks_split_tags_and_global_ids():
    train = dataset_from_rows("train", [("a b", "x")])
    dev = dataset_from_rows("dev", [("c d", "x")])
    test = dataset_from_rows("test", [("e f", "x")])
    SplitTriple(train=train, dev=dev, test=test)  # valid
    with pytest.raises(ValueError, match="split tag"):
        SplitTriple(train=dev, dev=dev, test=test)


def test_utterance_invariants():
    with pytest.raises(ValueError, match="empty"):
        LabeledUtterance(id="train:00000", text="   ", intent="a")
    with pytest.raises(ValueError, match="intent"):
        LabeledUtterance(id="train:00000", text="ok", intent="")
