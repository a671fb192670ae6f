import hashlib
import json
import random

import pytest

from cgsplit.augment import (
    AugStrategy,
    LlmAuthError,
    LlmClientConfig,
    LlmRequestError,
    ParaphraseCache,
    ParaphraseParseError,
    ParaphraseSet,
    augment_dataset,
    build_prompt,
    generate_paraphrases,
    parse_paraphrases,
    select_wrong_predictions,
)
from cgsplit.corpus import dataset_from_rows

from corpora import random_triple
from mock_llm import MockLlmServer


@pytest.fixture(autouse=True)
def _auth_token(monkeypatch):
    monkeypatch.setenv("LLM_API_KEY", "test-token")


def _client(server, **overrides) -> LlmClientConfig:
    defaults = dict(
        endpoint=server.endpoint,
        model="mock-model",
        temperature=0.7,
        timeout=10.0,
        max_retries=3,
        max_in_flight=2,
        retry_backoff=0.01,
    )
    defaults.update(overrides)
    return LlmClientConfig(**defaults)


def test_prompt_contains_text_and_count():
    prompt = build_prompt("i have a pending top-up", 4)
    assert "i have a pending top-up" in prompt
    assert "4" in prompt


def test_prompt_k_one():
    prompt = build_prompt("hello", 1)
    assert "exactly 1" in prompt


def test_prompt_deterministic():
    assert build_prompt("same text", 7) == build_prompt("same text", 7)


def test_parse_json_array():
    assert parse_paraphrases('["a", "b", "c", "d"]', 4) == ["a", "b", "c", "d"]


def test_parse_json_array_with_prose():
    body = 'Sure! Here you go:\n["first one", "second one"]\nHope that helps.'
    assert parse_paraphrases(body, 2) == ["first one", "second one"]


def test_parse_numbered_fallback():
    lines = [f"{i}. paraphrase number {i}" for i in range(1, 11)]
    body = "Here are your paraphrases:\n" + "\n".join(lines) + "\nEnjoy!"
    assert parse_paraphrases(body, 10) == [f"paraphrase number {i}" for i in range(1, 11)]


def test_parse_count_mismatch():
    with pytest.raises(ParaphraseParseError) as err:
        parse_paraphrases('["a", "b"]', 4)
    assert err.value.body == '["a", "b"]'


def test_parse_garbage():
    with pytest.raises(ParaphraseParseError):
        parse_paraphrases("no structure at all", 3)


def test_parse_normalizes_whitespace():
    assert parse_paraphrases('["two\\nlines here", "a\\tb"]', 2) == ["two lines here", "a b"]


def test_cache_round_trip(tmp_path):
    cache = ParaphraseCache(tmp_path / "cache")
    pset = ParaphraseSet(
        source_id="train:00003",
        source_text="where is my card",
        paraphrases=("a", "b", "c"),
        model="m",
        prompt_version="v1",
    )
    assert cache.lookup("m", "v1", "where is my card", 3) is None
    cache.store(pset, 3)
    assert cache.lookup("m", "v1", "where is my card", 3) == pset
    assert cache.lookup("m", "v1", "where is my card", 4) is None  # k is part of the key


def test_cache_key_is_sha256_of_parts():
    key = ParaphraseCache.key("m", "v1", "text here", 10)
    expected = hashlib.sha256("m\x1fv1\x1ftext here\x1f10".encode("utf-8")).hexdigest()
    assert key == expected


def test_generate_cold_then_warm(tmp_path):
    train = dataset_from_rows(
        "train", [("first utterance", "a"), ("second utterance", "b"), ("third utterance", "a")]
    )
    with MockLlmServer(paraphrase_count=4) as server:
        cache = ParaphraseCache(tmp_path / "cache")
        config = _client(server)
        sets = generate_paraphrases(train.utterances, 4, config, cache)
        assert server.request_count == 3
        assert [s.source_id for s in sets] == [u.id for u in train.utterances]
        assert all(len(s.paraphrases) == 4 for s in sets)
        assert len(list((tmp_path / "cache").glob("*.json"))) == 3

        again = generate_paraphrases(train.utterances, 4, config, cache)
        assert server.request_count == 3  # zero new requests on a warm cache
        assert again == sets


def test_generate_retries_through_429(tmp_path):
    train = dataset_from_rows("train", [("rate limited utterance", "a")])
    with MockLlmServer(paraphrase_count=2, status_script=[429, 429, 200]) as server:
        config = _client(server, max_in_flight=1)
        sets = generate_paraphrases(train.utterances, 2, config, ParaphraseCache(tmp_path / "c"))
        assert server.request_count == 3
        assert len(sets) == 1


def test_generate_gives_up_after_retries(tmp_path):
    train = dataset_from_rows("train", [("always limited", "a")])
    with MockLlmServer(paraphrase_count=2, status_script=[429] * 10) as server:
        config = _client(server, max_retries=2)
        with pytest.raises(LlmRequestError) as err:
            generate_paraphrases(train.utterances, 2, config, ParaphraseCache(tmp_path / "c"))
        assert err.value.attempts == 3


def test_generate_short_array_is_parse_error(tmp_path):
    train = dataset_from_rows("train", [("please paraphrase me", "a")])
    with MockLlmServer(paraphrase_count=2) as server:  # responds with 2, we ask 4
        config = _client(server)
        with pytest.raises(ParaphraseParseError):
            generate_paraphrases(train.utterances, 4, config, ParaphraseCache(tmp_path / "c"))


def test_generate_non_retryable_status_fails_fast(tmp_path):
    train = dataset_from_rows("train", [("bad request", "a")])
    with MockLlmServer(paraphrase_count=2, status_script=[418]) as server:
        config = _client(server)
        with pytest.raises(LlmRequestError) as err:
            generate_paraphrases(train.utterances, 2, config, ParaphraseCache(tmp_path / "c"))
        assert err.value.status == 418
        assert server.request_count == 1


def test_generate_missing_auth(tmp_path, monkeypatch):
    monkeypatch.delenv("LLM_API_KEY", raising=False)
    train = dataset_from_rows("train", [("no token", "a")])
    with MockLlmServer(paraphrase_count=2) as server:
        config = _client(server)
        with pytest.raises(LlmAuthError):
            generate_paraphrases(train.utterances, 2, config, ParaphraseCache(tmp_path / "c"))
        assert server.request_count == 0


def test_generate_failure_keeps_completed_work(tmp_path):
    train = dataset_from_rows("train", [("good one", "a"), ("doomed one", "b")])
    with MockLlmServer(paraphrase_count=2, status_script=[200, 400]) as server:
        config = _client(server, max_in_flight=1)
        cache = ParaphraseCache(tmp_path / "c")
        with pytest.raises(LlmRequestError):
            generate_paraphrases(train.utterances, 2, config, cache)
        assert cache.lookup(config.model, "v1", "good one", 2) is not None
        # the rerun only refetches the failed instance
        sets = generate_paraphrases(train.utterances, 2, config, cache)
        assert len(sets) == 2
        assert server.request_count == 3


def test_cache_hit_rebinds_source_id(tmp_path):
    # two instances with identical text share one cache entry
    train = dataset_from_rows("train", [("same text", "a"), ("same text", "a")])
    with MockLlmServer(paraphrase_count=2) as server:
        config = _client(server, max_in_flight=1)
        cache = ParaphraseCache(tmp_path / "c")
        first = generate_paraphrases(train.utterances[:1], 2, config, cache)
        second = generate_paraphrases(train.utterances[1:], 2, config, cache)
        assert server.request_count == 1
        assert first[0].source_id == "train:00000"
        assert second[0].source_id == "train:00001"
        assert first[0].paraphrases == second[0].paraphrases


def test_generate_warns_on_duplicate_paraphrases(tmp_path, caplog, monkeypatch):
    import logging

    import cgsplit.augment as augment_mod

    train = dataset_from_rows("train", [("hello there", "a")])
    monkeypatch.setattr(
        augment_mod, "request_completion", lambda config, prompt: '["same", "same", "other"]'
    )
    config = LlmClientConfig(endpoint="http://unused", model="m")
    with caplog.at_level(logging.WARNING, logger="cgsplit.augment"):
        sets = generate_paraphrases(train.utterances, 3, config, ParaphraseCache(tmp_path / "c"))
    assert sets[0].paraphrases == ("same", "same", "other")  # duplicates kept
    assert any("duplicate" in record.message for record in caplog.records)


def test_augment_dataset_empty_sets():
    train = dataset_from_rows("train", [("a b", "x")])
    assert augment_dataset(train, []) == train


def test_augment_dataset_counts_and_ids():
    train = dataset_from_rows("train", [("a b", "x"), ("c d", "y")])
    sets = [
        ParaphraseSet(
            source_id=u.id,
            source_text=u.text,
            paraphrases=tuple(f"{u.text} v{i}" for i in range(1, 5)),
            model="m",
            prompt_version="v1",
        )
        for u in train.utterances
    ]
    out = augment_dataset(train, sets)
    assert len(out) == len(train) + 8
    assert out.utterances[: len(train)] == train.utterances
    assert out.utterances[2].id == "train:00000#p1"
    assert out.utterances[-1].id == "train:00001#p4"


def test_augment_dataset_labels_follow_sources():
    rng = random.Random(21)
    triple = random_triple(rng, 30, 5, 5)
    train = triple.train
    by_id = train.by_id()
    sets = [
        ParaphraseSet(
            source_id=u.id,
            source_text=u.text,
            paraphrases=(f"{u.text} alt",),
            model="m",
            prompt_version="v1",
        )
        for u in rng.sample(list(train.utterances), 10)
    ]
    out = augment_dataset(train, sets)
    for utt in out.utterances[len(train):]:
        source_id = utt.id.split("#p")[0]
        assert utt.intent == by_id[source_id].intent


def test_augment_dataset_unknown_source():
    train = dataset_from_rows("train", [("a b", "x")])
    bogus = ParaphraseSet(
        source_id="train:99999", source_text="zz", paraphrases=("y",), model="m", prompt_version="v1"
    )
    with pytest.raises(KeyError):
        augment_dataset(train, [bogus])


def test_select_wrong_predictions():
    ids = ["i0", "i1", "i2", "i3", "i4"]
    assert select_wrong_predictions(["a"] * 5, ["a"] * 5, ids) == []
    assert select_wrong_predictions(["a"] * 5, ["b"] * 5, ids) == ids
    gold = ["a", "b", "a", "b", "a"]
    pred = ["a", "a", "a", "b", "b"]
    assert select_wrong_predictions(gold, pred, ids) == ["i1", "i4"]
    with pytest.raises(ValueError):
        select_wrong_predictions(["a"], ["a", "b"], ["i0", "i1"])


def test_strategy_validation():
    assert AugStrategy.full(10).k == 10
    assert AugStrategy.wrong_pred(10).kind == "wrong_pred"
    with pytest.raises(ValueError):
        AugStrategy("sometimes", 4)
    with pytest.raises(ValueError):
        AugStrategy.full(0)
