"""Paraphrase generation against a chat-completion endpoint, with caching.

The client targets any chat-completion-compatible HTTP endpoint (POST JSON
``{model, messages, temperature}``, reply ``choices[0].message.content``),
so tests and demos run against a local mock.  Responses are cached on disk
keyed by a content hash, which makes generation idempotent: a warm rerun
performs zero network calls.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import re
import time
import urllib.error
import urllib.request
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .corpus import LabeledDataset, LabeledUtterance

logger = logging.getLogger(__name__)

PROMPT_VERSION = "v1"

_PROMPT_TEMPLATE = (
    "Rewrite the utterance below as exactly {k} distinct paraphrases. "
    "Each paraphrase must preserve the speaker's intent and meaning. "
    "Answer with a JSON array of exactly {k} strings and nothing else.\n"
    "\n"
    "Utterance: {text}"
)

FULL = "full"
WRONG_PRED = "wrong_pred"


@dataclass(frozen=True)
class AugStrategy:
    """How paraphrases enter training: everything up front, or wrong ones per round."""

    kind: str
    k: int

    def __post_init__(self) -> None:
        if self.kind not in (FULL, WRONG_PRED):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @classmethod
    def full(cls, k: int) -> "AugStrategy":
        return cls(FULL, k)

    @classmethod
    def wrong_pred(cls, k: int) -> "AugStrategy":
        return cls(WRONG_PRED, k)


@dataclass(frozen=True)
class ParaphraseSet:
    source_id: str
    source_text: str
    paraphrases: tuple[str, ...]
    model: str
    prompt_version: str

    def __post_init__(self) -> None:
        if not self.paraphrases:
            raise ValueError(f"paraphrase set for {self.source_id!r} is empty")
        if any(not p for p in self.paraphrases):
            raise ValueError(f"paraphrase set for {self.source_id!r} contains an empty string")


@dataclass(frozen=True)
class LlmClientConfig:
    endpoint: str
    model: str
    temperature: float = 1.0
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    auth_env: str = "LLM_API_KEY"
    retry_backoff: float = 0.5

    def __post_init__(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class ParaphraseParseError(ValueError):
    """Completion text did not yield the requested number of paraphrases."""

    def __init__(self, message: str, body: str) -> None:
        super().__init__(message)
        self.body = body


class LlmAuthError(RuntimeError):
    pass


class LlmRequestError(RuntimeError):
    def __init__(self, message: str, status: int | None = None, attempts: int = 0) -> None:
        super().__init__(message)
        self.status = status
        self.attempts = attempts


def build_prompt(text: str, k: int) -> str:
    """Deterministic, versioned prompt asking for exactly k paraphrases."""
    if not text:
        raise ValueError("cannot build a prompt for empty text")
    if k < 1:
        raise ValueError("k must be >= 1")
    return _PROMPT_TEMPLATE.format(k=k, text=text)


_WS_RE = re.compile(r"\s+")
_NUMBERED_RE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")


def _normalize(text: str) -> str:
    # keep paraphrases single-line so they stay representable in TSV
    return _WS_RE.sub(" ", text).strip()


def parse_paraphrases(response_body: str, k: int) -> list[str]:
    """Extract exactly k paraphrases from a completion.

    Primary path: the body (or its outermost ``[...]`` slice) is a JSON
    array of k strings.  Fallback: k numbered lines (``1. ...``), with
    surrounding prose tolerated.
    """
    candidates: list[str] | None = None
    for attempt in (response_body.strip(), _bracket_slice(response_body)):
        if attempt is None:
            continue
        try:
            parsed = json.loads(attempt)
        except json.JSONDecodeError:
            continue
        if isinstance(parsed, list) and all(isinstance(x, str) for x in parsed):
            candidates = [_normalize(x) for x in parsed]
            break

    if candidates is None:
        numbered = [m.group(1) for m in map(_NUMBERED_RE.match, response_body.splitlines()) if m]
        if numbered:
            candidates = [_normalize(x) for x in numbered]

    if candidates is None:
        raise ParaphraseParseError(
            f"could not parse paraphrases: neither a JSON array nor a numbered list of {k}",
            response_body,
        )
    if len(candidates) != k or any(not c for c in candidates):
        raise ParaphraseParseError(
            f"expected {k} non-empty paraphrases, got {len(candidates)}", response_body
        )
    return candidates


def _bracket_slice(body: str) -> str | None:
    start, stop = body.find("["), body.rfind("]")
    if start == -1 or stop <= start:
        return None
    return body[start : stop + 1]


class ParaphraseCache:
    """One JSON file per (model, prompt version, source text, k) hash key."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model: str, prompt_version: str, source_text: str, k: int) -> str:
        raw = "\x1f".join((model, prompt_version, source_text, str(k)))
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def lookup(self, model: str, prompt_version: str, source_text: str, k: int) -> ParaphraseSet | None:
        path = self._path(self.key(model, prompt_version, source_text, k))
        if not path.exists():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        return ParaphraseSet(
            source_id=doc["source_id"],
            source_text=doc["source_text"],
            paraphrases=tuple(doc["paraphrases"]),
            model=doc["model"],
            prompt_version=doc["prompt_version"],
        )

    def store(self, pset: ParaphraseSet, k: int) -> None:
        path = self._path(self.key(pset.model, pset.prompt_version, pset.source_text, k))
        doc = {
            "source_id": pset.source_id,
            "source_text": pset.source_text,
            "paraphrases": list(pset.paraphrases),
            "model": pset.model,
            "prompt_version": pset.prompt_version,
        }
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2), encoding="utf-8")
        os.replace(tmp, path)


_RETRYABLE = {429}


def _is_retryable(status: int) -> bool:
    return status in _RETRYABLE or 500 <= status <= 599


def request_completion(config: LlmClientConfig, prompt: str) -> str:
    """POST one chat completion, retrying 429/5xx with exponential backoff."""
    token = os.environ.get(config.auth_env)
    if not token:
        raise LlmAuthError(
            f"auth token env var {config.auth_env!r} is not set; export it or point auth_env elsewhere"
        )
    body = json.dumps(
        {
            "model": config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
        }
    ).encode("utf-8")

    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            time.sleep(config.retry_backoff * (2 ** (attempt - 1)))
        req = urllib.request.Request(
            config.endpoint,
            data=body,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {token}",
            },
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=config.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
            return payload["choices"][0]["message"]["content"]
        except urllib.error.HTTPError as exc:
            if not _is_retryable(exc.code):
                raise LlmRequestError(
                    f"endpoint returned HTTP {exc.code}", status=exc.code, attempts=attempt + 1
                ) from exc
            last_error = exc
            logger.warning("HTTP %d from endpoint (attempt %d/%d)", exc.code, attempt + 1, config.max_retries + 1)
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            last_error = exc
            logger.warning("request failed: %s (attempt %d/%d)", exc, attempt + 1, config.max_retries + 1)
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise LlmRequestError(f"malformed completion payload: {exc}", attempts=attempt + 1) from exc
    status = last_error.code if isinstance(last_error, urllib.error.HTTPError) else None
    raise LlmRequestError(
        f"request failed after {config.max_retries + 1} attempts: {last_error}",
        status=status,
        attempts=config.max_retries + 1,
    )


def generate_paraphrases(
    instances: Sequence[LabeledUtterance],
    k: int,
    config: LlmClientConfig,
    cache: ParaphraseCache,
) -> list[ParaphraseSet]:
    """Paraphrase each instance, consulting the cache before the network.

    Misses are fetched with at most ``max_in_flight`` concurrent requests.
    Output order matches input order.  On failure, completed work is already
    in the cache, so a rerun resumes where it left off.
    """
    results: dict[int, ParaphraseSet] = {}
    misses: list[tuple[int, LabeledUtterance]] = []
    for idx, inst in enumerate(instances):
        hit = cache.lookup(config.model, PROMPT_VERSION, inst.text, k)
        if hit is not None:
            results[idx] = dataclasses.replace(hit, source_id=inst.id)
        else:
            misses.append((idx, inst))

    def fetch(inst: LabeledUtterance) -> ParaphraseSet:
        content = request_completion(config, build_prompt(inst.text, k))
        paraphrases = parse_paraphrases(content, k)
        distinct = len(set(paraphrases))
        if distinct < len(paraphrases):
            logger.warning(
                "instance %s: %d duplicate paraphrase(s) kept", inst.id, len(paraphrases) - distinct
            )
        pset = ParaphraseSet(
            source_id=inst.id,
            source_text=inst.text,
            paraphrases=tuple(paraphrases),
            model=config.model,
            prompt_version=PROMPT_VERSION,
        )
        cache.store(pset, k)
        return pset

    if misses:
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            futures = {pool.submit(fetch, inst): idx for idx, inst in misses}
            done, pending = wait(futures, return_when=FIRST_EXCEPTION)
            failure: Exception | None = None
            for future in done:
                exc = future.exception()
                if exc is not None and failure is None:
                    failure = exc
                elif exc is None:
                    results[futures[future]] = future.result()
            for future in pending:
                future.cancel()
            if failure is not None:
                raise failure

    return [results[idx] for idx in range(len(instances))]


def augment_dataset(train: LabeledDataset, sets: Sequence[ParaphraseSet]) -> LabeledDataset:
    """Append each paraphrase as a new instance carrying its source's intent.

    Derived ids are ``<source_id>#p<i>`` with i counting from 1; the original
    instances are retained unchanged, in order, ahead of the paraphrases.
    """
    by_id = train.by_id()
    extras: list[LabeledUtterance] = []
    for pset in sets:
        source = by_id.get(pset.source_id)
        if source is None:
            raise KeyError(f"paraphrase source id {pset.source_id!r} is not in the training set")
        for i, text in enumerate(pset.paraphrases, start=1):
            extras.append(LabeledUtterance(id=f"{pset.source_id}#p{i}", text=text, intent=source.intent))
    return LabeledDataset(
        name=train.name,
        split_tag=train.split_tag,
        utterances=train.utterances + tuple(extras),
    )


def select_wrong_predictions(
    gold: Sequence[str], pred: Sequence[str], ids: Sequence[str]
) -> list[str]:
    """Ids whose prediction disagrees with gold, in input order."""
    if not (len(gold) == len(pred) == len(ids)):
        raise ValueError(
            f"length mismatch: gold {len(gold)}, pred {len(pred)}, ids {len(ids)}"
        )
    return [i for g, p, i in zip(gold, pred, ids) if g != p]


class ParaphraseSource(Protocol):
    """Anything that can paraphrase a batch of instances k ways."""

    def paraphrases_for(self, instances: Sequence[LabeledUtterance], k: int) -> list[ParaphraseSet]:
        ...


class LlmParaphraseSource:
    """Paraphrase source backed by the HTTP client and disk cache."""

    def __init__(self, config: LlmClientConfig, cache: ParaphraseCache) -> None:
        self.config = config
        self.cache = cache

    def paraphrases_for(self, instances: Sequence[LabeledUtterance], k: int) -> list[ParaphraseSet]:
        return generate_paraphrases(instances, k, self.config, self.cache)
