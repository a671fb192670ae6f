"""Rouge-L similarity over token sequences, plus a bulk pairwise scorer.

The score of a pair is derived from the length of their longest common
subsequence (LCS).  Two variants are supported:

* ``lcs_over_max`` (default): LCS divided by the longer token count.
* ``lcs_f1``: harmonic mean of LCS/|a| and LCS/|b|.

``pairwise_scores`` evaluates a full train x eval cross product.  Exact LCS
is only computed for candidate pairs that survive a cheap upper bound
(sparse token-count dot product), which keeps large corpora tractable.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .corpus import LabeledDataset, LabeledUtterance

logger = logging.getLogger(__name__)

TokenSeq = tuple[str, ...]

LCS_OVER_MAX = "lcs_over_max"
LCS_F1 = "lcs_f1"
VARIANTS = (LCS_OVER_MAX, LCS_F1)

# Unicode alphanumeric runs; an apostrophe joins two runs into one token.
_TOKEN_RE = re.compile(r"[^\W_]+(?:['’][^\W_]+)*")

# DP cost is |a| * |b| bit-row updates; longer inputs are truncated.
MAX_LCS_TOKENS = 512


@dataclass(frozen=True)
class RougeConfig:
    variant: str = LCS_OVER_MAX
    threshold: float = 0.3

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not (0.0 < self.threshold <= 1.0):
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")


@dataclass(frozen=True)
class PairScore:
    train_id: str
    eval_id: str
    score: float


def tokenize(text: str) -> TokenSeq:
    """Lowercase and split into alphanumeric tokens ("don't" stays whole)."""
    return tuple(_TOKEN_RE.findall(text.lower()))


def _truncate(seq: Sequence, label: str) -> Sequence:
    if len(seq) > MAX_LCS_TOKENS:
        logger.warning("%s sequence has %d tokens; truncating to %d", label, len(seq), MAX_LCS_TOKENS)
        return seq[:MAX_LCS_TOKENS]
    return seq


def _lcs_bits(a: Sequence, b: Sequence) -> int:
    # Bit-parallel LCS (Allison-Dix): one big-int row, one update per token
    # of `a`; popcount of the final row is the LCS length.
    masks: dict = {}
    bit = 1
    for tok in b:
        masks[tok] = masks.get(tok, 0) | bit
        bit <<= 1
    row = 0
    for tok in a:
        m = masks.get(tok)
        if m is None:
            continue
        x = row | m
        row = x & ~(x - ((row << 1) | 1))
    return row.bit_count()


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Length of the longest common subsequence of two token sequences."""
    if not a or not b:
        return 0
    a = _truncate(a, "first")
    b = _truncate(b, "second")
    return _lcs_bits(a, b)


def rouge_l(a: TokenSeq, b: TokenSeq, cfg: RougeConfig | None = None) -> float:
    """Rouge-L similarity of two token sequences under the configured variant."""
    cfg = cfg or RougeConfig()
    if not a and not b:
        raise ValueError("rouge_l is undefined for two empty sequences")
    lcs = lcs_length(a, b)
    if cfg.variant == LCS_OVER_MAX:
        return lcs / max(len(a), len(b))
    if lcs == 0:
        return 0.0
    return 2.0 * lcs / (len(a) + len(b))


def _count_matrix(seqs: list[list[int]], vocab_size: int) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for seq in seqs:
        counts: dict[int, int] = {}
        for tok in seq:
            counts[tok] = counts.get(tok, 0) + 1
        indices.extend(counts.keys())
        data.extend(counts.values())
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (
            np.asarray(data, dtype=np.int32),
            np.asarray(indices, dtype=np.int32),
            np.asarray(indptr, dtype=np.int64),
        ),
        shape=(len(seqs), vocab_size),
    )


def _required_lcs(cfg: RougeConfig, len_a: np.ndarray, len_b: np.ndarray) -> np.ndarray:
    if cfg.variant == LCS_OVER_MAX:
        return cfg.threshold * np.maximum(len_a, len_b)
    return cfg.threshold * (len_a + len_b) / 2.0


_TRAIN_CHUNK = 1024  # bounds the candidate matrix held in memory at once


def pairwise_scores(
    train: LabeledDataset,
    eval_pool: Sequence[LabeledUtterance],
    cfg: RougeConfig | None = None,
) -> list[PairScore]:
    """Score every train x eval pair, keeping those at or above the threshold.

    Tokenization happens once per instance.  The result is ordered by
    (train id, eval id) regardless of evaluation schedule.  Pairs where both
    sides tokenize to nothing are skipped (no shared content to measure).
    """
    cfg = cfg or RougeConfig()

    vocab: dict[str, int] = {}

    def encode(text: str) -> list[int]:
        out = []
        for tok in tokenize(text):
            idx = vocab.get(tok)
            if idx is None:
                idx = len(vocab)
                vocab[tok] = idx
            out.append(idx)
        if len(out) > MAX_LCS_TOKENS:
            logger.warning("instance has %d tokens; truncating to %d", len(out), MAX_LCS_TOKENS)
            del out[MAX_LCS_TOKENS:]
        return out

    train_seqs = [encode(u.text) for u in train.utterances]
    eval_seqs = [encode(u.text) for u in eval_pool]
    if not train_seqs or not eval_seqs or not vocab:
        return []

    train_len = np.array([len(s) for s in train_seqs], dtype=np.int32)
    eval_len = np.array([len(s) for s in eval_seqs], dtype=np.int32)
    eval_counts = _count_matrix(eval_seqs, len(vocab)).T.tocsr()

    results: list[PairScore] = []
    for start in range(0, len(train_seqs), _TRAIN_CHUNK):
        stop = min(start + _TRAIN_CHUNK, len(train_seqs))
        chunk = _count_matrix(train_seqs[start:stop], len(vocab))
        # dot of token counts >= sum of per-token min counts >= LCS
        upper = (chunk @ eval_counts).tocoo()
        if upper.nnz == 0:
            continue
        rows = upper.row + start
        lt = train_len[rows]
        le = eval_len[upper.col]
        bound = np.minimum(upper.data, np.minimum(lt, le))
        needed = _required_lcs(cfg, lt, le)
        keep = bound >= needed - 1e-9
        for r, c in zip(rows[keep].tolist(), upper.col[keep].tolist()):
            lcs = _lcs_bits(train_seqs[r], eval_seqs[c])
            if lcs == 0:
                continue
            if cfg.variant == LCS_OVER_MAX:
                score = lcs / max(train_len[r], eval_len[c])
            else:
                score = 2.0 * lcs / (int(train_len[r]) + int(eval_len[c]))
            if score >= cfg.threshold:
                results.append(
                    PairScore(
                        train_id=train.utterances[r].id,
                        eval_id=eval_pool[c].id,
                        score=float(score),
                    )
                )
    results.sort(key=lambda p: (p.train_id, p.eval_id))
    return results
