"""Independent reference implementations used as test oracles.

Everything here is deliberately written the slow, obvious way and shares no
code with the package: exhaustive subsequence enumeration, a classic
rolling-row LCS DP, a brute-force pairwise scorer, a recompute-everything
pruning simulator, and a standalone known-intent sampler.
"""
from __future__ import annotations

from itertools import combinations

from cgsplit.rouge import PairScore
from cgsplit.simgraph import PruneReport


def lcs_enumeration(a, b):
    """LCS length by enumerating all subsequences of both sequences."""
    def subs_by_len(seq):
        out = [set() for _ in range(len(seq) + 1)]
        for k in range(len(seq) + 1):
            for idxs in combinations(range(len(seq)), k):
                out[k].add(tuple(seq[i] for i in idxs))
        return out

    sa, sb = subs_by_len(a), subs_by_len(b)
    for k in range(min(len(a), len(b)), 0, -1):
        if sa[k] & sb[k]:
            return k
    return 0


def subsequence_profile(seq, alphabet_size=3):
    """Per-length sets of subsequences, encoded as base-N integers.

    Faster equivalent of the enumeration in `lcs_enumeration`, for bulk use:
    two sequences share a length-k subsequence iff their level-k sets
    intersect.
    """
    n = len(seq)
    levels = [set() for _ in range(n + 1)]
    for mask in range(1 << n):
        code = 0
        length = 0
        for i in range(n):
            if mask >> i & 1:
                code = code * alphabet_size + seq[i]
                length += 1
        levels[length].add(code)
    return levels


def lcs_from_profiles(profile_a, profile_b):
    for k in range(min(len(profile_a), len(profile_b)) - 1, 0, -1):
        if not profile_a[k].isdisjoint(profile_b[k]):
            return k
    return 0


def lcs_rolling_dp(a, b):
    """Classic O(|a|*|b|) dynamic program with a rolling row."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for tok_a in a:
        cur = [0] * (len(b) + 1)
        for j, tok_b in enumerate(b, start=1):
            if tok_a == tok_b:
                cur[j] = prev[j - 1] + 1
            elif cur[j - 1] >= prev[j]:
                cur[j] = cur[j - 1]
            else:
                cur[j] = prev[j]
        prev = cur
    return prev[-1]


def score_pair(tokens_a, tokens_b, variant):
    lcs = lcs_rolling_dp(tokens_a, tokens_b)
    if variant == "lcs_over_max":
        return lcs / max(len(tokens_a), len(tokens_b))
    if lcs == 0:
        return 0.0
    return 2.0 * lcs / (len(tokens_a) + len(tokens_b))


def pairwise_bruteforce(train, eval_pool, cfg, tokenize):
    """Filtered double loop over the full cross product."""
    out = []
    for tu in train.utterances:
        ta = tokenize(tu.text)
        for eu in eval_pool:
            tb = tokenize(eu.text)
            if not ta and not tb:
                continue
            score = score_pair(ta, tb, cfg.variant)
            if score >= cfg.threshold:
                out.append(PairScore(train_id=tu.id, eval_id=eu.id, score=score))
    out.sort(key=lambda p: (p.train_id, p.eval_id))
    return out


def prune_reference(pairs, split_of, config, initial_remaining):
    """Recompute-everything pruning simulator over a plain edge list.

    Keeps no indices: every iteration rebuilds degrees from the surviving
    edge set and picks the victim with an explicit sort over all nodes.
    """
    edges = {frozenset((p.train_id, p.eval_id)) for p in pairs}
    splits = {}
    for p in pairs:
        splits[p.train_id] = split_of(p.train_id)
        splits[p.eval_id] = split_of(p.eval_id)
    nodes = set(splits)
    remaining = dict(initial_remaining)
    edges_initial = len(edges)

    def side(node):
        return "train_side" if splits[node] == "train" else "eval_side"

    def pool_key(node):
        return splits[node] if config.per_split_pools else side(node)

    def degree(node):
        return sum(1 for e in edges if node in e)

    def max_eval_degree():
        return max((degree(n) for n in nodes if side(n) == "eval_side"), default=0)

    def stop():
        if config.stop_rule == "all_edges_removed":
            return not edges
        return max_eval_degree() <= config.max_eval_degree

    pruned = {"train": [], "dev": [], "test": []}
    iterations = 0
    while not stop():
        ranked = sorted(
            nodes,
            key=lambda n: (
                -degree(n) * remaining[pool_key(n)],
                -degree(n),
                side(n) != "eval_side",
                n,
            ),
        )
        victim = ranked[0]
        edges = {e for e in edges if victim not in e}
        nodes.remove(victim)
        remaining[pool_key(victim)] -= 1
        pruned[splits[victim]].append(victim)
        iterations += 1

    return PruneReport(
        pruned_train_ids=tuple(pruned["train"]),
        pruned_dev_ids=tuple(pruned["dev"]),
        pruned_test_ids=tuple(pruned["test"]),
        iterations=iterations,
        final_max_eval_degree=max_eval_degree(),
        edges_initial=edges_initial,
        edges_final=len(edges),
    )


_MASK64 = (1 << 64) - 1


def splitmix64_reference(seed):
    """Generator of SplitMix64 outputs, written independently of the package."""
    state = seed & _MASK64

    def next_value():
        nonlocal state
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & _MASK64
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        return z

    return next_value


def sample_known_reference(labels, ratio, seed):
    """Standalone sampler: sort, SplitMix64-driven Fisher-Yates, take first k."""
    ordered = sorted(set(labels))
    n = len(ordered)
    # round half up without float wobble: scale by powers of ten
    text = repr(ratio)
    if "e" in text or "E" in text:
        raise ValueError("scientific-notation ratios not supported by the reference")
    digits = len(text.split(".")[1]) if "." in text else 0
    scaled = round(float(text) * 10**digits)  # exact integer numerator
    k = max(1, (scaled * n * 10 + 5 * 10**digits) // (10 ** (digits + 1)))
    nxt = splitmix64_reference(seed)
    for i in range(n - 1, 0, -1):
        j = nxt() % (i + 1)
        ordered[i], ordered[j] = ordered[j], ordered[i]
    return set(ordered[:k])
