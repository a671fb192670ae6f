"""Bipartite train/eval similarity graph and weighted iterative pruning.

Nodes are instances; an edge joins a training instance to a dev or test
instance whose similarity met the threshold.  Pruning repeatedly removes
the node with the highest *weighted* degree -- raw degree multiplied by the
remaining instance count of the node's side pool -- so the larger split
absorbs proportionally more of the removals.

The selection loop is order-sensitive and fully deterministic: ties are
broken by larger raw degree, then eval side before train side, then
lexicographically smallest instance id.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .corpus import SPLIT_TAGS
from .rouge import PairScore

TRAIN_SIDE = "train_side"
EVAL_SIDE = "eval_side"

ALL_EDGES_REMOVED = "all_edges_removed"
MAX_EVAL_DEGREE = "max_eval_degree"


def side_of(split_tag: str) -> str:
    return TRAIN_SIDE if split_tag == "train" else EVAL_SIDE


@dataclass(frozen=True)
class SimNode:
    instance_id: str
    side: str
    split_tag: str

    def __post_init__(self) -> None:
        if self.split_tag not in SPLIT_TAGS:
            raise ValueError(f"unknown split tag {self.split_tag!r}")
        if self.side != side_of(self.split_tag):
            raise ValueError(
                f"node {self.instance_id!r}: side {self.side!r} inconsistent with split {self.split_tag!r}"
            )


class SimilarityGraph:
    """Undirected bipartite graph over instance ids, with a degree index."""

    def __init__(self) -> None:
        self._adj: dict[str, set[str]] = {}
        self._node: dict[str, SimNode] = {}
        self._edge_count = 0

    def _add_node(self, node: SimNode) -> None:
        existing = self._node.get(node.instance_id)
        if existing is None:
            self._node[node.instance_id] = node
            self._adj[node.instance_id] = set()
        elif existing != node:
            raise ValueError(f"conflicting node metadata for id {node.instance_id!r}")

    def _add_edge(self, train_id: str, eval_id: str) -> None:
        if eval_id not in self._adj[train_id]:
            self._adj[train_id].add(eval_id)
            self._adj[eval_id].add(train_id)
            self._edge_count += 1

    @property
    def nodes(self) -> dict[str, SimNode]:
        return self._node

    @property
    def edge_count(self) -> int:
        return self._edge_count

    def edges(self) -> set[frozenset[str]]:
        return {
            frozenset((a, b))
            for a, nbrs in self._adj.items()
            for b in nbrs
            if a < b
        }

    def degree(self, instance_id: str) -> int:
        if instance_id not in self._adj:
            raise KeyError(f"node {instance_id!r} not in graph")
        return len(self._adj[instance_id])

    def neighbors(self, instance_id: str) -> set[str]:
        return set(self._adj[instance_id])

    def remove_node(self, instance_id: str) -> None:
        if instance_id not in self._adj:
            raise KeyError(f"node {instance_id!r} not in graph")
        for other in self._adj.pop(instance_id):
            self._adj[other].discard(instance_id)
            self._edge_count -= 1
        del self._node[instance_id]

    def max_degree(self, side: str) -> int:
        degrees = [len(nbrs) for nid, nbrs in self._adj.items() if self._node[nid].side == side]
        return max(degrees, default=0)


def build_graph(pairs: Iterable[PairScore], split_of: Callable[[str], str]) -> SimilarityGraph:
    """Construct the bipartite graph: one node per id in `pairs`, one edge per pair."""
    graph = SimilarityGraph()
    for pair in pairs:
        train_split = split_of(pair.train_id)
        eval_split = split_of(pair.eval_id)
        if train_split != "train" or eval_split == "train":
            raise ValueError(
                f"pair ({pair.train_id!r}, {pair.eval_id!r}) does not join a train instance "
                f"to a dev/test instance (splits: {train_split!r}, {eval_split!r})"
            )
        graph._add_node(SimNode(pair.train_id, TRAIN_SIDE, train_split))
        graph._add_node(SimNode(pair.eval_id, EVAL_SIDE, eval_split))
        graph._add_edge(pair.train_id, pair.eval_id)
    return graph


@dataclass(frozen=True)
class PruneConfig:
    """Stop rule and pool-weighting options for the pruning loop.

    ``per_split_pools`` switches the degree weight from the side pool
    (train vs combined dev+test) to the node's own split pool; off by
    default, kept for sensitivity checks.
    """

    stop_rule: str = MAX_EVAL_DEGREE
    max_eval_degree: int | None = 5
    per_split_pools: bool = False

    def __post_init__(self) -> None:
        if self.stop_rule not in (ALL_EDGES_REMOVED, MAX_EVAL_DEGREE):
            raise ValueError(f"unknown stop rule {self.stop_rule!r}")
        if self.stop_rule == MAX_EVAL_DEGREE:
            if self.max_eval_degree is None or self.max_eval_degree < 0:
                raise ValueError("max_eval_degree stop rule needs a limit >= 0")


@dataclass(frozen=True)
class PruneReport:
    pruned_train_ids: tuple[str, ...]
    pruned_dev_ids: tuple[str, ...]
    pruned_test_ids: tuple[str, ...]
    iterations: int
    final_max_eval_degree: int
    edges_initial: int
    edges_final: int

    def pruned_by_split(self) -> dict[str, tuple[str, ...]]:
        return {
            "train": self.pruned_train_ids,
            "dev": self.pruned_dev_ids,
            "test": self.pruned_test_ids,
        }

    def to_dict(self) -> dict:
        return {
            "pruned_train_ids": list(self.pruned_train_ids),
            "pruned_dev_ids": list(self.pruned_dev_ids),
            "pruned_test_ids": list(self.pruned_test_ids),
            "iterations": self.iterations,
            "final_max_eval_degree": self.final_max_eval_degree,
            "edges_initial": self.edges_initial,
            "edges_final": self.edges_final,
        }


def weighted_degree(instance_id: str, graph: SimilarityGraph, remaining: Mapping[str, int]) -> int:
    """Raw degree times the remaining pool count of the node's side."""
    node = graph.nodes.get(instance_id)
    if node is None:
        raise KeyError(f"node {instance_id!r} not in graph")
    return graph.degree(instance_id) * remaining[node.side]


class _SideIndex:
    """Degree buckets for one side; supports decrement and deterministic max."""

    def __init__(self) -> None:
        self.buckets: dict[int, set[str]] = {}
        self.degree: dict[str, int] = {}
        self.max_degree = 0

    def add(self, instance_id: str, degree: int) -> None:
        self.degree[instance_id] = degree
        self.buckets.setdefault(degree, set()).add(instance_id)
        if degree > self.max_degree:
            self.max_degree = degree

    def change(self, instance_id: str, new_degree: int) -> None:
        old = self.degree[instance_id]
        self.buckets[old].discard(instance_id)
        self.degree[instance_id] = new_degree
        self.buckets.setdefault(new_degree, set()).add(instance_id)

    def remove(self, instance_id: str) -> None:
        self.buckets[self.degree.pop(instance_id)].discard(instance_id)

    def settle_max(self) -> int:
        while self.max_degree > 0 and not self.buckets.get(self.max_degree):
            self.max_degree -= 1
        return self.max_degree

    def best(self) -> tuple[int, str] | None:
        top = self.settle_max()
        if top == 0:
            return None
        return top, min(self.buckets[top])


def prune(
    graph: SimilarityGraph,
    config: PruneConfig,
    initial_remaining: Mapping[str, int],
) -> PruneReport:
    """Iteratively remove the highest-weighted-degree node until the stop rule holds.

    ``initial_remaining`` maps pool keys to instance counts of the full split
    pools (graph members and non-members alike): ``train_side``/``eval_side``
    by default, or ``train``/``dev``/``test`` when ``per_split_pools`` is set.
    The mapping is copied; the graph itself is consumed (nodes removed in
    place), so build a fresh graph per run.
    """
    pool_of: dict[str, str] = {}
    for node in graph.nodes.values():
        pool_of[node.instance_id] = node.split_tag if config.per_split_pools else node.side
    remaining = dict(initial_remaining)

    for pool_key in set(pool_of.values()):
        members = sum(1 for nid, key in pool_of.items() if key == pool_key)
        if remaining.get(pool_key, 0) < members:
            raise ValueError(
                f"remaining count for pool {pool_key!r} ({remaining.get(pool_key, 0)}) "
                f"is smaller than its {members} in-graph nodes"
            )

    # one degree index per pool: the weight multiplier is uniform inside a
    # pool, so each pool's best-weighted node is its max-raw-degree node
    pools: dict[str, _SideIndex] = {}
    pool_side: dict[str, str] = {}
    for nid, node in graph.nodes.items():
        key = pool_of[nid]
        pools.setdefault(key, _SideIndex()).add(nid, graph.degree(nid))
        pool_side[key] = node.side

    pruned: dict[str, list[str]] = {tag: [] for tag in SPLIT_TAGS}
    edges_initial = graph.edge_count
    iterations = 0

    def max_eval_degree() -> int:
        return max(
            (idx.settle_max() for key, idx in pools.items() if pool_side[key] == EVAL_SIDE),
            default=0,
        )

    def stop() -> bool:
        if config.stop_rule == ALL_EDGES_REMOVED:
            return graph.edge_count == 0
        return max_eval_degree() <= (config.max_eval_degree or 0)

    while not stop():
        candidates = []
        for key, idx in pools.items():
            best = idx.best()
            if best is not None:
                degree, nid = best
                # sort key: weighted degree desc, raw degree desc, eval first, id
                candidates.append(
                    (-degree * remaining[key], -degree, pool_side[key] != EVAL_SIDE, nid)
                )
        if not candidates:
            break  # defensive: no positive-degree nodes means no edges remain
        candidates.sort()
        victim = candidates[0][3]

        node = graph.nodes[victim]
        for neighbor in graph.neighbors(victim):
            pools[pool_of[neighbor]].change(neighbor, graph.degree(neighbor) - 1)
        pools[pool_of[victim]].remove(victim)
        graph.remove_node(victim)
        remaining[pool_of[victim]] -= 1
        pruned[node.split_tag].append(victim)
        iterations += 1

    return PruneReport(
        pruned_train_ids=tuple(pruned["train"]),
        pruned_dev_ids=tuple(pruned["dev"]),
        pruned_test_ids=tuple(pruned["test"]),
        iterations=iterations,
        final_max_eval_degree=graph.max_degree(EVAL_SIDE),
        edges_initial=edges_initial,
        edges_final=graph.edge_count,
    )
