"""End-to-end construction of a compositionally-diverse split.

Pipeline: score all train x (dev+test) pairs, build the similarity graph,
prune it, then drop the pruned instances from their splits.  The result is
a pure function of the input datasets and the configuration; no instance
text or label is ever mutated.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .corpus import LabeledDataset, SplitTriple, intent_histogram
from .rouge import PairScore, RougeConfig, pairwise_scores
from .simgraph import EVAL_SIDE, TRAIN_SIDE, PruneConfig, PruneReport, build_graph, prune

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CgJob:
    input: SplitTriple
    rouge: RougeConfig
    prune: PruneConfig


@dataclass(frozen=True)
class CgResult:
    output: SplitTriple
    report: PruneReport
    stats: dict[str, dict[str, int]]
    warnings: tuple[str, ...]
    pairs: tuple[PairScore, ...] | None = None


def _drop(dataset: LabeledDataset, pruned_ids: set[str]) -> LabeledDataset:
    kept = tuple(u for u in dataset.utterances if u.id not in pruned_ids)
    return LabeledDataset(name=dataset.name, split_tag=dataset.split_tag, utterances=kept)


def construct_cg_split(job: CgJob, collect_pairs: bool = False) -> CgResult:
    """Run the full pruning pipeline on a split triple."""
    triple = job.input
    if len(triple.train) == 0:
        raise ValueError("input training set is empty")
    if len(triple.dev) + len(triple.test) == 0:
        raise ValueError("input dev and test sets are both empty")

    eval_pool = list(triple.dev.utterances) + list(triple.test.utterances)
    pairs = pairwise_scores(triple.train, eval_pool, job.rouge)

    split_by_id = {}
    for ds in triple.datasets():
        for u in ds.utterances:
            split_by_id[u.id] = ds.split_tag
    graph = build_graph(pairs, split_by_id.__getitem__)

    if job.prune.per_split_pools:
        remaining = {tag: len(ds) for tag, ds in zip(("train", "dev", "test"), triple.datasets())}
    else:
        remaining = {
            TRAIN_SIDE: len(triple.train),
            EVAL_SIDE: len(triple.dev) + len(triple.test),
        }
    report = prune(graph, job.prune, remaining)

    pruned_by_split = {tag: set(ids) for tag, ids in report.pruned_by_split().items()}
    output = SplitTriple(
        train=_drop(triple.train, pruned_by_split["train"]),
        dev=_drop(triple.dev, pruned_by_split["dev"]),
        test=_drop(triple.test, pruned_by_split["test"]),
    )

    warnings: list[str] = []
    if len(output.train) == 0:
        warnings.append("train_emptied")
        logger.warning("pruning removed every training instance")
    # only intents that *lost* their training instances to pruning; labels
    # that were eval-only in the input are a normal corpus feature
    orphaned = sorted(
        (output.dev.intents | output.test.intents)
        & triple.train.intents
        - output.train.intents
    )
    if orphaned:
        warnings.append("intents_without_train_instances: " + ", ".join(orphaned))
        logger.warning(
            "%d intent(s) kept in dev/test have no training instances left: %s",
            len(orphaned),
            ", ".join(orphaned),
        )

    stats = {
        "train": intent_histogram(output.train),
        "dev": intent_histogram(output.dev),
        "test": intent_histogram(output.test),
    }
    return CgResult(
        output=output,
        report=report,
        stats=stats,
        warnings=tuple(warnings),
        pairs=tuple(pairs) if collect_pairs else None,
    )


def result_report_dict(result: CgResult, job: CgJob) -> dict:
    """JSON-ready pruning report, including config echo and warnings."""
    doc = result.report.to_dict()
    doc["train_emptied"] = "train_emptied" in result.warnings
    doc["warnings"] = list(result.warnings)
    doc["config"] = {
        "rouge_variant": job.rouge.variant,
        "threshold": job.rouge.threshold,
        "stop_rule": job.prune.stop_rule,
        "max_eval_degree": job.prune.max_eval_degree,
        "per_split_pools": job.prune.per_split_pools,
    }
    return doc


def result_stats_dict(result: CgResult) -> dict:
    """JSON-ready per-split intent histograms plus totals."""
    return {
        "per_intent": result.stats,
        "totals": {tag: sum(counts.values()) for tag, counts in result.stats.items()},
    }
