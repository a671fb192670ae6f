"""Command-line surface: split, pairs, sample-known, score, augment, run.

All datasets are TSV, all reports JSON.  A JSON config file supplies
defaults; individual flags override it.  Identical inputs and config
produce byte-identical outputs.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import augment as aug
from . import splitgen
from .corpus import TsvFormatError, load_tsv, write_tsv, SplitTriple
from .openset import OpenTaskConfig, aggregate_runs, compute_metrics, make_open_task, sample_known_intents
from .rouge import LCS_F1, LCS_OVER_MAX, RougeConfig, pairwise_scores
from .simgraph import ALL_EDGES_REMOVED, MAX_EVAL_DEGREE, PruneConfig
from .trainloop import LoopConfig, TrainerProcess, run_loop

_VARIANT_FLAGS = {"lcs-over-max": LCS_OVER_MAX, "lcs-f1": LCS_F1}
_STOP_FLAGS = {"all-edges": ALL_EDGES_REMOVED, "max-eval-degree": MAX_EVAL_DEGREE}
_STRATEGIES = {
    "f4": aug.AugStrategy.full(4),
    "f10": aug.AugStrategy.full(10),
    "wp10": aug.AugStrategy.wrong_pred(10),
}


class ConfigError(ValueError):
    """Bad config file content, reported with the offending field path."""


@dataclass(frozen=True)
class AugmentSettings:
    strategy: str = "f10"
    k: int | None = None
    endpoint: str | None = None
    model: str = "gpt-3.5-turbo"
    temperature: float = 1.0
    cache_dir: str = ".paraphrase_cache"


@dataclass(frozen=True)
class OpensetSettings:
    known_ratio: float = 0.25
    seeds: tuple[int, ...] = tuple(range(10))


@dataclass(frozen=True)
class LoopSettings:
    max_rounds: int = 10


@dataclass(frozen=True)
class CliConfig:
    rouge: RougeConfig = field(default_factory=RougeConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)
    openset: OpensetSettings = field(default_factory=OpensetSettings)
    augment: AugmentSettings = field(default_factory=AugmentSettings)
    loop: LoopSettings = field(default_factory=LoopSettings)


def _take(section: dict, path: str, key: str, default, kind, check=None) -> object:
    value = section.pop(key, default)
    where = f"{path}.{key}" if path else key
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    bad_type = value is not None and not isinstance(value, kind)
    bad_bool = isinstance(value, bool) and kind is not bool
    if bad_type or bad_bool:
        raise ConfigError(f"{where}: expected {getattr(kind, '__name__', kind)}, got {value!r}")
    if check is not None and value is not None:
        error = check(value)
        if error:
            raise ConfigError(f"{where}: {error}")
    return value


def _no_leftovers(section: dict, path: str) -> None:
    if section:
        key = sorted(section)[0]
        where = f"{path}.{key}" if path else key
        raise ConfigError(f"unknown config key {where!r}")


def parse_config(data: bytes) -> CliConfig:
    """Decode and validate a JSON config, rejecting unknown keys."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    rouge_sec = dict(doc.pop("rouge", {}))
    variant = _take(
        rouge_sec, "rouge", "variant", LCS_OVER_MAX, str,
        lambda v: None if v in (LCS_OVER_MAX, LCS_F1) else f"must be {LCS_OVER_MAX!r} or {LCS_F1!r}",
    )
    threshold = _take(
        rouge_sec, "rouge", "threshold", 0.3, float,
        lambda v: None if 0 < v <= 1 else "must be in (0, 1]",
    )
    _no_leftovers(rouge_sec, "rouge")

    prune_sec = dict(doc.pop("prune", {}))
    stop_rule = _take(
        prune_sec, "prune", "stop_rule", MAX_EVAL_DEGREE, str,
        lambda v: None if v in (ALL_EDGES_REMOVED, MAX_EVAL_DEGREE) else
        f"must be {ALL_EDGES_REMOVED!r} or {MAX_EVAL_DEGREE!r}",
    )
    max_degree = _take(
        prune_sec, "prune", "max_degree", 5, int,
        lambda v: None if v >= 0 else "must be >= 0",
    )
    per_split_pools = _take(prune_sec, "prune", "per_split_pools", False, bool)
    _no_leftovers(prune_sec, "prune")

    openset_sec = dict(doc.pop("openset", {}))
    known_ratio = _take(
        openset_sec, "openset", "known_ratio", 0.25, float,
        lambda v: None if 0 < v <= 1 else "must be in (0, 1]",
    )
    seeds = _take(
        openset_sec, "openset", "seeds", list(range(10)), list,
        lambda v: None if all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in v)
        else "must be a list of non-negative integers",
    )
    _no_leftovers(openset_sec, "openset")

    augment_sec = dict(doc.pop("augment", {}))
    strategy = _take(
        augment_sec, "augment", "strategy", "f10", str,
        lambda v: None if v in _STRATEGIES else f"must be one of {sorted(_STRATEGIES)}",
    )
    k = _take(augment_sec, "augment", "k", None, int, lambda v: None if v >= 1 else "must be >= 1")
    endpoint = _take(augment_sec, "augment", "endpoint", None, str)
    model = _take(augment_sec, "augment", "model", "gpt-3.5-turbo", str)
    temperature = _take(augment_sec, "augment", "temperature", 1.0, float)
    cache_dir = _take(augment_sec, "augment", "cache_dir", ".paraphrase_cache", str)
    _no_leftovers(augment_sec, "augment")

    loop_sec = dict(doc.pop("loop", {}))
    max_rounds = _take(
        loop_sec, "loop", "max_rounds", 10, int, lambda v: None if v >= 1 else "must be >= 1"
    )
    _no_leftovers(loop_sec, "loop")

    _no_leftovers(doc, "")
    return CliConfig(
        rouge=RougeConfig(variant=variant, threshold=threshold),
        prune=PruneConfig(stop_rule=stop_rule, max_eval_degree=max_degree, per_split_pools=per_split_pools),
        openset=OpensetSettings(known_ratio=known_ratio, seeds=tuple(seeds)),
        augment=AugmentSettings(
            strategy=strategy, k=k, endpoint=endpoint, model=model,
            temperature=temperature, cache_dir=cache_dir,
        ),
        loop=LoopSettings(max_rounds=max_rounds),
    )


def _load_config(path: str | None) -> CliConfig:
    if path is None:
        return CliConfig()
    return parse_config(Path(path).read_bytes())


def _load_triple(args) -> SplitTriple:
    return SplitTriple(
        train=load_tsv(Path(args.train).read_bytes(), "train", name=Path(args.train).stem),
        dev=load_tsv(Path(args.dev).read_bytes(), "dev", name=Path(args.dev).stem),
        test=load_tsv(Path(args.test).read_bytes(), "test", name=Path(args.test).stem),
    )


def _rouge_from(args, config: CliConfig) -> RougeConfig:
    variant = _VARIANT_FLAGS[args.variant] if args.variant else config.rouge.variant
    threshold = args.threshold if args.threshold is not None else config.rouge.threshold
    return RougeConfig(variant=variant, threshold=threshold)


def _dump_json(doc: dict | list, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _pairs_tsv(pairs) -> str:
    lines = ["train_id\teval_id\tscore"]
    lines.extend(f"{p.train_id}\t{p.eval_id}\t{p.score:.4f}" for p in pairs)
    return "\n".join(lines) + "\n"


def _cmd_split(args) -> int:
    config = _load_config(args.config)
    rouge_cfg = _rouge_from(args, config)
    stop = _STOP_FLAGS[args.stop] if args.stop else config.prune.stop_rule
    max_degree = args.max_degree if args.max_degree is not None else config.prune.max_eval_degree
    prune_cfg = PruneConfig(
        stop_rule=stop, max_eval_degree=max_degree, per_split_pools=config.prune.per_split_pools
    )
    job = splitgen.CgJob(input=_load_triple(args), rouge=rouge_cfg, prune=prune_cfg)
    result = splitgen.construct_cg_split(job, collect_pairs=args.dump_pairs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for tag, ds in zip(("train", "dev", "test"), result.output.datasets()):
        (out / f"{tag}.tsv").write_bytes(write_tsv(ds))
    _dump_json(splitgen.result_report_dict(result, job), str(out / "prune_report.json"))
    _dump_json(splitgen.result_stats_dict(result), str(out / "stats.json"))
    if args.dump_pairs:
        (out / "pairs.tsv").write_text(_pairs_tsv(result.pairs or ()), encoding="utf-8")
    pruned = result.report.iterations
    print(f"pruned {pruned} instance(s); outputs in {out}")
    return 0


def _cmd_pairs(args) -> int:
    config = _load_config(args.config)
    triple = _load_triple(args)
    pairs = pairwise_scores(
        triple.train,
        list(triple.dev.utterances) + list(triple.test.utterances),
        _rouge_from(args, config),
    )
    text = _pairs_tsv(pairs)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_sample_known(args) -> int:
    config = _load_config(args.config)
    ratio = args.ratio if args.ratio is not None else config.openset.known_ratio
    train = load_tsv(Path(args.train).read_bytes(), "train")
    known = sample_known_intents(train.intents, OpenTaskConfig(known_ratio=ratio, seed=args.seed))
    _dump_json(sorted(known), args.out)
    return 0


def _read_id_label_tsv(path: str) -> list[tuple[str, str]]:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != "id\tlabel":
        raise TsvFormatError(f"{path}: line 1: expected header 'id<TAB>label'")
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        fields = raw.rstrip("\r").split("\t")
        if len(fields) != 2:
            raise TsvFormatError(f"{path}: line {lineno}: expected 2 fields, got {len(fields)}")
        rows.append((fields[0], fields[1]))
    return rows


def _cmd_score(args) -> int:
    gold_rows = _read_id_label_tsv(args.gold)
    pred_rows = dict(_read_id_label_tsv(args.pred))
    if len(pred_rows) != len(gold_rows) or any(i not in pred_rows for i, _ in gold_rows):
        raise ValueError("prediction ids do not cover the gold ids exactly")
    known = json.loads(Path(args.known).read_text(encoding="utf-8"))
    metrics = compute_metrics(
        [label for _, label in gold_rows],
        [pred_rows[i] for i, _ in gold_rows],
        known,
    )
    _dump_json(metrics.to_dict(), args.out)
    return 0


def _cmd_augment(args) -> int:
    config = _load_config(args.config)
    settings = config.augment
    k = args.k if args.k is not None else (settings.k or _STRATEGIES[settings.strategy].k)
    endpoint = args.endpoint or settings.endpoint
    if not endpoint:
        raise ValueError("no endpoint configured (set augment.endpoint or pass --endpoint)")
    client = aug.LlmClientConfig(endpoint=endpoint, model=settings.model, temperature=settings.temperature)
    cache = aug.ParaphraseCache(args.cache_dir or settings.cache_dir)
    train = load_tsv(Path(args.train).read_bytes(), "train")
    sets = aug.generate_paraphrases(train.utterances, k, client, cache)
    augmented = aug.augment_dataset(train, sets)
    Path(args.out).write_bytes(write_tsv(augmented))
    print(f"augmented {len(train)} -> {len(augmented)} instances; wrote {args.out}")
    return 0


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    strategy_name = args.strategy or config.augment.strategy
    strategy = _STRATEGIES[strategy_name]
    if config.augment.k is not None:
        strategy = replace(strategy, k=config.augment.k)
    ratio = args.ratio if args.ratio is not None else config.openset.known_ratio
    seeds = [args.seed] if args.seed is not None else list(config.openset.seeds)
    if not seeds:
        raise ValueError("no seeds configured (openset.seeds is empty and --seed not given)")

    endpoint = args.endpoint or config.augment.endpoint
    if not endpoint:
        raise ValueError("no endpoint configured (set augment.endpoint or pass --endpoint)")
    client = aug.LlmClientConfig(
        endpoint=endpoint, model=config.augment.model, temperature=config.augment.temperature
    )
    source = aug.LlmParaphraseSource(client, aug.ParaphraseCache(config.augment.cache_dir))

    triple = _load_triple(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    per_seed = []
    for seed in seeds:
        task = make_open_task(triple, OpenTaskConfig(known_ratio=ratio, seed=seed))
        workdir = out / f"seed_{seed}"
        with TrainerProcess(args.trainer_cmd) as trainer:
            result = run_loop(
                task,
                LoopConfig(strategy=strategy, max_rounds=config.loop.max_rounds),
                trainer,
                source,
                workdir,
            )
        per_seed.append(result.test_metrics)
        print(
            f"seed {seed}: best round {result.state.best_round}, "
            f"dev acc {result.state.best_acc:.2f}, test acc_all {result.test_metrics.acc_all:.2f}"
        )

    summary = {
        "strategy": strategy_name,
        "known_ratio": ratio,
        "seeds": seeds,
        "per_seed": [m.to_dict() for m in per_seed],
        "mean": aggregate_runs(per_seed).mean.to_dict(),
    }
    _dump_json(summary, str(out / "experiment.json"))
    print(f"experiment summary written to {out / 'experiment.json'}")
    return 0


def _add_corpus_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--train", required=True, help="training split TSV")
    parser.add_argument("--dev", required=True, help="development split TSV")
    parser.add_argument("--test", required=True, help="test split TSV")


def _add_rouge_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threshold", type=float, default=None, help="similarity threshold")
    parser.add_argument("--variant", choices=sorted(_VARIANT_FLAGS), default=None, help="Rouge-L variant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgsplit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    split = sub.add_parser("split", help="construct a compositionally-diverse split")
    _add_corpus_flags(split)
    _add_rouge_flags(split)
    split.add_argument("--stop", choices=sorted(_STOP_FLAGS), default=None, help="pruning stop rule")
    split.add_argument("--max-degree", type=int, default=None, help="eval-side degree limit")
    split.add_argument("--out", required=True, help="output directory")
    split.add_argument("--dump-pairs", action="store_true", help="also write pairs.tsv")
    split.add_argument("--config", default=None, help="JSON config file")
    split.set_defaults(func=_cmd_split)

    pairs = sub.add_parser("pairs", help="dump above-threshold similarity pairs as TSV")
    _add_corpus_flags(pairs)
    _add_rouge_flags(pairs)
    pairs.add_argument("--out", default=None, help="output TSV (default: stdout)")
    pairs.add_argument("--config", default=None, help="JSON config file")
    pairs.set_defaults(func=_cmd_pairs)

    sample = sub.add_parser("sample-known", help="sample the known-intent set for a seed")
    sample.add_argument("--train", required=True, help="training split TSV")
    sample.add_argument("--ratio", type=float, default=None, help="known-intent ratio")
    sample.add_argument("--seed", type=int, required=True, help="sampling seed")
    sample.add_argument("--out", default=None, help="output JSON (default: stdout)")
    sample.add_argument("--config", default=None, help="JSON config file")
    sample.set_defaults(func=_cmd_sample_known)

    score = sub.add_parser("score", help="compute open-set metrics from prediction TSVs")
    score.add_argument("--gold", required=True, help="gold labels TSV (id, label)")
    score.add_argument("--pred", required=True, help="predicted labels TSV (id, label)")
    score.add_argument("--known", required=True, help="JSON array of known labels")
    score.add_argument("--out", default=None, help="output JSON (default: stdout)")
    score.set_defaults(func=_cmd_score)

    augment_p = sub.add_parser("augment", help="write a paraphrase-augmented training TSV")
    augment_p.add_argument("--train", required=True, help="training split TSV")
    augment_p.add_argument("--k", type=int, default=None, help="paraphrases per instance")
    augment_p.add_argument("--out", required=True, help="augmented TSV path")
    augment_p.add_argument("--endpoint", default=None, help="chat-completion endpoint URL")
    augment_p.add_argument("--cache-dir", default=None, help="paraphrase cache directory")
    augment_p.add_argument("--config", default=None, help="JSON config file")
    augment_p.set_defaults(func=_cmd_augment)

    run = sub.add_parser("run", help="run the augmentation training loop over seeds")
    _add_corpus_flags(run)
    run.add_argument("--trainer-cmd", required=True, help="trainer command line (shell-quoted)")
    run.add_argument("--strategy", choices=sorted(_STRATEGIES), default=None, help="augmentation strategy")
    run.add_argument("--ratio", type=float, default=None, help="known-intent ratio")
    run.add_argument("--seed", type=int, default=None, help="single seed (overrides config seeds)")
    run.add_argument("--endpoint", default=None, help="chat-completion endpoint URL")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--config", default=None, help="JSON config file")
    run.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
