"""Compositionally-diverse split construction, open-set evaluation, and
paraphrase-augmentation experiments for intent-labeled corpora."""

from .augment import (
    AugStrategy,
    LlmClientConfig,
    LlmParaphraseSource,
    ParaphraseCache,
    ParaphraseSet,
    augment_dataset,
    build_prompt,
    generate_paraphrases,
    parse_paraphrases,
    select_wrong_predictions,
)
from .corpus import (
    LabeledDataset,
    LabeledUtterance,
    SplitTriple,
    dataset_from_rows,
    intent_histogram,
    load_tsv,
    write_tsv,
)
from .openset import (
    Metrics,
    OpenTask,
    OpenTaskConfig,
    RunAggregate,
    aggregate_runs,
    compute_metrics,
    make_open_task,
    sample_known_intents,
)
from .rouge import PairScore, RougeConfig, lcs_length, pairwise_scores, rouge_l, tokenize
from .simgraph import (
    PruneConfig,
    PruneReport,
    SimilarityGraph,
    build_graph,
    prune,
    weighted_degree,
)
from .splitgen import CgJob, CgResult, construct_cg_split
from .trainloop import (
    LoopConfig,
    LoopResult,
    RoundState,
    TrainerProcess,
    heuristic_trainer,
    protocol_roundtrip,
    run_loop,
)

__version__ = "0.1.0"
