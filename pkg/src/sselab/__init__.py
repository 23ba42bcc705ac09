"""sselab: leakage simulation and query-recovery attacks for SSE schemes."""

from .attack import (
    Assignment,
    AttackConfig,
    CostMatrix,
    combine,
    cost_freq,
    cost_vol_clrz,
    cost_vol_plain,
    cost_vol_ppyy,
    cost_vol_seal,
    liu_attack,
    sap_attack,
    solve_assignment,
)
from .corpus import (
    AuxKnowledge,
    Corpus,
    Document,
    InvertedIndex,
    KeywordUniverse,
    build_index,
    build_universe,
    compute_aux,
    extract_keywords,
    split_corpus,
    synth_corpus,
)
from .harness import (
    ExperimentConfig,
    RunResult,
    SyntheticCorpusSpec,
    aggregate,
    run_once,
    run_suite,
    unweighted_accuracy,
    weighted_accuracy,
)
from .leakage import (
    AccessPattern,
    DefenseConfig,
    ObservationSequence,
    TagTable,
    obfuscate_index_clrz,
    overhead_percent,
    seal_pattern,
    setup_ppyy_volumes,
    simulate,
    tag_observations,
)
from .trends import (
    QueryLog,
    QueryRate,
    TrendMatrix,
    TrendTable,
    generate_queries,
    load_trends,
    offset_view,
    synth_trends,
)

__version__ = "0.1.0"

__all__ = [
    "AccessPattern",
    "Assignment",
    "AttackConfig",
    "AuxKnowledge",
    "Corpus",
    "CostMatrix",
    "DefenseConfig",
    "Document",
    "ExperimentConfig",
    "InvertedIndex",
    "KeywordUniverse",
    "ObservationSequence",
    "QueryLog",
    "QueryRate",
    "RunResult",
    "SyntheticCorpusSpec",
    "TagTable",
    "TrendMatrix",
    "TrendTable",
    "aggregate",
    "build_index",
    "build_universe",
    "combine",
    "compute_aux",
    "cost_freq",
    "cost_vol_clrz",
    "cost_vol_plain",
    "cost_vol_ppyy",
    "cost_vol_seal",
    "extract_keywords",
    "generate_queries",
    "liu_attack",
    "load_trends",
    "obfuscate_index_clrz",
    "offset_view",
    "overhead_percent",
    "run_once",
    "run_suite",
    "sap_attack",
    "seal_pattern",
    "setup_ppyy_volumes",
    "simulate",
    "solve_assignment",
    "split_corpus",
    "synth_corpus",
    "synth_trends",
    "tag_observations",
    "unweighted_accuracy",
    "weighted_accuracy",
]
