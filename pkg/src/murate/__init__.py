"""Multilingual document-quality rating and token-budget corpus selection."""

from .corpus import Corpus, Document, count_tokens, load_corpus, save_corpus, tokenize
from .errors import CheckpointError, MurateError, ParseError, ValidationError
from .raters import (
    DirectionalJudgment,
    PairJudgment,
    RaterScoreRecord,
    aggregate_directional,
    aggregate_pair,
    margin_filter,
)
from .pairgen import (
    FileTranslator,
    MixResult,
    PairMixSpec,
    PseudoTranslator,
    build_mix,
    make_parallel,
    project_crosslingual,
    project_monolingual,
)
from .scorer import (
    ScorerState,
    TrainingConfig,
    evaluate_accuracy,
    gradient,
    load_checkpoint,
    pairwise_loss,
    parallel_loss,
    save_checkpoint,
    score,
    total_loss,
    train,
)
from .select import (
    ScoredDocument,
    SelectionManifest,
    overlap_fraction,
    score_corpus,
    select_top_fraction,
)
from .diagnostics import kendall_tau, margin_accuracy_report, parallel_regression, tau_matrix

__version__ = "0.1.0"
