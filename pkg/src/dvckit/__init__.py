"""Dense video captioning evaluation, task-chain dataset construction, and
metric-ranked preference optimization tooling."""

from .core import (
    Conversation,
    CorpusParseError,
    Event,
    ParsedResponse,
    PredictionSet,
    ResponseGrammarError,
    Speaker,
    TaskKind,
    TimeInterval,
    Turn,
    VideoAnnotation,
    parse_annotations,
    parse_predictions,
    parse_response_text,
)
from .cotasks import (
    CtDatasetConfig,
    PathKind,
    build_ct_dataset,
    inference_prompts,
    quantize_time,
    render_auxiliary_sample,
    render_cotasks_sample,
)
from .dvceval import (
    EvalConfig,
    SodaResult,
    count_diagnostics,
    dvc_tiou_metric,
    evaluate_dvc_corpus,
    evaluate_tvg_corpus,
    interval_iou,
    mean_iou,
    recall_at_k,
    soda_alignment,
    soda_c,
)
from .mdpo_data import (
    PreferencePair,
    SampledTaskResponses,
    build_preference_pairs,
    score_response,
    summarize_pair_stats,
)
from .mdpo_objective import (
    LossBatchResult,
    ObjectiveMode,
    PairLikelihoods,
    batch_loss,
    likelihood_ratio,
    pair_loss,
    response_loglik,
)
from .textsim import (
    DocFreqTable,
    MeteorParams,
    build_document_frequencies,
    cider_score,
    meteor_score,
    tokenize,
)
from .toylab import (
    MarginCurve,
    ToyPolicy,
    build_toy_pairs,
    run_margin_experiment,
    synthetic_corpus,
    toy_loglik,
)

__version__ = "0.1.0"
