"""Query-driven visual-token pruning with an analytical inference-cost model.

The library selects the visual tokens most relevant to a text query
(treating the visual embeddings as a small vector database), assembles
the pruned multimodal sequence, and estimates what the reduction buys
at inference time via a roofline cost model.
"""

from .errors import (
    BadMagicError,
    DimensionMismatchError,
    EmptyInputError,
    EmptyScoresError,
    EmptyTruthError,
    IndexOutOfRangeError,
    InvalidParamsError,
    IoFailureError,
    MismatchedUniverseError,
    NonFiniteValueError,
    SempruneError,
    TembFormatError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)
from .evaluate import (
    Fixture,
    SplitMix64,
    gen_fixture,
    load_truth,
    oracle_select,
    recall_at_k,
    save_fixture,
    selection_overlap,
)
from .roofline import (
    A100,
    LLAVA_7B,
    DType,
    EfficiencyReport,
    HardwareProfile,
    ModelProfile,
    activation_bytes,
    efficiency_report,
    kv_cache_bytes,
    load_hardware_profile,
    load_model_profile,
    prefill_flops,
    prefill_time,
    weights_bytes,
)
from .selection import (
    ProjectionSpec,
    PruneResult,
    SelectionSpec,
    apply_projection,
    assemble_sequence,
    ratio_to_k,
    select_threshold,
    select_topk,
)
from .similarity import (
    AGGREGATIONS,
    METRIC_KINDS,
    Metric,
    ScoreVector,
    normalize_rows,
    pairwise_scores,
    score_tokens,
)
from .tensorio import HEADER_SIZE, TokenMatrix, load_matrix, save_matrix

__version__ = "0.1.0"

__all__ = [
    "A100",
    "AGGREGATIONS",
    "BadMagicError",
    "DType",
    "DimensionMismatchError",
    "EfficiencyReport",
    "EmptyInputError",
    "EmptyScoresError",
    "EmptyTruthError",
    "Fixture",
    "HardwareProfile",
    "HEADER_SIZE",
    "IndexOutOfRangeError",
    "InvalidParamsError",
    "IoFailureError",
    "LLAVA_7B",
    "METRIC_KINDS",
    "Metric",
    "MismatchedUniverseError",
    "ModelProfile",
    "NonFiniteValueError",
    "ProjectionSpec",
    "PruneResult",
    "ScoreVector",
    "SelectionSpec",
    "SempruneError",
    "SplitMix64",
    "TembFormatError",
    "TokenMatrix",
    "TruncatedPayloadError",
    "UnsupportedDtypeError",
    "UnsupportedVersionError",
    "activation_bytes",
    "apply_projection",
    "assemble_sequence",
    "efficiency_report",
    "gen_fixture",
    "kv_cache_bytes",
    "load_hardware_profile",
    "load_matrix",
    "load_model_profile",
    "load_truth",
    "normalize_rows",
    "oracle_select",
    "pairwise_scores",
    "prefill_flops",
    "prefill_time",
    "ratio_to_k",
    "recall_at_k",
    "save_fixture",
    "save_matrix",
    "score_tokens",
    "select_threshold",
    "select_topk",
    "selection_overlap",
    "weights_bytes",
]
