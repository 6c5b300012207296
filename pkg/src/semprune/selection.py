"""Turning relevance scores into a kept-token set and a pruned sequence.

Three keep policies: top-k, a reduction ratio converted to k with
ceil(n * (1 - r)), and an inclusive score threshold.  Ties break toward
the lower original index, and kept tokens are always reported and
assembled in ascending original position so the host model's positional
semantics survive pruning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyScoresError,
    IndexOutOfRangeError,
    InvalidParamsError,
)
from .similarity import Metric, ScoreVector
from .tensorio import TokenMatrix

POLICIES = ("topk", "ratio", "threshold")
LAYOUTS = ("visual_then_text", "text_then_visual")
PLACEMENTS = ("pre", "post")


@dataclass(frozen=True)
class SelectionSpec:
    """Which of topk/ratio/threshold is active, plus scoring config."""

    policy: str
    value: float
    metric: Metric = Metric("linf")
    aggregation: str = "mean"

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise InvalidParamsError(
                f"unknown policy {self.policy!r}, expected one of {POLICIES}"
            )
        if self.policy == "topk" and (self.value < 1 or self.value != int(self.value)):
            raise InvalidParamsError(f"topk needs an integer k >= 1, got {self.value}")
        if self.policy == "ratio" and not (0.0 <= self.value < 1.0):
            raise InvalidParamsError(f"ratio must be in [0, 1), got {self.value}")
        if self.policy == "threshold" and not math.isfinite(self.value):
            raise InvalidParamsError("threshold must be finite")


@dataclass(frozen=True, eq=False)
class PruneResult:
    """Kept original indices (unique, ascending) with their scores."""

    kept: np.ndarray
    scores: np.ndarray
    n_original: int
    spec: SelectionSpec

    def __post_init__(self) -> None:
        kept = self.kept
        if kept.size:
            if kept.min() < 0 or kept.max() >= self.n_original:
                raise IndexOutOfRangeError(
                    f"kept indices must lie in [0, {self.n_original})"
                )
            if not (np.diff(kept) > 0).all():
                raise InvalidParamsError("kept indices must be strictly ascending")
        if kept.shape != self.scores.shape:
            raise InvalidParamsError("kept and scores must align")


@dataclass(frozen=True, eq=False)
class ProjectionSpec:
    """Row-wise affine map x -> x @ weight + bias.

    ``placement`` records whether the map is applied to the whole visual
    matrix before retrieval ("pre", the default: the database is already
    in the language embedding space) or only to the kept rows afterwards
    ("post").
    """

    weight: np.ndarray
    bias: Optional[np.ndarray] = None
    placement: str = "pre"

    def __post_init__(self) -> None:
        if self.weight.ndim != 2:
            raise InvalidParamsError("projection weight must be 2-D")
        if self.bias is not None and self.bias.shape != (self.weight.shape[1],):
            raise DimensionMismatchError(
                f"bias shape {self.bias.shape} does not match output dim "
                f"{self.weight.shape[1]}"
            )
        if self.placement not in PLACEMENTS:
            raise InvalidParamsError(
                f"unknown placement {self.placement!r}, expected one of {PLACEMENTS}"
            )


def ratio_to_k(n: int, r: float) -> int:
    """Retained count for a reduction ratio: ceil(n * (1 - r)), at least 1.

    A 1e-9 guard absorbs float noise so products that are an integer in
    exact arithmetic never get bumped to the next one (e.g. 5 * 0.8).
    """
    if n < 1:
        raise InvalidParamsError(f"token count must be >= 1, got {n}")
    if not (0.0 <= r < 1.0):
        raise InvalidParamsError(f"reduction ratio must be in [0, 1), got {r}")
    return max(1, math.ceil(n * (1.0 - r) - 1e-9))


def select_topk(scores: ScoreVector, k: int) -> PruneResult:
    """Keep the min(k, N) highest-relevance tokens, ties to lower index."""
    if k < 1:
        raise InvalidParamsError(f"k must be >= 1, got {k}")
    s = scores.scores
    n = s.shape[0]
    if n == 0:
        raise EmptyScoresError("cannot select from an empty score vector")
    # Stable sort on negated scores: descending relevance, ties by index.
    order = np.argsort(-s, kind="stable")[: min(k, n)]
    kept = np.sort(order)
    return PruneResult(
        kept=kept.astype(np.int64),
        scores=s[kept],
        n_original=n,
        spec=SelectionSpec("topk", float(k), scores.metric, scores.aggregation),
    )


def select_threshold(scores: ScoreVector, tau: float) -> PruneResult:
    """Keep every token whose score is >= tau (inclusive); may be empty."""
    if not math.isfinite(tau):
        raise InvalidParamsError("tau must be finite")
    s = scores.scores
    kept = np.flatnonzero(s >= tau).astype(np.int64)
    return PruneResult(
        kept=kept,
        scores=s[kept],
        n_original=s.shape[0],
        spec=SelectionSpec("threshold", float(tau), scores.metric,
                           scores.aggregation),
    )


def apply_projection(m: TokenMatrix, proj: ProjectionSpec) -> TokenMatrix:
    """Map every row through x @ W + b; output has W's output width."""
    if m.cols != proj.weight.shape[0]:
        raise DimensionMismatchError(
            f"matrix cols {m.cols} != projection input dim {proj.weight.shape[0]}"
        )
    w = proj.weight.astype(np.float64)
    # einsum keeps a fixed accumulation order (no BLAS dispatch), so the
    # result is independent of thread count.
    out = np.einsum("nd,de->ne", m.data.astype(np.float64), w)
    if proj.bias is not None:
        out = out + proj.bias.astype(np.float64)
    return TokenMatrix(data=out.astype(np.float32), source_dtype="float32")


def assemble_sequence(
    visual: TokenMatrix,
    text: TokenMatrix,
    result: PruneResult,
    layout: str = "visual_then_text",
) -> TokenMatrix:
    """Concatenate the kept visual rows with the text block, bit-exactly."""
    if layout not in LAYOUTS:
        raise InvalidParamsError(
            f"unknown layout {layout!r}, expected one of {LAYOUTS}"
        )
    if visual.cols != text.cols:
        raise DimensionMismatchError(
            f"visual cols {visual.cols} != text cols {text.cols}"
        )
    if result.n_original != visual.rows:
        raise IndexOutOfRangeError(
            f"prune result covers {result.n_original} tokens, "
            f"visual matrix has {visual.rows}"
        )
    kept_rows = visual.data[result.kept]
    blocks = (
        (kept_rows, text.data)
        if layout == "visual_then_text"
        else (text.data, kept_rows)
    )
    return TokenMatrix(data=np.concatenate(blocks, axis=0), source_dtype="float32")
