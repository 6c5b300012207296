"""In-process host binding for semprune.

Lets a host pipeline prune visual tokens on in-memory embedding buffers
and query the cost model without any file round-trips.  Results are
identical to the ``semprune`` CLI on the same data: kept indices match
bit for bit, scores to within 1e-6, and ``analyze`` returns the same
field-for-field mapping as the CLI's structured output rows.

Buffers must be 2-D float32; a C-contiguous array is ingested without
copying, anything else contiguous-izes with a warning.  Hosts holding
float64 or half-precision data downcast or upcast explicitly.  Calls
are stateless and safe from concurrent threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

import semprune
from semprune import (
    DimensionMismatchError,
    DType,
    EmptyInputError,
    HardwareProfile,
    InvalidParamsError,
    Metric,
    ModelProfile,
    SempruneError,
    TokenMatrix,
    efficiency_report,
    load_hardware_profile,
    load_model_profile,
    ratio_to_k,
    score_tokens,
    select_threshold,
    select_topk,
)

__version__ = "0.1.0"

__all__ = [
    "BufferView",
    "analyze",
    "as_buffer_view",
    "prune",
    # re-exported error types so hosts can catch without importing the core
    "DimensionMismatchError",
    "EmptyInputError",
    "InvalidParamsError",
    "SempruneError",
]

assert __version__ == semprune.__version__, "binding/core version skew"


@dataclass(frozen=True, eq=False)
class BufferView:
    """A validated, row-major float32 view over host memory."""

    array: np.ndarray

    @property
    def rows(self) -> int:
        return self.array.shape[0]

    @property
    def cols(self) -> int:
        return self.array.shape[1]


def as_buffer_view(buf) -> BufferView:
    """Wrap a host buffer; zero-copy when it is already C-contiguous float32."""
    arr = np.asarray(buf)
    if arr.ndim != 2:
        raise InvalidParamsError(f"buffer must be 2-D, got shape {arr.shape}")
    if arr.dtype != np.float32:
        raise InvalidParamsError(
            f"buffer must be float32, got {arr.dtype}; convert explicitly"
        )
    if not arr.flags.c_contiguous:
        warnings.warn(
            "non-contiguous buffer ingested: data was copied to row-major layout",
            stacklevel=3,
        )
        arr = np.ascontiguousarray(arr)
    return BufferView(array=arr)


def _policy(k: Optional[int], ratio: Optional[float], tau: Optional[float],
            n_rows: int):
    given = [name for name, value in (("k", k), ("ratio", ratio), ("tau", tau))
             if value is not None]
    if len(given) != 1:
        raise InvalidParamsError(
            f"exactly one of k/ratio/tau must be given, got {given or 'none'}"
        )
    if k is not None:
        return ("topk", int(k))
    if ratio is not None:
        return ("topk", ratio_to_k(n_rows, ratio))
    return ("threshold", float(tau))


def prune(
    visual,
    text,
    metric: str = "linf",
    k: Optional[int] = None,
    ratio: Optional[float] = None,
    tau: Optional[float] = None,
    aggregation: str = "mean",
    p: float = 3.0,
) -> Tuple[List[int], List[float]]:
    """Select visual tokens against the text query, in memory.

    Returns (kept original indices in ascending order, score per kept
    index).  Exactly one of k / ratio / tau selects the keep policy.
    """
    v = as_buffer_view(visual)
    t = as_buffer_view(text)
    db = TokenMatrix(data=v.array)
    queries = TokenMatrix(data=t.array)
    scores = score_tokens(db, queries, Metric(metric, p=p), aggregation)
    kind, value = _policy(k, ratio, tau, db.rows)
    if kind == "topk":
        result = select_topk(scores, value)
    else:
        result = select_threshold(scores, value)
    return [int(i) for i in result.kept], [float(s) for s in result.scores]


def _resolve_model(model: Union[str, Mapping]) -> ModelProfile:
    if isinstance(model, str):
        return load_model_profile(model)
    fields = dict(model)
    name = fields.pop("name", "custom")
    try:
        return ModelProfile(name=name, **{key: int(value)
                                          for key, value in fields.items()})
    except TypeError as exc:
        raise InvalidParamsError(f"incomplete model profile mapping: {exc}") from exc


def _resolve_hardware(hw: Union[str, Mapping]) -> HardwareProfile:
    if isinstance(hw, str):
        return load_hardware_profile(hw)
    fields = dict(hw)
    name = fields.pop("name", "custom")
    try:
        return HardwareProfile(name=name, **{key: float(value)
                                             for key, value in fields.items()})
    except TypeError as exc:
        raise InvalidParamsError(f"incomplete hardware profile mapping: {exc}") from exc


def analyze(
    model: Union[str, Mapping],
    hw: Union[str, Mapping],
    n_visual: int,
    n_text: int,
    dtype: str,
) -> Dict:
    """One cost-report row, same fields as the CLI's structured output."""
    profile = _resolve_model(model)
    hardware = _resolve_hardware(hw)
    rep = efficiency_report(profile, hardware, n_visual, n_text, DType(dtype))
    return {
        "config": f"{n_visual}v+{n_text}t",
        "n_visual": n_visual,
        "n_text": n_text,
        "n_tokens": rep.n_tokens,
        "dtype": dtype,
        "flops_total": rep.flops_total,
        "weights_bytes": rep.weights_bytes,
        "kv_cache_bytes": rep.kv_cache_bytes,
        "activation_bytes": rep.activation_bytes,
        "total_memory_bytes": rep.total_memory_bytes,
        "prefill_seconds": rep.prefill_seconds,
    }
