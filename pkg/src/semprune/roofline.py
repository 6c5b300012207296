"""Analytic prefill-cost model for a decoder-only transformer.

Given a model shape, a hardware profile, a token count n and a compute
datatype, this module estimates:

    prefill FLOPs       2 * n_params * n + 4 * n_layers * n^2 * hidden
                        (linear layers plus the two attention matmuls)
    weight bytes        n_params * bytes_per_element
    KV-cache bytes      2 * n_layers * n * n_kv_heads * head_dim * bytes
    activation bytes    per layer, the tensors each operator writes:
                        n * (8*hidden + 2*kv_dim + 3*intermediate)
                        + 2 * n^2 * n_heads elements
    prefill seconds     roofline: per operator class,
                        max(flops / peak_rate, bytes_moved / bandwidth),
                        summed over operators and layers, lm-head once

Memory figures are reported in decimal units (MB = 1e6, GB = 1e9).
Everything here is pure arithmetic on the profile structs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

from .errors import InvalidParamsError, IoFailureError

PathLike = Union[str, Path]


@dataclass(frozen=True)
class ModelProfile:
    """Decoder shape parameters; n_params excludes any vision tower."""

    name: str
    n_layers: int
    hidden: int
    n_heads: int
    n_kv_heads: int
    head_dim: int
    intermediate: int
    vocab: int
    n_params: int

    def __post_init__(self) -> None:
        counts = (self.n_layers, self.hidden, self.n_heads, self.n_kv_heads,
                  self.head_dim, self.intermediate, self.vocab, self.n_params)
        if any(c < 1 for c in counts):
            raise InvalidParamsError("all model profile counts must be >= 1")
        if self.hidden != self.n_heads * self.head_dim:
            raise InvalidParamsError(
                f"hidden ({self.hidden}) must equal n_heads * head_dim "
                f"({self.n_heads} * {self.head_dim})"
            )
        if self.n_heads % self.n_kv_heads:
            raise InvalidParamsError("n_kv_heads must divide n_heads")

    @property
    def kv_dim(self) -> int:
        return self.n_kv_heads * self.head_dim


@dataclass(frozen=True)
class HardwareProfile:
    name: str
    peak_flops_fp16: float
    peak_ops_int8: float
    mem_bandwidth: float

    def __post_init__(self) -> None:
        if min(self.peak_flops_fp16, self.peak_ops_int8, self.mem_bandwidth) <= 0:
            raise InvalidParamsError("hardware rates must be > 0")


_DTYPE_BYTES = {"fp16": 2, "int8": 1}


@dataclass(frozen=True)
class DType:
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in _DTYPE_BYTES:
            raise InvalidParamsError(
                f"unknown dtype {self.kind!r}, expected one of "
                f"{tuple(_DTYPE_BYTES)}"
            )

    @property
    def bytes_per_element(self) -> int:
        return _DTYPE_BYTES[self.kind]


@dataclass(frozen=True)
class EfficiencyReport:
    n_tokens: int
    flops_total: float
    weights_bytes: int
    kv_cache_bytes: int
    activation_bytes: int
    total_memory_bytes: int
    prefill_seconds: float


LLAVA_7B = ModelProfile(
    name="llava-7b",
    n_layers=32,
    hidden=4096,
    n_heads=32,
    n_kv_heads=32,
    head_dim=128,
    intermediate=11008,
    vocab=32000,
    n_params=6_740_000_000,
)

A100 = HardwareProfile(
    name="a100",
    peak_flops_fp16=312e12,
    peak_ops_int8=624e12,
    mem_bandwidth=2.039e12,
)

MODEL_PRESETS: Dict[str, ModelProfile] = {"llava-7b": LLAVA_7B}
HARDWARE_PRESETS: Dict[str, HardwareProfile] = {"a100": A100}


def kv_cache_bytes(profile: ModelProfile, n: int, dtype: DType) -> int:
    """Bytes of stored K and V for n cached tokens."""
    if n < 0:
        raise InvalidParamsError(f"token count must be >= 0, got {n}")
    return 2 * profile.n_layers * n * profile.kv_dim * dtype.bytes_per_element


def prefill_flops(profile: ModelProfile, n: int) -> int:
    """FLOPs of one forward pass over n tokens."""
    if n < 1:
        raise InvalidParamsError(f"token count must be >= 1, got {n}")
    return 2 * profile.n_params * n + 4 * profile.n_layers * n * n * profile.hidden


def weights_bytes(profile: ModelProfile, dtype: DType) -> int:
    return profile.n_params * dtype.bytes_per_element


def activation_bytes(profile: ModelProfile, n: int, dtype: DType) -> int:
    """Activation traffic: bytes written by each operator, summed over layers.

    Per layer the written tensors are two norms, the q/k/v and output
    projections, two residual adds, the gated-MLP intermediates and its
    down projection (linear in n), plus the raw and softmaxed attention
    score matrices (quadratic in n), so the total is strictly superlinear.
    """
    if n < 1:
        raise InvalidParamsError(f"token count must be >= 1, got {n}")
    linear = n * (8 * profile.hidden + 2 * profile.kv_dim + 3 * profile.intermediate)
    quadratic = 2 * n * n * profile.n_heads
    return profile.n_layers * (linear + quadratic) * dtype.bytes_per_element


def _peak_rate(hw: HardwareProfile, dtype: DType) -> float:
    return hw.peak_flops_fp16 if dtype.kind == "fp16" else hw.peak_ops_int8


def prefill_time(
    profile: ModelProfile, hw: HardwareProfile, n: int, dtype: DType
) -> float:
    """Roofline prefill latency in seconds for a length-n sequence."""
    if n < 1:
        raise InvalidParamsError(f"token count must be >= 1, got {n}")
    peak = _peak_rate(hw, dtype)
    bw = hw.mem_bandwidth
    b = dtype.bytes_per_element
    h, kv = profile.hidden, profile.kv_dim
    heads, inter, vocab = profile.n_heads, profile.intermediate, profile.vocab

    def op(flops: float, bytes_moved: float) -> float:
        return max(flops / peak, bytes_moved / bw)

    per_layer = (
        # qkv projections: weights + read hidden states + write q,k,v
        op(2 * n * h * (h + 2 * kv),
           b * (h * (h + 2 * kv) + n * h + n * (h + 2 * kv)))
        # attention matmuls: q @ k^T and scores @ v
        + op(4 * n * n * h,
             b * (2 * n * h + 2 * n * kv + 4 * n * n * heads))
        # output projection
        + op(2 * n * h * h, b * (h * h + 2 * n * h))
        # gated MLP: gate, up and down projections
        + op(6 * n * h * inter, b * (3 * h * inter + 2 * n * h + 3 * n * inter))
        # norms, residual adds, activation product: memory-bound elementwise
        + op(10 * n * h + 3 * n * inter, b * (10 * n * h + 3 * n * inter))
    )
    lm_head = op(2 * n * h * vocab, b * (h * vocab + n * h + n * vocab))
    return profile.n_layers * per_layer + lm_head


def efficiency_report(
    profile: ModelProfile,
    hw: HardwareProfile,
    n_visual_kept: int,
    n_text: int,
    dtype: DType,
) -> EfficiencyReport:
    """One cost-table row for a pruned sequence of visual + text tokens."""
    if n_visual_kept < 0 or n_text < 0:
        raise InvalidParamsError("token counts must be >= 0")
    n = n_visual_kept + n_text
    if n < 1:
        raise InvalidParamsError("need at least one token")
    w = weights_bytes(profile, dtype)
    kv = kv_cache_bytes(profile, n, dtype)
    act = activation_bytes(profile, n, dtype)
    return EfficiencyReport(
        n_tokens=n,
        flops_total=prefill_flops(profile, n),
        weights_bytes=w,
        kv_cache_bytes=kv,
        activation_bytes=act,
        total_memory_bytes=w + kv + act,
        prefill_seconds=prefill_time(profile, hw, n, dtype),
    )


def _parse_profile_file(path: PathLike) -> Dict[str, str]:
    """Read a 'key = value' config file, '#' starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailureError(f"cannot read profile {path}: {exc}") from exc
    fields: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParamsError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    return fields


def _build_model_profile(fields: Dict[str, str], default_name: str) -> ModelProfile:
    required = ("n_layers", "hidden", "n_heads", "n_kv_heads", "head_dim",
                "intermediate", "vocab", "n_params")
    missing = [k for k in required if k not in fields]
    if missing:
        raise InvalidParamsError(f"model profile missing keys: {missing}")
    ints = {k: int(float(fields[k])) for k in required}
    return ModelProfile(name=fields.get("name", default_name), **ints)


def _build_hardware_profile(
    fields: Dict[str, str], default_name: str
) -> HardwareProfile:
    required = ("peak_flops_fp16", "peak_ops_int8", "mem_bandwidth")
    missing = [k for k in required if k not in fields]
    if missing:
        raise InvalidParamsError(f"hardware profile missing keys: {missing}")
    return HardwareProfile(
        name=fields.get("name", default_name),
        **{k: float(fields[k]) for k in required},
    )


def load_model_profile(name_or_path: str) -> ModelProfile:
    """Resolve a preset name ("llava-7b") or a key=value profile file."""
    if name_or_path in MODEL_PRESETS:
        return MODEL_PRESETS[name_or_path]
    if not Path(name_or_path).exists():
        raise InvalidParamsError(
            f"unknown model profile {name_or_path!r}: not a preset "
            f"{tuple(MODEL_PRESETS)} and no such file"
        )
    fields = _parse_profile_file(name_or_path)
    return _build_model_profile(fields, Path(name_or_path).stem)


def load_hardware_profile(name_or_path: str) -> HardwareProfile:
    """Resolve a preset name ("a100") or a key=value profile file."""
    if name_or_path in HARDWARE_PRESETS:
        return HARDWARE_PRESETS[name_or_path]
    if not Path(name_or_path).exists():
        raise InvalidParamsError(
            f"unknown hardware profile {name_or_path!r}: not a preset "
            f"{tuple(HARDWARE_PRESETS)} and no such file"
        )
    fields = _parse_profile_file(name_or_path)
    return _build_hardware_profile(fields, Path(name_or_path).stem)
