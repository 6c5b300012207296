"""Binary container for embedding matrices (.temb files).

Layout, little-endian throughout:

    offset  size  field
    ------  ----  -----------------------------------------
    0       4     magic, the ASCII bytes "TEMB"
    4       2     format version, uint16 (currently 1)
    6       1     dtype code, uint8 (0 = float32, 1 = float16)
    7       8     rows, uint64
    15      8     cols, uint64
    23      ...   payload, rows*cols elements, row-major

The header is a fixed 23 bytes.  The payload must be exactly
rows * cols * element_width bytes; files that are short or carry
trailing bytes are rejected.  float16 payloads are upcast to float32
in memory (all scoring happens in single precision or wider), but the
source dtype is remembered so saving the matrix again round-trips the
half-precision payload bit for bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from .errors import (
    BadMagicError,
    InvalidParamsError,
    IoFailureError,
    NonFiniteValueError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)

MAGIC = b"TEMB"
VERSION = 1
_HEADER = struct.Struct("<4sHBQQ")
HEADER_SIZE = _HEADER.size  # 23 bytes

_DTYPE_CODES = {"float32": 0, "float16": 1}
_CODE_INFO = {0: ("float32", np.dtype("<f4")), 1: ("float16", np.dtype("<f2"))}

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class TokenMatrix:
    """An N x d matrix of token embeddings, float32 in memory.

    ``source_dtype`` records the on-disk precision ("float32" or
    "float16"); ``meta`` carries incidental annotations (for example
    which rows a normalization pass left untouched) and is never
    serialized.
    """

    data: np.ndarray
    source_dtype: str = "float32"
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.data.ndim != 2:
            raise InvalidParamsError(
                f"token matrix must be 2-D, got shape {self.data.shape}"
            )
        if self.data.shape[1] < 1:
            raise InvalidParamsError("token matrix needs cols >= 1")
        if self.data.dtype != np.float32:
            raise InvalidParamsError(
                f"in-memory data must be float32, got {self.data.dtype}"
            )
        if self.source_dtype not in _DTYPE_CODES:
            raise UnsupportedDtypeError(
                f"unsupported source dtype {self.source_dtype!r}"
            )
        if self.data.size and not np.isfinite(self.data).all():
            idx = int(np.flatnonzero(~np.isfinite(self.data))[0])
            raise NonFiniteValueError(f"non-finite value at element {idx}")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_array(cls, arr, source_dtype: str = "float32") -> "TokenMatrix":
        """Build a matrix from any 2-D array-like, casting to float32."""
        data = np.ascontiguousarray(arr, dtype=np.float32)
        return cls(data=data, source_dtype=source_dtype)


def load_matrix(path: PathLike) -> TokenMatrix:
    """Load a .temb file, validating the header and every value.

    Raises BadMagicError / UnsupportedVersionError / UnsupportedDtypeError /
    TruncatedPayloadError / NonFiniteValueError with the offending byte
    offset or element index in the message; IoFailureError when the file
    cannot be read at all.
    """
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailureError(f"cannot read {path}: {exc}") from exc

    if len(blob) < HEADER_SIZE:
        raise TruncatedPayloadError(
            f"{path}: file is {len(blob)} bytes, header alone needs {HEADER_SIZE}"
        )
    magic, version, code, rows, cols = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r} at byte 0")
    if version != VERSION:
        raise UnsupportedVersionError(
            f"{path}: unsupported version {version} at byte 4"
        )
    if code not in _CODE_INFO:
        raise UnsupportedDtypeError(f"{path}: unknown dtype code {code} at byte 6")
    if cols < 1:
        raise InvalidParamsError(f"{path}: cols must be >= 1 (byte 15)")

    name, dt = _CODE_INFO[code]
    expected = rows * cols * dt.itemsize
    actual = len(blob) - HEADER_SIZE
    if actual != expected:
        raise TruncatedPayloadError(
            f"{path}: payload should be {expected} bytes for {rows}x{cols} "
            f"{name}, found {actual} (mismatch from byte {HEADER_SIZE + min(actual, expected)})"
        )

    raw = np.frombuffer(blob, dtype=dt, count=rows * cols, offset=HEADER_SIZE)
    if code == 1:
        raw = raw.astype(np.float32)
        raw.setflags(write=False)  # match the zero-copy float32 path
    values = raw.reshape(rows, cols)
    if values.size and not np.isfinite(values).all():
        idx = int(np.flatnonzero(~np.isfinite(values.ravel()))[0])
        raise NonFiniteValueError(
            f"{path}: non-finite value at element {idx} "
            f"(byte offset {HEADER_SIZE + idx * dt.itemsize})"
        )
    return TokenMatrix(data=values, source_dtype=name)


def save_matrix(m: TokenMatrix, path: PathLike) -> None:
    """Write a matrix as .temb; load_matrix() reproduces it bit-exactly."""
    code = _DTYPE_CODES[m.source_dtype]
    dt = _CODE_INFO[code][1]
    header = _HEADER.pack(MAGIC, VERSION, code, m.rows, m.cols)
    payload = np.ascontiguousarray(m.data, dtype=dt).tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc
