"""Planted-truth fixtures, retrieval quality metrics, and a brute-force oracle.

Real benchmark accuracies need full model inference, so correctness is
checked instead on synthetic embedding sets whose relevant subset is
known by construction, plus exhaustive comparison against a naive
reference selector.

Fixture randomness comes from a small, fully specified generator so any
implementation of the same recipe reproduces the files byte for byte:

SplitMix64 (all arithmetic mod 2^64):

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    output = z ^ (z >> 31)

Derived draws:

    uniform float  - output >> 11, times 2^-53, in [0, 1)
    integer < n    - rejection sampling on the top multiple of n,
                     then output % n
    gaussian       - Box-Muller on (1 - u1, u2); the pair is produced
                     together and the second value is cached

Fixture draw order (documented so it can be replicated exactly):
Fisher-Yates shuffle picking the relevant index set, one integer draw
for the offset axis, then the visual rows in index order (d gaussians
each), then the text rows.  Relevant visual tokens and text tokens
cluster around the origin with unit std; distractors sit around a
center ``separation`` away along the drawn axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Optional, Set, Tuple, Union

import numpy as np
from numba import njit

from .errors import (
    EmptyTruthError,
    InvalidParamsError,
    IoFailureError,
    MismatchedUniverseError,
)
from .selection import PruneResult, SelectionSpec
from .similarity import AGGREGATIONS, Metric
from .tensorio import TokenMatrix, save_matrix

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """The fixed fixture RNG; see the module docstring for the algorithm."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64
        self._spare: Optional[float] = None

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def next_below(self, n: int) -> int:
        if n < 1:
            raise InvalidParamsError(f"next_below needs n >= 1, got {n}")
        bound = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            x = self.next_u64()
            if x < bound:
                return x % n

    def next_gauss(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.next_float()  # in (0, 1], keeps log() finite
        u2 = self.next_float()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True, eq=False)
class Fixture:
    """Synthetic retrieval instance with known relevant visual tokens."""

    visual: TokenMatrix
    text: TokenMatrix
    relevant: Tuple[int, ...]
    seed: int
    separation: float


def gen_fixture(
    n_visual: int,
    n_text: int,
    d: int,
    n_relevant: int,
    separation: float,
    seed: int,
) -> Fixture:
    """Deterministic planted-cluster fixture; see module docstring."""
    if n_visual < 1 or n_text < 1:
        raise InvalidParamsError("n_visual and n_text must be >= 1")
    if d < 2:
        raise InvalidParamsError(f"dimension must be >= 2, got {d}")
    if not 0 <= n_relevant <= n_visual:
        raise InvalidParamsError(
            f"n_relevant must be in [0, n_visual={n_visual}], got {n_relevant}"
        )
    if separation < 0:
        raise InvalidParamsError(f"separation must be >= 0, got {separation}")

    rng = SplitMix64(seed)
    order = list(range(n_visual))
    rng.shuffle(order)
    relevant = tuple(sorted(order[:n_relevant]))
    relevant_set = set(relevant)
    axis = rng.next_below(d)

    visual = np.empty((n_visual, d), dtype=np.float64)
    for i in range(n_visual):
        offset = 0.0 if i in relevant_set else separation
        for j in range(d):
            visual[i, j] = rng.next_gauss() + (offset if j == axis else 0.0)
    text = np.empty((n_text, d), dtype=np.float64)
    for i in range(n_text):
        for j in range(d):
            text[i, j] = rng.next_gauss()

    return Fixture(
        visual=TokenMatrix.from_array(visual),
        text=TokenMatrix.from_array(text),
        relevant=relevant,
        seed=seed,
        separation=separation,
    )


def save_fixture(fix: Fixture, prefix: Union[str, Path]) -> Dict[str, str]:
    """Write <prefix>.visual.temb, <prefix>.text.temb and <prefix>.truth.json."""
    prefix = Path(prefix)
    paths = {
        "visual": str(prefix.with_name(prefix.name + ".visual.temb")),
        "text": str(prefix.with_name(prefix.name + ".text.temb")),
        "truth": str(prefix.with_name(prefix.name + ".truth.json")),
    }
    save_matrix(fix.visual, paths["visual"])
    save_matrix(fix.text, paths["text"])
    truth = {
        "seed": fix.seed,
        "separation": fix.separation,
        "n_visual": fix.visual.rows,
        "n_text": fix.text.rows,
        "d": fix.visual.cols,
        "n_relevant": len(fix.relevant),
        "relevant": list(fix.relevant),
    }
    try:
        Path(paths["truth"]).write_text(json.dumps(truth, indent=2) + "\n")
    except OSError as exc:
        raise IoFailureError(f"cannot write {paths['truth']}: {exc}") from exc
    return paths


def load_truth(path: Union[str, Path]) -> Dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoFailureError(f"cannot read {path}: {exc}") from exc


def recall_at_k(result: PruneResult, truth: Iterable[int]) -> float:
    """Fraction of the ground-truth relevant set that was kept."""
    truth_set: Set[int] = set(int(i) for i in truth)
    if not truth_set:
        raise EmptyTruthError("ground-truth set is empty")
    kept = set(int(i) for i in result.kept)
    return len(kept & truth_set) / len(truth_set)


def selection_overlap(a: PruneResult, b: PruneResult) -> float:
    """Jaccard index of two kept sets over the same token universe."""
    if a.n_original != b.n_original:
        raise MismatchedUniverseError(
            f"results cover different universes: {a.n_original} vs {b.n_original}"
        )
    sa = set(int(i) for i in a.kept)
    sb = set(int(i) for i in b.kept)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


# --- naive reference selector ------------------------------------------
# Deliberately independent of the similarity module: explicit per-element
# loops with plain left-to-right accumulation, compiled with numba only
# so exhaustive comparisons finish quickly.  No vectorized numpy, no
# shared scoring code.

_L1, _L2, _LP, _INNER, _LINF = 0, 1, 2, 3, 4
_KIND_CODES = {"l1": _L1, "l2": _L2, "lp": _LP, "inner_product": _INNER,
               "linf": _LINF}


@njit(cache=False)
def _naive_table(db, queries, kind, p):  # pragma: no cover - compiled
    m = queries.shape[0]
    n = db.shape[0]
    d = db.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    for j in range(m):
        for i in range(n):
            if kind == 3:  # inner product
                acc = 0.0
                for t in range(d):
                    acc += db[i, t] * queries[j, t]
                out[j, i] = acc
            elif kind == 4:  # chebyshev
                best = 0.0
                for t in range(d):
                    diff = abs(db[i, t] - queries[j, t])
                    if diff > best:
                        best = diff
                out[j, i] = -best
            elif kind == 0:  # manhattan
                acc = 0.0
                for t in range(d):
                    acc += abs(db[i, t] - queries[j, t])
                out[j, i] = -acc
            elif kind == 1:  # euclidean
                acc = 0.0
                for t in range(d):
                    diff = db[i, t] - queries[j, t]
                    acc += diff * diff
                out[j, i] = -np.sqrt(acc)
            else:  # minkowski
                acc = 0.0
                for t in range(d):
                    acc += abs(db[i, t] - queries[j, t]) ** p
                out[j, i] = -(acc ** (1.0 / p))
    return out


def oracle_select(
    db: TokenMatrix,
    queries: TokenMatrix,
    metric: Metric,
    aggregation: str,
    k: int,
) -> PruneResult:
    """Reference top-k: naive scoring plus a full stable sort."""
    if aggregation not in AGGREGATIONS:
        raise InvalidParamsError(f"unknown aggregation {aggregation!r}")
    if db.cols != queries.cols:
        raise InvalidParamsError(
            f"db has {db.cols} cols, queries have {queries.cols}"
        )
    if db.rows == 0 or queries.rows == 0:
        raise InvalidParamsError("oracle needs non-empty inputs")
    if k < 1:
        raise InvalidParamsError(f"k must be >= 1, got {k}")

    d64 = db.data.astype(np.float64)
    q64 = queries.data.astype(np.float64)
    kind = _KIND_CODES[metric.kind]

    if aggregation == "mean":
        mean_q = np.empty((1, db.cols), dtype=np.float64)
        for j in range(db.cols):
            acc = 0.0
            for i in range(queries.rows):
                acc += q64[i, j]
            mean_q[0, j] = acc / queries.rows
        scores = _naive_table(d64, mean_q, kind, metric.p)[0]
    else:
        table = _naive_table(d64, q64, kind, metric.p)
        scores = np.empty(db.rows, dtype=np.float64)
        for i in range(db.rows):
            if aggregation == "best":
                best = table[0, i]
                for j in range(1, queries.rows):
                    if table[j, i] > best:
                        best = table[j, i]
                scores[i] = best
            else:
                acc = 0.0
                for j in range(queries.rows):
                    acc += table[j, i]
                scores[i] = acc

    ranked = sorted(range(db.rows), key=lambda i: (-scores[i], i))
    kept = np.array(sorted(ranked[: min(k, db.rows)]), dtype=np.int64)
    return PruneResult(
        kept=kept,
        scores=scores[kept],
        n_original=db.rows,
        spec=SelectionSpec("topk", float(k), metric, aggregation),
    )
