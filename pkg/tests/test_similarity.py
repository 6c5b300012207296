import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semprune import (
    DimensionMismatchError,
    EmptyInputError,
    InvalidParamsError,
    Metric,
    TokenMatrix,
    normalize_rows,
    pairwise_scores,
    score_tokens,
)

ALL_METRICS = [Metric("l1"), Metric("l2"), Metric("lp", p=3.0),
               Metric("inner_product"), Metric("linf")]
DISTANCE_METRICS = [m for m in ALL_METRICS if m.is_distance]


def tm(arr):
    return TokenMatrix.from_array(arr)


def naive_relevance(db_row, q_row, metric):
    """Plain-Python single-pair reference, written against the contract."""
    if metric.kind == "inner_product":
        acc = 0.0
        for a, b in zip(db_row, q_row):
            acc += float(a) * float(b)
        return acc
    if metric.kind == "linf":
        return -max(abs(float(a) - float(b)) for a, b in zip(db_row, q_row))
    acc = 0.0
    for a, b in zip(db_row, q_row):
        diff = abs(float(a) - float(b))
        if metric.kind == "l1":
            acc += diff
        elif metric.kind == "l2":
            acc += diff * diff
        else:
            acc += diff ** metric.p
    if metric.kind == "l1":
        return -acc
    if metric.kind == "l2":
        return -acc ** 0.5
    return -acc ** (1.0 / metric.p)


# --- spec examples ---------------------------------------------------------

def test_inner_product_on_basis_rows():
    db = tm(np.eye(3))
    q = tm([[0.0, 1.0, 0.0]])
    table = pairwise_scores(db, q, Metric("inner_product"))
    assert np.allclose(table, [[0.0, 1.0, 0.0]])


def test_l2_score_of_identical_vector_is_zero_and_maximal():
    db = tm([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    q = tm([[1.0, 2.0, 3.0]])
    table = pairwise_scores(db, q, Metric("l2"))
    assert table[0, 0] == 0.0
    assert table[0, 0] == table.max()


def test_linf_hand_example():
    db = tm([[1.0, 2.0], [3.0, 1.0]])
    q = tm([[3.0, 3.0]])
    table = pairwise_scores(db, q, Metric("linf"))
    assert np.allclose(table, [[-2.0, -2.0]])


def test_lp_hand_example():
    db = tm([[0.0, 0.0]])
    q = tm([[1.0, 1.0]])
    table = pairwise_scores(db, q, Metric("lp", p=3.0))
    assert table[0, 0] == pytest.approx(-(2.0 ** (1.0 / 3.0)), abs=1e-9)
    assert table[0, 0] == pytest.approx(-1.2599, abs=1e-4)


def test_meanpool_of_duplicate_queries_matches_single_query():
    rng = np.random.default_rng(0)
    db = tm(rng.normal(size=(10, 6)).astype(np.float32))
    q = rng.normal(size=(1, 6)).astype(np.float32)
    dup = tm(np.vstack([q, q]))
    for metric in ALL_METRICS:
        one = score_tokens(db, tm(q), metric, "mean").scores
        two = score_tokens(db, dup, metric, "mean").scores
        assert np.array_equal(one, two), metric.kind


def test_single_row_queries_make_aggregations_agree():
    rng = np.random.default_rng(1)
    db = tm(rng.normal(size=(12, 5)).astype(np.float32))
    q = tm(rng.normal(size=(1, 5)).astype(np.float32))
    for metric in ALL_METRICS:
        results = [score_tokens(db, q, metric, agg).scores
                   for agg in ("mean", "best", "sum")]
        assert np.array_equal(results[0], results[1])
        assert np.array_equal(results[1], results[2])


def test_best_over_queries_matches_naive_loop_oracle():
    # independent element-by-element reference, 1e-5 relative
    rng = np.random.default_rng(2)
    db_arr = rng.normal(size=(32, 16)).astype(np.float32)
    q_arr = rng.normal(size=(4, 16)).astype(np.float32)
    got = score_tokens(tm(db_arr), tm(q_arr), Metric("l2"), "best").scores
    want = np.array([
        max(naive_relevance(db_arr[i], q_arr[j], Metric("l2")) for j in range(4))
        for i in range(32)
    ])
    assert np.allclose(got, want, rtol=1e-5)


@pytest.mark.parametrize("metric", ALL_METRICS, ids=lambda m: m.kind)
@pytest.mark.parametrize("agg", ["mean", "best", "sum"])
def test_all_aggregations_match_naive_oracle(metric, agg):
    rng = np.random.default_rng(3)
    db_arr = rng.normal(size=(17, 9)).astype(np.float32)
    q_arr = rng.normal(size=(5, 9)).astype(np.float32)
    got = score_tokens(tm(db_arr), tm(q_arr), metric, agg).scores
    if agg == "mean":
        mean_q = np.array([sum(float(q_arr[j][t]) for j in range(5)) / 5.0
                           for t in range(9)])
        want = [naive_relevance(db_arr[i], mean_q, metric) for i in range(17)]
    else:
        per = [[naive_relevance(db_arr[i], q_arr[j], metric) for j in range(5)]
               for i in range(17)]
        want = [max(row) if agg == "best" else sum(row) for row in per]
    assert np.allclose(got, np.array(want), rtol=1e-5, atol=1e-8)


# --- error cases -------------------------------------------------------------

def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        pairwise_scores(tm([[1.0, 2.0]]), tm([[1.0, 2.0, 3.0]]), Metric("l2"))


def test_empty_inputs_rejected():
    empty = tm(np.zeros((0, 2), dtype=np.float32))
    some = tm([[1.0, 2.0]])
    with pytest.raises(EmptyInputError):
        pairwise_scores(empty, some, Metric("l2"))
    with pytest.raises(EmptyInputError):
        score_tokens(some, empty, Metric("l2"))


def test_bad_metric_params():
    with pytest.raises(InvalidParamsError):
        Metric("cosine")
    with pytest.raises(InvalidParamsError):
        Metric("lp", p=0.0)
    with pytest.raises(InvalidParamsError):
        score_tokens(tm([[1.0]]), tm([[1.0]]), Metric("l2"), "median")


# --- normalize_rows ------------------------------------------------------------

def test_normalize_345_row():
    out = normalize_rows(tm([[3.0, 4.0]]))
    assert np.allclose(out.data, [[0.6, 0.8]])
    assert out.meta["zero_rows"] == ()


def test_normalize_zero_row_passthrough():
    out = normalize_rows(tm([[0.0, 0.0], [3.0, 4.0]]))
    assert np.array_equal(out.data[0], [0.0, 0.0])
    assert out.meta["zero_rows"] == (0,)


def test_normalized_inner_product_bounded():
    rng = np.random.default_rng(4)
    db = normalize_rows(tm(rng.normal(size=(50, 8)).astype(np.float32)))
    q = normalize_rows(tm(rng.normal(size=(3, 8)).astype(np.float32)))
    table = pairwise_scores(db, q, Metric("inner_product"))
    assert (table >= -1.0 - 1e-6).all() and (table <= 1.0 + 1e-6).all()


# --- invariants ------------------------------------------------------------------

@pytest.mark.parametrize("metric", ALL_METRICS, ids=lambda m: m.kind)
def test_symmetry_on_single_vectors(metric):
    rng = np.random.default_rng(5)
    a = rng.normal(size=(1, 7)).astype(np.float32)
    b = rng.normal(size=(1, 7)).astype(np.float32)
    ab = pairwise_scores(tm(a), tm(b), metric)[0, 0]
    ba = pairwise_scores(tm(b), tm(a), metric)[0, 0]
    assert ab == pytest.approx(ba, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1),
       kind=st.sampled_from(["l1", "l2", "lp", "linf"]))
def test_translation_invariance_of_distances(seed, kind):
    rng = np.random.default_rng(seed)
    db = rng.normal(size=(8, 5)).astype(np.float32)
    q = rng.normal(size=(3, 5)).astype(np.float32)
    t = rng.normal(size=(1, 5)).astype(np.float32)
    metric = Metric(kind)
    base = pairwise_scores(tm(db), tm(q), metric)
    moved = pairwise_scores(tm(db + t), tm(q + t), metric)
    assert np.allclose(base, moved, atol=1e-5)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1),
       exponent=st.integers(min_value=-3, max_value=6))
def test_inner_product_positive_scaling_exact(seed, exponent):
    # powers of two scale float values without rounding, so the score
    # relation and the induced ranking can be asserted exactly
    rng = np.random.default_rng(seed)
    c = 2.0 ** exponent
    db = rng.normal(size=(10, 6)).astype(np.float32)
    q = rng.normal(size=(2, 6)).astype(np.float32)
    base = score_tokens(tm(db), tm(q), Metric("inner_product"), "mean").scores
    scaled = score_tokens(tm(np.float32(c) * db), tm(q),
                          Metric("inner_product"), "mean").scores
    assert np.array_equal(scaled, c * base)
    assert np.array_equal(np.argsort(-base, kind="stable"),
                          np.argsort(-scaled, kind="stable"))


def test_inner_product_scaling_general_c_preserves_topk():
    rng = np.random.default_rng(9)
    db = rng.normal(size=(30, 8)).astype(np.float32)
    q = rng.normal(size=(2, 8)).astype(np.float32)
    base = score_tokens(tm(db), tm(q), Metric("inner_product"), "mean").scores
    for c in (0.7, 3.3, 23.25):
        scaled = score_tokens(tm(np.float32(c) * db), tm(q),
                              Metric("inner_product"), "mean").scores
        assert np.allclose(scaled / c, base, rtol=1e-5, atol=1e-6)
        top_base = set(np.argsort(-base, kind="stable")[:10].tolist())
        top_scaled = set(np.argsort(-scaled, kind="stable")[:10].tolist())
        assert top_base == top_scaled


def test_l2_equals_lp_with_p2():
    rng = np.random.default_rng(6)
    db = tm(rng.normal(size=(20, 10)).astype(np.float32))
    q = tm(rng.normal(size=(4, 10)).astype(np.float32))
    a = pairwise_scores(db, q, Metric("l2"))
    b = pairwise_scores(db, q, Metric("lp", p=2.0))
    assert np.allclose(a, b, atol=1e-6)


def test_lp_large_exponent_stays_finite_and_approaches_linf():
    rng = np.random.default_rng(10)
    db = tm(rng.normal(size=(20, 8)).astype(np.float32))
    q = tm(rng.normal(size=(3, 8)).astype(np.float32))
    huge = pairwise_scores(db, q, Metric("lp", p=800.0))
    assert np.isfinite(huge).all()
    linf = pairwise_scores(db, q, Metric("linf"))
    assert np.allclose(huge, linf, rtol=1e-2)


def test_metric_ordering_linf_lp_l1():
    rng = np.random.default_rng(7)
    db = tm(rng.normal(size=(15, 8)).astype(np.float32))
    q = tm(rng.normal(size=(3, 8)).astype(np.float32))
    d_linf = -pairwise_scores(db, q, Metric("linf"))
    d_lp = -pairwise_scores(db, q, Metric("lp", p=3.0))
    d_l1 = -pairwise_scores(db, q, Metric("l1"))
    assert (d_linf <= d_lp + 1e-9).all()
    assert (d_lp <= d_l1 + 1e-9).all()


def test_scores_are_bit_identical_across_runs():
    rng = np.random.default_rng(8)
    db = tm(rng.normal(size=(40, 12)).astype(np.float32))
    q = tm(rng.normal(size=(6, 12)).astype(np.float32))
    for metric in ALL_METRICS:
        for agg in ("mean", "best", "sum"):
            a = score_tokens(db, q, metric, agg).scores
            b = score_tokens(db, q, metric, agg).scores
            assert np.array_equal(a, b)
