import json
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

import semprune
import semprune_host as host
from semprune import TokenMatrix, save_matrix

CLI = [sys.executable, "-m", "semprune"]


def run_cli(*args):
    proc = subprocess.run(CLI + list(args), capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout)


def test_version_matches_core():
    assert host.__version__ == semprune.__version__


# --- buffer ingestion --------------------------------------------------------

def test_contiguous_float32_is_zero_copy():
    arr = np.random.default_rng(0).normal(size=(8, 4)).astype(np.float32)
    view = host.as_buffer_view(arr)
    assert np.shares_memory(view.array, arr)


def test_non_contiguous_copies_with_warning():
    arr = np.random.default_rng(1).normal(size=(8, 8)).astype(np.float32)
    sliced = arr[:, ::2]
    with pytest.warns(UserWarning, match="copied"):
        view = host.as_buffer_view(sliced)
    assert not np.shares_memory(view.array, sliced)
    assert np.array_equal(view.array, sliced)


def test_wrong_dtype_rejected():
    with pytest.raises(host.InvalidParamsError, match="float32"):
        host.as_buffer_view(np.zeros((2, 2), dtype=np.float64))


def test_wrong_rank_rejected():
    with pytest.raises(host.InvalidParamsError):
        host.as_buffer_view(np.zeros(4, dtype=np.float32))


# --- prune -------------------------------------------------------------------

def test_prune_ratio_080_on_576_rows():
    rng = np.random.default_rng(2)
    visual = rng.normal(size=(576, 4096)).astype(np.float32)
    text = rng.normal(size=(40, 4096)).astype(np.float32)
    kept, scores = host.prune(visual, text, ratio=0.8)
    assert len(kept) == 116
    assert len(scores) == 116
    assert kept == sorted(set(kept))


def test_prune_k_equals_rows_keeps_all_in_order():
    rng = np.random.default_rng(3)
    visual = rng.normal(size=(12, 6)).astype(np.float32)
    text = rng.normal(size=(2, 6)).astype(np.float32)
    kept, _ = host.prune(visual, text, k=12)
    assert kept == list(range(12))


def test_prune_policy_validation():
    visual = np.ones((4, 3), dtype=np.float32)
    text = np.ones((1, 3), dtype=np.float32)
    with pytest.raises(host.InvalidParamsError):
        host.prune(visual, text)
    with pytest.raises(host.InvalidParamsError):
        host.prune(visual, text, k=2, ratio=0.5)


def test_prune_typed_errors_mirror_core():
    with pytest.raises(host.DimensionMismatchError):
        host.prune(np.ones((4, 3), dtype=np.float32),
                   np.ones((1, 5), dtype=np.float32), k=1)
    with pytest.raises(host.InvalidParamsError):
        host.prune(np.ones((4, 3), dtype=np.float32),
                   np.ones((1, 3), dtype=np.float32), k=1, metric="cosine")
    with pytest.raises(host.EmptyInputError):
        host.prune(np.zeros((0, 3), dtype=np.float32),
                   np.ones((1, 3), dtype=np.float32), k=1)


def test_prune_matches_cli_on_20_random_instances(tmp_path):
    rng = np.random.default_rng(20240811)
    metrics = ["l1", "l2", "lp", "inner_product", "linf"]
    aggs = ["mean", "best", "sum"]
    for trial in range(20):
        n = int(rng.integers(2, 128))
        m = int(rng.integers(1, 12))
        d = int(rng.integers(2, 64))
        k = int(rng.integers(1, n + 1))
        metric = metrics[trial % len(metrics)]
        agg = aggs[trial % len(aggs)]
        visual = rng.normal(size=(n, d)).astype(np.float32)
        text = rng.normal(size=(m, d)).astype(np.float32)

        vpath, tpath = tmp_path / f"v{trial}.temb", tmp_path / f"t{trial}.temb"
        save_matrix(TokenMatrix.from_array(visual), vpath)
        save_matrix(TokenMatrix.from_array(text), tpath)
        doc = run_cli("prune", str(vpath), str(tpath), "--k", str(k),
                      "--metric", metric, "--agg", agg,
                      "-o", str(tmp_path / f"o{trial}.temb"), "--json")

        kept, scores = host.prune(visual, text, metric=metric, k=k,
                                  aggregation=agg)
        assert kept == doc["kept"], f"trial {trial}"
        assert np.allclose(scores, doc["scores"], atol=1e-6), f"trial {trial}"


def test_prune_threshold_matches_cli(tmp_path):
    rng = np.random.default_rng(5)
    visual = rng.normal(size=(30, 8)).astype(np.float32)
    text = rng.normal(size=(3, 8)).astype(np.float32)
    vpath, tpath = tmp_path / "v.temb", tmp_path / "t.temb"
    save_matrix(TokenMatrix.from_array(visual), vpath)
    save_matrix(TokenMatrix.from_array(text), tpath)
    doc = run_cli("prune", str(vpath), str(tpath), "--tau=-2.5",
                  "-o", str(tmp_path / "o.temb"), "--json")
    kept, _ = host.prune(visual, text, tau=-2.5)
    assert kept == doc["kept"]


def test_prune_is_stateless_and_thread_safe():
    rng = np.random.default_rng(6)
    visual = rng.normal(size=(96, 16)).astype(np.float32)
    text = rng.normal(size=(6, 16)).astype(np.float32)

    def call(_):
        return host.prune(visual, text, metric="l2", k=24)

    baseline = call(None)
    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(call, range(32)))
    assert all(r == baseline for r in results)


# --- analyze -----------------------------------------------------------------

def test_analyze_reference_kv_values():
    row = host.analyze("llava-7b", "a100", 576, 40, "fp16")
    assert row["kv_cache_bytes"] == 322_961_408
    int8_row = host.analyze("llava-7b", "a100", 576, 40, "int8")
    assert int8_row["kv_cache_bytes"] * 2 == row["kv_cache_bytes"]


def test_analyze_accepts_profile_mappings():
    model = {"n_layers": 2, "hidden": 64, "n_heads": 4, "n_kv_heads": 4,
             "head_dim": 16, "intermediate": 256, "vocab": 1000,
             "n_params": 2_000_000}
    hw = {"peak_flops_fp16": 1e12, "peak_ops_int8": 2e12,
          "mem_bandwidth": 5e11}
    row = host.analyze(model, hw, 16, 4, "fp16")
    assert row["weights_bytes"] == 4_000_000
    assert row["n_tokens"] == 20


def test_analyze_incomplete_mapping_rejected():
    with pytest.raises(host.InvalidParamsError):
        host.analyze({"n_layers": 2}, "a100", 16, 4, "fp16")


def test_analyze_matches_cli_on_table_configs_and_20_random():
    doc = run_cli("analyze", "--compare", "--json")
    for want in doc["rows"]:
        got = host.analyze("llava-7b", "a100", want["n_visual"],
                           want["n_text"], want["dtype"])
        assert got == want

    rng = np.random.default_rng(7)
    for _ in range(20):
        nv = int(rng.integers(0, 1000))
        nt = int(rng.integers(1, 100))
        dtype = "fp16" if rng.integers(0, 2) else "int8"
        cli_doc = run_cli("analyze", "--visual-tokens", str(nv),
                          "--text-tokens", str(nt), "--dtype", dtype, "--json")
        got = host.analyze("llava-7b", "a100", nv, nt, dtype)
        assert got == cli_doc["rows"][0]
