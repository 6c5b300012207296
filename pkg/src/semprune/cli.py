"""Command-line surface: prune, analyze, ablate, fixture.

Exit codes: 0 success, 1 I/O failure, 2 validation error.  Validation
failures print a machine-readable error object to stderr.  Every
command is deterministic given its inputs and flags; ``--json`` swaps
the human-readable rendering for a stable structured document on
stdout, and ``--outdir`` additionally writes CSV files with PNG figures
next to them.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import report
from .errors import IoFailureError, SempruneError
from .evaluate import gen_fixture, load_truth, recall_at_k, save_fixture, selection_overlap
from .roofline import (
    DType,
    EfficiencyReport,
    HardwareProfile,
    ModelProfile,
    efficiency_report,
    load_hardware_profile,
    load_model_profile,
)
from .selection import (
    ProjectionSpec,
    apply_projection,
    assemble_sequence,
    ratio_to_k,
    select_threshold,
    select_topk,
)
from .similarity import METRIC_KINDS, Metric, score_tokens
from .tensorio import load_matrix, save_matrix

_LAYOUT_FLAGS = {"visual-then-text": "visual_then_text",
                 "text-then-visual": "text_then_visual"}


def _emit_error(exc: Exception) -> None:
    obj = {"error": {"type": type(exc).__name__.removesuffix("Error"),
                     "message": str(exc)}}
    print(json.dumps(obj), file=sys.stderr)


def _print_json(obj: Dict) -> None:
    print(json.dumps(obj, indent=2))


# --- prune ---------------------------------------------------------------

def _add_prune_parser(sub) -> None:
    p = sub.add_parser("prune", help="select visual tokens against a text query "
                                     "and write the assembled sequence")
    p.add_argument("visual", help="visual token matrix (.temb)")
    p.add_argument("text", help="text query matrix (.temb)")
    policy = p.add_mutually_exclusive_group(required=True)
    policy.add_argument("--k", type=int, help="keep the k most relevant tokens")
    policy.add_argument("--ratio", type=float,
                        help="reduction ratio in [0,1); keeps ceil(n*(1-ratio))")
    policy.add_argument("--tau", type=float,
                        help="keep every token scoring >= tau")
    p.add_argument("--metric", choices=METRIC_KINDS, default="linf")
    p.add_argument("--p", type=float, default=3.0,
                   help="exponent for --metric lp (default 3.0)")
    p.add_argument("--agg", choices=("mean", "best", "sum"), default="mean",
                   help="how multi-row queries collapse (default mean)")
    p.add_argument("--layout", choices=tuple(_LAYOUT_FLAGS), default="visual-then-text")
    p.add_argument("--projection", help="optional projection weight matrix (.temb)")
    p.add_argument("--projection-bias", help="optional 1 x d_out bias (.temb)")
    p.add_argument("--placement", choices=("pre", "post"), default="pre",
                   help="apply the projection before retrieval (default) or "
                        "only to the kept rows afterwards")
    p.add_argument("-o", "--output", help="assembled sequence path "
                                          "(default: <visual>.pruned.temb)")
    p.add_argument("--outdir", help="also write scores.csv and scores.png here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_prune)


def _load_projection(args) -> Optional[ProjectionSpec]:
    if not args.projection:
        if args.projection_bias:
            raise SempruneError("--projection-bias requires --projection")
        return None
    weight = load_matrix(args.projection).data
    bias = None
    if args.projection_bias:
        bias_m = load_matrix(args.projection_bias)
        if bias_m.rows != 1:
            raise SempruneError("projection bias must be a 1-row matrix")
        bias = bias_m.data[0]
    return ProjectionSpec(weight=weight, bias=bias, placement=args.placement)


def _cmd_prune(args) -> int:
    t0 = time.perf_counter()
    visual = load_matrix(args.visual)
    text = load_matrix(args.text)
    proj = _load_projection(args)
    metric = Metric(args.metric, p=args.p)
    layout = _LAYOUT_FLAGS[args.layout]

    database = visual
    if proj is not None and proj.placement == "pre":
        database = apply_projection(visual, proj)

    scores = score_tokens(database, text, metric, args.agg)
    if args.k is not None:
        result = select_topk(scores, args.k)
    elif args.ratio is not None:
        result = select_topk(scores, ratio_to_k(database.rows, args.ratio))
    else:
        result = select_threshold(scores, args.tau)

    assembled_visual = database
    if proj is not None and proj.placement == "post":
        assembled_visual = apply_projection(database, proj)
    sequence = assemble_sequence(assembled_visual, text, result, layout)

    out_path = args.output or str(Path(args.visual).with_suffix("")) + ".pruned.temb"
    save_matrix(sequence, out_path)
    wall_ms = (time.perf_counter() - t0) * 1e3

    outputs = {"sequence": str(out_path)}
    if args.outdir:
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path = outdir / "scores.csv"
        png_path = outdir / "scores.png"
        report.write_prune_csv(scores.scores, result.kept, csv_path)
        report.render_prune_figure(scores.scores, result.kept, png_path)
        outputs["scores_csv"] = str(csv_path)
        outputs["scores_png"] = str(png_path)

    doc = {
        "command": "prune",
        "inputs": {"visual": args.visual, "text": args.text},
        "n_original": result.n_original,
        "n_text": text.rows,
        "kept": [int(i) for i in result.kept],
        "scores": [float(s) for s in result.scores],
        "spec": {
            "policy": result.spec.policy,
            "value": result.spec.value,
            "k_effective": int(result.kept.size),
            "metric": metric.kind,
            "p": metric.p,
            "aggregation": args.agg,
            "layout": layout,
            "placement": args.placement if proj is not None else None,
        },
        "output_rows": sequence.rows,
        "outputs": outputs,
        "wall_time_ms": wall_ms,
    }
    if args.json:
        _print_json(doc)
    else:
        shown = doc["kept"][:16]
        ellipsis = " ..." if len(doc["kept"]) > 16 else ""
        print(f"visual tokens: {result.n_original}   kept: {result.kept.size}   "
              f"text tokens: {text.rows}   output rows: {sequence.rows}")
        print(f"policy: {result.spec.policy}={result.spec.value:g}   "
              f"metric: {metric.kind}   aggregation: {args.agg}")
        print(f"kept indices: {shown}{ellipsis}")
        print(f"wrote {out_path}")
        print(f"wall time: {wall_ms:.2f} ms")
    return 0


# --- analyze -------------------------------------------------------------

_COMPARE_CONFIGS = [(576, 40, "fp16"), (116, 40, "fp16"),
                    (576, 40, "int8"), (116, 40, "int8")]


def _add_analyze_parser(sub) -> None:
    p = sub.add_parser("analyze", help="estimate prefill cost for a token budget")
    p.add_argument("--model", default="llava-7b",
                   help="model preset name or profile file (default llava-7b)")
    p.add_argument("--hw", default="a100",
                   help="hardware preset name or profile file (default a100)")
    p.add_argument("--visual-tokens", type=int, default=576)
    p.add_argument("--text-tokens", type=int, default=40)
    p.add_argument("--dtype", choices=("fp16", "int8"), default="fp16")
    p.add_argument("--compare", action="store_true",
                   help="emit the full unpruned-vs-pruned, fp16-vs-int8 table")
    p.add_argument("--outdir", help="also write efficiency.csv and efficiency.png here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_analyze)


def _report_row(model: ModelProfile, hw: HardwareProfile, n_visual: int,
                n_text: int, dtype: str) -> Dict:
    rep: EfficiencyReport = efficiency_report(model, hw, n_visual, n_text,
                                              DType(dtype))
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


def _print_analyze_table(rows: List[Dict]) -> None:
    header = (f"{'config':<14}{'dtype':<7}{'FLOPs(T)':>9}{'weights(GB)':>12}"
              f"{'KV(MB)':>9}{'act(GB)':>9}{'total(GB)':>11}{'prefill(ms)':>13}")
    print(header)
    print("-" * len(header))
    for row in rows:
        print(f"{row['config']:<14}{row['dtype']:<7}"
              f"{row['flops_total'] / 1e12:>9.2f}"
              f"{row['weights_bytes'] / 1e9:>12.2f}"
              f"{row['kv_cache_bytes'] / 1e6:>9.1f}"
              f"{row['activation_bytes'] / 1e9:>9.2f}"
              f"{row['total_memory_bytes'] / 1e9:>11.2f}"
              f"{row['prefill_seconds'] * 1e3:>13.2f}")


def _cmd_analyze(args) -> int:
    model = load_model_profile(args.model)
    hw = load_hardware_profile(args.hw)
    if args.compare:
        rows = [_report_row(model, hw, nv, nt, dt)
                for nv, nt, dt in _COMPARE_CONFIGS]
    else:
        rows = [_report_row(model, hw, args.visual_tokens, args.text_tokens,
                            args.dtype)]

    outputs: Dict[str, str] = {}
    if args.outdir:
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path = outdir / "efficiency.csv"
        png_path = outdir / "efficiency.png"
        report.write_efficiency_csv(rows, csv_path)
        report.render_efficiency_figure(rows, png_path)
        outputs = {"efficiency_csv": str(csv_path),
                   "efficiency_png": str(png_path)}

    if args.json:
        _print_json({"command": "analyze", "model": model.name, "hardware": hw.name,
                     "rows": rows, "outputs": outputs})
        return 0

    print(f"model: {model.name}   hardware: {hw.name}")
    if args.compare or len(rows) > 1:
        _print_analyze_table(rows)
    else:
        row = rows[0]
        print(f"visual tokens:  {row['n_visual']}")
        print(f"text tokens:    {row['n_text']}")
        print(f"sequence:       {row['n_tokens']} tokens ({row['dtype']})")
        print(f"FLOPs:          {row['flops_total'] / 1e12:.2f}e12")
        print(f"weights:        {row['weights_bytes'] / 1e9:.2f} GB")
        print(f"KV cache:       {row['kv_cache_bytes'] / 1e6:.1f} MB")
        print(f"activation:     {row['activation_bytes'] / 1e9:.2f} GB")
        print(f"total memory:   {row['total_memory_bytes'] / 1e9:.2f} GB")
        print(f"prefill time:   {row['prefill_seconds'] * 1e3:.2f} ms")
    for label, path in outputs.items():
        print(f"wrote {path}")
    return 0


# --- ablate ---------------------------------------------------------------

def _add_ablate_parser(sub) -> None:
    p = sub.add_parser("ablate", help="compare kept sets across retrieval strategies")
    p.add_argument("visual")
    p.add_argument("text")
    policy = p.add_mutually_exclusive_group(required=True)
    policy.add_argument("--k", type=int)
    policy.add_argument("--ratio", type=float)
    p.add_argument("--metrics", default=",".join(METRIC_KINDS),
                   help="comma-separated list (default: all five)")
    p.add_argument("--p", type=float, default=3.0)
    p.add_argument("--agg", choices=("mean", "best", "sum"), default="mean")
    p.add_argument("--truth", help="fixture truth sidecar; adds recall per metric")
    p.add_argument("--outdir", help="also write overlap.csv and overlap.png here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_ablate)


def _cmd_ablate(args) -> int:
    names = [m.strip() for m in args.metrics.split(",") if m.strip()]
    if len(names) < 2:
        raise SempruneError("ablate needs at least 2 metrics")
    for name in names:
        if name not in METRIC_KINDS:
            raise SempruneError(f"unknown metric {name!r}")
    visual = load_matrix(args.visual)
    text = load_matrix(args.text)
    k = args.k if args.k is not None else ratio_to_k(visual.rows, args.ratio)

    results = {}
    for name in names:
        scores = score_tokens(visual, text, Metric(name, p=args.p), args.agg)
        results[name] = select_topk(scores, k)

    n = len(names)
    matrix = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(n):
            matrix[i, j] = selection_overlap(results[names[i]], results[names[j]])

    recall = None
    if args.truth:
        truth = load_truth(args.truth)["relevant"]
        recall = {name: recall_at_k(results[name], truth) for name in names}

    outputs: Dict[str, str] = {}
    if args.outdir:
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path = outdir / "overlap.csv"
        png_path = outdir / "overlap.png"
        report.write_overlap_csv(matrix, names, csv_path)
        report.render_overlap_figure(matrix, names, png_path)
        outputs = {"overlap_csv": str(csv_path), "overlap_png": str(png_path)}

    if args.json:
        doc = {
            "command": "ablate",
            "metrics": names,
            "k": int(k),
            "kept": {name: [int(i) for i in results[name].kept] for name in names},
            "overlap": [[matrix[i, j] for j in range(n)] for i in range(n)],
            "recall": recall,
            "outputs": outputs,
        }
        _print_json(doc)
        return 0

    print(f"visual tokens: {visual.rows}   query tokens: {text.rows}   k: {k}")
    width = max(len(name) for name in names) + 2
    print(" " * width + "".join(f"{name:>{width}}" for name in names))
    for i, name in enumerate(names):
        cells = "".join(f"{matrix[i, j]:>{width}.3f}" for j in range(n))
        print(f"{name:<{width}}" + cells)
    print("kept sets:")
    for name in names:
        kept = results[name].kept.tolist()
        shown = ", ".join(str(i) for i in kept[:12])
        tail = ", ..." if len(kept) > 12 else ""
        print(f"  {name:<14}[{shown}{tail}]")
    if recall is not None:
        print("recall vs planted truth:")
        for name in names:
            print(f"  {name:<14}{recall[name]:.3f}")
    for label, path in outputs.items():
        print(f"wrote {path}")
    return 0


# --- fixture ----------------------------------------------------------------

def _add_fixture_parser(sub) -> None:
    p = sub.add_parser("fixture", help="generate a planted-cluster fixture")
    p.add_argument("prefix", help="output path prefix")
    p.add_argument("--n-visual", type=int, default=576)
    p.add_argument("--n-text", type=int, default=40)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--n-relevant", type=int, default=116)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_fixture)


def _cmd_fixture(args) -> int:
    fix = gen_fixture(args.n_visual, args.n_text, args.dim, args.n_relevant,
                      args.separation, args.seed)
    paths = save_fixture(fix, args.prefix)
    doc = {
        "command": "fixture",
        "params": {"n_visual": args.n_visual, "n_text": args.n_text,
                   "d": args.dim, "n_relevant": args.n_relevant,
                   "separation": args.separation, "seed": args.seed},
        "relevant": list(fix.relevant),
        "files": paths,
    }
    if args.json:
        _print_json(doc)
    else:
        for key in ("visual", "text", "truth"):
            print(f"wrote {paths[key]}")
    return 0


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semprune",
        description="Query-driven visual-token pruning and prefill cost analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_prune_parser(sub)
    _add_analyze_parser(sub)
    _add_ablate_parser(sub)
    _add_fixture_parser(sub)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IoFailureError as exc:
        _emit_error(exc)
        return 1
    except SempruneError as exc:
        _emit_error(exc)
        return 2
    except OSError as exc:
        _emit_error(exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
