"""Command-line entry point.

Subcommands: ``verify`` (invariant suites, 64-bit), ``report`` (shape /
parameter / FLOPs tables), ``bench`` (timed linear-complexity sweeps), and
``simulate`` (deterministic multi-agent scenario runs).  Exit codes:
0 success, 1 verification/criteria failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .bench import AXES, run_bench
from .errors import CollaMambaError, InvalidArgumentError
from .net import NetConfig, Variant, count_flops, count_params
from .runtime import set_precision, set_threads
from .sim import load_scenario, mode_fractions, run_scenario
from .verify import SUITES, run_suite

PARAM_REFERENCE_SIMPLE = 3.92e6
FLOPS_REFERENCE_SIMPLE = 79.06e9
CSV_SCHEMA_VERSION = 1


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="override the seed")
    parser.add_argument("--precision", choices=("f32", "f64"), default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--config", default=None,
                        help="json file of network-config overrides "
                             "(fallback: $COLLAMAMBA_CONFIG)")


def _apply_common(args) -> None:
    if args.precision:
        set_precision(args.precision)
    if args.threads:
        set_threads(args.threads)


def _load_net_config(args, variant: Variant) -> NetConfig:
    path = args.config or os.environ.get("COLLAMAMBA_CONFIG")
    overrides = {}
    if path:
        try:
            overrides = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgumentError(f"cannot read config {path!r}: {exc}") from exc
        if not isinstance(overrides, dict):
            raise InvalidArgumentError("config file must hold a json object")
    cfg = NetConfig.defaults(variant)
    if args.seed is not None:
        overrides = {**overrides, "seed": args.seed}
    if overrides:
        unknown = set(overrides) - set(cfg.__dataclass_fields__)
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **overrides)
    return cfg


def _write_csv(path, header: str, rows) -> None:
    lines = [header] + [",".join(str(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# verify

def cmd_verify(args) -> int:
    results = run_suite(args.suite)
    for r in results:
        if r.ok:
            print(f"PASS {r.invariant_id}")
        else:
            print(f"FAIL {r.invariant_id}: {r.detail}")
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} invariants passed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# report

def _shape_rows(cfg: NetConfig, variant: Variant):
    rows = [
        ("bev_input", f"(b, {cfg.h0}, {cfg.w0}, {cfg.c0})"),
        ("pos_embed", f"(1, {cfg.grid_h}, {cfg.grid_w}, {cfg.c})"),
        ("feature_sequence", f"(b, {cfg.seq_len}, {cfg.c})"),
        ("decoded_grid", f"(b, {cfg.dec_hw[0]}, {cfg.dec_hw[1]}, {cfg.out_ch})"),
        ("head_cls", f"(b, {cfg.dec_hw[0]}, {cfg.dec_hw[1]}, {cfg.head_channels[0]})"),
        ("head_reg", f"(b, {cfg.dec_hw[0]}, {cfg.dec_hw[1]}, {cfg.head_channels[1]})"),
        ("head_dir", f"(b, {cfg.dec_hw[0]}, {cfg.dec_hw[1]}, {cfg.head_channels[2]})"),
    ]
    if variant in (Variant.ST, Variant.MISS):
        rows.insert(3, ("temporal_embed", f"(1, 1, 1, {cfg.l_his}, {cfg.c})"))
        rows.insert(4, ("history_features", f"(b, {cfg.l_his}, {cfg.seq_len}, {cfg.c})"))
    return rows


def cmd_report(args) -> int:
    variant = Variant.parse(args.variant)
    cfg = _load_net_config(args, variant)
    if args.kind == "shapes":
        rows = _shape_rows(cfg, variant)
        width = max(len(name) for name, _ in rows)
        for name, shape in rows:
            print(f"{name:<{width}}  {shape}")
        if args.csv:
            _write_csv(args.csv, "name,shape,schema_version",
                       [(n, f'"{s}"', CSV_SCHEMA_VERSION) for n, s in rows])
        return 0

    if args.kind == "params":
        rows, total = count_params(cfg, variant)
        width = max(len(r.path) for r in rows)
        for r in rows:
            shape = f"  {r.shape}" if r.shape else ""
            print(f"{r.path:<{width}}  {r.value:>12,}{shape}")
        print(f"{'total':<{width}}  {total:>12,}  ({total / 1e6:.3f}M)")
        if variant is Variant.SIMPLE:
            delta = total / PARAM_REFERENCE_SIMPLE - 1.0
            verdict = "within" if abs(delta) <= 0.10 else "OUTSIDE"
            print(f"reference total {PARAM_REFERENCE_SIMPLE / 1e6:.2f}M: "
                  f"delta {delta:+.1%}, {verdict} +-10%")
        if args.csv:
            _write_csv(args.csv, "path,params,shape,schema_version",
                       [(r.path, r.value, r.shape, CSV_SCHEMA_VERSION) for r in rows]
                       + [("total", total, "", CSV_SCHEMA_VERSION)])
        return 0

    rows, total = count_flops(cfg, variant, neighbors=args.neighbors)
    width = max(len(r.path) for r in rows)
    for r in rows:
        print(f"{r.path:<{width}}  {r.value:>16,}")
    print(f"{'total':<{width}}  {total:>16,}  ({total / 1e9:.2f}G)")
    if variant is Variant.SIMPLE:
        delta = total / FLOPS_REFERENCE_SIMPLE - 1.0
        verdict = "within" if abs(delta) <= 0.40 else "OUTSIDE"
        print(f"reference total {FLOPS_REFERENCE_SIMPLE / 1e9:.2f}G: "
              f"delta {delta:+.1%}, {verdict} +-40%")
    print("convention: 1 multiply-add = 2 FLOPs; 6 multiply-adds per state "
          "element per scan step; projections/convolutions/scans only")
    if args.csv:
        _write_csv(args.csv, "path,flops,schema_version",
                   [(r.path, r.value, CSV_SCHEMA_VERSION) for r in rows]
                   + [("total", total, CSV_SCHEMA_VERSION)])
    return 0


# ---------------------------------------------------------------------------
# bench

def cmd_bench(args) -> int:
    points = None
    if args.points is not None:
        try:
            points = [int(p) for p in args.points.split(",") if p.strip()]
        except ValueError as exc:
            raise InvalidArgumentError(f"bad --points: {exc}") from exc
    cfg = _load_net_config(args, Variant.SIMPLE)
    report = run_bench(args.axis, points=points, repeats=args.repeats,
                       seed=args.seed if args.seed is not None else 0,
                       cfg=cfg, depth=args.depth)
    print(f"axis={report.axis}  slope={report.slope_us:.1f} us/unit  "
          f"R^2={report.r_squared:.4f}")
    for p in report.points:
        print(f"  {p.value:>6}  {p.median_us:>12.1f} us  {p.flops_est:>16,} flops")
    ratios = report.doubling_ratios
    if ratios:
        print("doubling ratios: " + ", ".join(f"{r:.2f}" for r in ratios))
    if args.csv:
        _write_csv(args.csv, "axis,value,median_us,flops_est,schema_version",
                   [(report.axis, p.value, f"{p.median_us:.3f}", p.flops_est,
                     CSV_SCHEMA_VERSION) for p in report.points])
    return 0


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    cfg = load_scenario(args.scenario)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    result = run_scenario(cfg, weights=args.weights)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result.log.to_csv(out_dir / "commlog.csv")
    fractions = mode_fractions(result.log, result.warmup_frames)
    cvs = [r.cv_log2 for r in result.log.records]
    summary = {
        "frames": cfg.n_frames,
        "agents": cfg.n_agents,
        "warmup_frames": result.warmup_frames,
        "message_payload_bytes": result.message_nbytes,
        "mean_cv_log2": sum(cvs) / len(cvs),
        "mode_fractions": {m.value: str(f) for m, f in fractions.items()},
        "mode_fractions_float": {m.value: float(f) for m, f in fractions.items()},
        "scenario": asdict(cfg),
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(f"wrote {out_dir / 'commlog.csv'} ({len(result.log.records)} records)")
    for mode, frac in fractions.items():
        print(f"  {mode.value:<12} {str(frac):>8}  ({float(frac):.4f})")
    print(f"  mean #CV = {summary['mean_cv_log2']:.4f}  "
          f"payload {result.message_nbytes} bytes")
    return 0


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="collamamba",
        description="state-space collaborative perception: verification, "
                    "reports, benchmarks, and the agent simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run invariant suites (64-bit mode)")
    p.add_argument("suite", nargs="?", default="all",
                   choices=sorted(SUITES) + ["all"])
    _common(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("report", help="shape / parameter / FLOPs tables")
    p.add_argument("kind", choices=("shapes", "params", "flops"))
    p.add_argument("--variant", default="simple")
    p.add_argument("--neighbors", type=int, default=1,
                   help="neighbor count for the FLOPs table")
    p.add_argument("--csv", default=None, help="also write the table as csv")
    _common(p)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("bench", help="timed linear-complexity sweeps")
    p.add_argument("axis", choices=AXES)
    p.add_argument("--points", default=None, help="comma-separated axis values")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--depth", type=int, default=2, help="block-stack depth")
    p.add_argument("--csv", default=None)
    _common(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario", help="scenario json path")
    p.add_argument("--out", default="sim_out", help="output directory")
    p.add_argument("--weights", default=None, help="CMBW snapshot to load")
    _common(p)
    p.set_defaults(fn=cmd_simulate)

    args = parser.parse_args(argv)
    try:
        _apply_common(args)
        return args.fn(args)
    except (InvalidArgumentError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CollaMambaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
