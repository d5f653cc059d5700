"""Command-line interface: gen, solve, bench, audit, summarize.

Exit codes: 0 on success (every row completed and every enabled audit passed),
1 when a run or audit failed its threshold, 2 for usage or config errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import audit as audit_mod
from . import bench, report
from .instance import GENERATOR_KINDS, InstanceError, generate, load, save
from .solver import (
    PrivacyParams,
    SolverConfig,
    SupplyConditionError,
    read_trace_jsonl,
    solve,
    write_trace_jsonl,
)


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--counter-mode", choices=("exact", "tree"), default="exact")
    parser.add_argument("--noise", choices=("on", "off"), default="on")
    parser.add_argument("--override-supply-check", action="store_true")


def cmd_gen(args) -> int:
    instance = generate(args.kind, args.n, args.m, args.b, args.seed)
    save(instance, args.out)
    print(f"wrote {args.kind} instance (n={args.n}, m={args.m}, b={args.b:g}) to {args.out}")
    return 0


def cmd_solve(args) -> int:
    instance = load(args.instance)
    params = PrivacyParams(epsilon=args.epsilon, delta=args.delta, alpha=args.alpha)
    config = SolverConfig(
        counter_mode=args.counter_mode,
        noise=args.noise == "on",
        override_supply_check=args.override_supply_check,
    )
    result = solve(instance, params, config, seed=args.seed)
    if args.trace:
        write_trace_jsonl(result.trace, args.trace)
        print(f"trace ({result.rounds} rounds) -> {args.trace}")
    payload = result.summary_dict()
    payload["seed"] = args.seed
    if args.allocations:
        payload["x_bar"] = result.x_bar.x.tolist()
        payload["x_feasible"] = result.x_feasible.x.tolist()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"result -> {args.out}")
    else:
        json.dump(payload, sys.stdout, indent=2)
        print()
    return 0


def cmd_bench(args) -> int:
    config = bench.load_config(args.config)
    if args.trace:
        config = replace(config, write_traces=True)
    _, _, all_ok = bench.run(config)
    return 0 if all_ok else 1


def cmd_audit_divergence(args) -> int:
    tuples = audit_mod.divergence_grid(args.tuples, delta=args.delta, seed=args.seed)
    reports = audit_mod.check_divergence_lemma(tuples, grid_points=args.grid_points)
    control = audit_mod.check_divergence_point(
        audit_mod.negative_control_tuple(args.delta), grid_points=args.grid_points
    )
    worst = max((r.excess for r in reports if r.hypothesis_ok), default=0.0)
    skipped = sum(1 for r in reports if not r.hypothesis_ok)
    ok = (worst <= args.delta + 1e-4
          and not any(r.violated for r in reports)
          and not control.hypothesis_ok)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "tuples": args.tuples,
        "grid_points": args.grid_points,
        "delta": args.delta,
        "worst_excess": worst,
        "bound": args.delta + 1e-4,
        "skipped_hypothesis_failures": skipped,
        "negative_control_flagged": not control.hypothesis_ok,
        "negative_control_note": control.hypothesis_note,
        "ok": ok,
        "reports": [
            {
                "params": r.params.__dict__,
                "hypothesis_ok": r.hypothesis_ok,
                "hypothesis_note": r.hypothesis_note,
                "excess": None if math.isnan(r.excess) else r.excess,
                "violated": r.violated,
                "worst_set": list(r.worst_set),
            }
            for r in reports
        ],
    }
    path = out_dir / "divergence_report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    csv_path = out_dir / "divergence_summary.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mu1", "sigma1", "mu2", "sigma2", "eta", "alpha", "delta",
                         "hypothesis_ok", "excess", "violated"])
        for r in reports:
            p = r.params
            writer.writerow([p.mu1, p.sigma1, p.mu2, p.sigma2, p.eta, p.alpha, p.delta,
                             r.hypothesis_ok, "" if math.isnan(r.excess) else r.excess,
                             r.violated])
    print(f"divergence check: worst excess {worst:.3e} (bound {args.delta + 1e-4:.3e}), "
          f"negative control flagged: {not control.hypothesis_ok} -> {path}, {csv_path}")
    return 0 if ok else 1


def cmd_audit_trace(args) -> int:
    instance = load(args.instance)
    trace = read_trace_jsonl(args.trace)
    alpha = args.alpha
    load_bar = audit_mod.trace_load(trace, instance, alpha)
    comparators = audit_mod.canonical_comparators_from_load(instance, load_bar)
    regrets = {
        name: audit_mod.measure_regret(trace, instance, comp, alpha)
        for name, comp in comparators.items()
    }
    s = float(load_bar.max()) - instance.b
    type_counts: dict[int, int] = {}
    for rec in trace:
        type_counts[rec.eta_type] = type_counts.get(rec.eta_type, 0) + 1
    log_m1 = math.log(instance.m + 1)
    bound = 3.0 * (instance.m + 1) * log_m1 / alpha**2 + instance.m + 1
    payload = {
        "rounds": len(trace),
        "rounds_bound": bound,
        "rounds_ok": len(trace) <= bound,
        "type_counts": {str(k): v for k, v in sorted(type_counts.items())},
        "overflow_s": s,
        "overflow_ratio": s / (alpha * instance.b),
        "regret": {
            name: {"lhs": rep.lhs, "kl": rep.kl, "bound": rep.bound,
                   "slack": rep.slack, "ok": rep.ok}
            for name, rep in regrets.items()
        },
    }
    ok = payload["rounds_ok"] and all(rep.ok for rep in regrets.values())
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"trace audit -> {args.out}")
    else:
        print(text)
    return 0 if ok else 1


def cmd_summarize(args) -> int:
    try:
        rows = bench.read_results(args.results)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summary = bench.summarize_rows(rows)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.results).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "summary.csv"
    bench.write_summary(summary, path)
    print(f"summary ({len(summary)} groups) -> {path}")
    if not args.no_figures:
        figures = report.render_summary_figures(rows, out_dir)
        for fig in figures:
            print(f"figure -> {fig}")
    violations = sum(
        e["gap_violations"] + e["overflow_violations"] + e["rounds_violations"]
        for e in summary
    )
    errors = sum(e["errors"] for e in summary)
    if errors or violations:
        print(f"{errors} errored rows, {violations} threshold violations")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jdp-pack",
                                     description="Jointly private packing solver and benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic instance")
    p_gen.add_argument("--kind", choices=GENERATOR_KINDS, required=True)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--m", type=int, required=True)
    p_gen.add_argument("--b", type=float, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_solve = sub.add_parser("solve", help="run the private solver on one instance")
    p_solve.add_argument("--instance", required=True)
    p_solve.add_argument("--epsilon", type=float, required=True)
    p_solve.add_argument("--delta", type=float, default=1e-6)
    p_solve.add_argument("--alpha", type=float, required=True)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--trace", help="write the round trace as JSON lines")
    p_solve.add_argument("--out", help="write the result summary JSON here (default stdout)")
    p_solve.add_argument("--allocations", action="store_true",
                         help="include x_bar / x_feasible vectors in the output")
    _add_solver_flags(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser("bench", help="run an experiment grid from a JSON config")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--trace", action="store_true", help="also write per-run traces")
    p_bench.set_defaults(func=cmd_bench)

    p_audit = sub.add_parser("audit", help="empirical checks of the quantitative claims")
    audit_sub = p_audit.add_subparsers(dest="audit_command", required=True)

    p_div = audit_sub.add_parser("divergence", help="numeric check of the noise privacy inequality")
    p_div.add_argument("--tuples", type=int, default=200)
    p_div.add_argument("--grid-points", type=int, default=2000)
    p_div.add_argument("--delta", type=float, default=1e-6)
    p_div.add_argument("--seed", type=int, default=0)
    p_div.add_argument("--out-dir", default="out")
    p_div.set_defaults(func=cmd_audit_divergence)

    p_tr = audit_sub.add_parser("trace", help="regret/feasibility/round checks on a solve trace")
    p_tr.add_argument("--trace", required=True)
    p_tr.add_argument("--instance", required=True)
    p_tr.add_argument("--alpha", type=float, required=True)
    p_tr.add_argument("--out")
    p_tr.set_defaults(func=cmd_audit_trace)

    p_sum = sub.add_parser("summarize", help="aggregate a results CSV and render figures")
    p_sum.add_argument("--results", required=True)
    p_sum.add_argument("--out-dir")
    p_sum.add_argument("--no-figures", action="store_true")
    p_sum.set_defaults(func=cmd_summarize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (bench.ConfigError, InstanceError, SupplyConditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
