"""Batch harness: seed-grid experiments to CSV, plus summary aggregation.

A run is the cross product (instance spec) x (epsilon, delta, alpha,
b_multiplier) x seed x algorithm. Every row is deterministic given the
config: the row seed drives both instance generation and solver randomness,
and rows are written through a single sink in canonical sort order, so two
runs of the same config produce byte-identical CSVs except the wall-clock
column. Worker count is capped by the JDP_PACK_THREADS environment variable.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import audit
from .baseline import fixed_step_mwu, knapsack_oracle, nonprivate_mwu
from .instance import GENERATOR_KINDS, PackingInstance, generate, load
from .solver import DerivedConstants, PrivacyParams, SolveResult, SolverConfig, solve, write_trace_jsonl
from .thresholds import BUDGET_CONSTANT, FEASIBILITY_CONSTANT, GAP_CONSTANT

SCHEMA_HEADER = "# jdp-pack results schema v1"
CSV_COLUMNS = (
    "instance", "n", "m", "b", "epsilon", "delta", "alpha", "seed", "algorithm",
    "objective", "opt_reference", "gap_over_alpha_n", "overflow_s_over_alpha_b",
    "rounds_T", "rounds_bound_ratio", "wall_clock_ms", "epsilon_spent", "status",
)
ALGORITHMS = ("private", "nonprivate", "fixed_step")
AUDIT_KINDS = ("gap", "feasibility", "rounds", "budget", "regret")
REFERENCE_MODES = ("auto", "none", "knapsack", "mwu")

REFERENCE_ALPHA = 0.01  # precision of the high-precision MWU reference for m > 1


class ConfigError(ValueError):
    """Experiment config failed validation."""


@dataclass(frozen=True)
class InstanceSpec:
    """Either a generator recipe or a path to an instance file."""

    kind: str | None = None
    n: int | None = None
    m: int | None = None
    b: float | None = None
    path: str | None = None

    @property
    def label(self) -> str:
        if self.path is not None:
            return Path(self.path).stem
        return f"{self.kind}-n{self.n}-m{self.m}"


@dataclass(frozen=True)
class ExperimentConfig:
    instances: tuple[InstanceSpec, ...]
    epsilons: tuple[float, ...]
    deltas: tuple[float, ...]
    alphas: tuple[float, ...]
    b_multipliers: tuple[float, ...] = (1.0,)
    seeds: tuple[int, ...] = (0,)
    algorithms: tuple[str, ...] = ("private",)
    audits: tuple[str, ...] = ()
    reference: str = "auto"
    counter_mode: str = "exact"
    noise: bool = True
    override_supply_check: bool = False
    output_dir: str = "out"
    write_traces: bool = False

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            counter_mode=self.counter_mode,
            noise=self.noise,
            override_supply_check=self.override_supply_check,
        )


def config_from_dict(payload: dict) -> ExperimentConfig:
    try:
        raw_instances = payload["instances"]
        grid = payload.get("grid", {})
        instances = []
        for spec in raw_instances:
            if "path" in spec:
                instances.append(InstanceSpec(path=str(spec["path"])))
            else:
                if spec.get("kind") not in GENERATOR_KINDS:
                    raise ConfigError(f"instance kind must be one of {GENERATOR_KINDS}, got {spec.get('kind')!r}")
                instances.append(InstanceSpec(
                    kind=spec["kind"], n=int(spec["n"]), m=int(spec["m"]),
                    b=float(spec["b"]) if "b" in spec else None,
                ))
        config = ExperimentConfig(
            instances=tuple(instances),
            epsilons=tuple(float(x) for x in grid.get("epsilon", [1.0])),
            deltas=tuple(float(x) for x in grid.get("delta", [1e-6])),
            alphas=tuple(float(x) for x in grid.get("alpha", [0.1])),
            b_multipliers=tuple(float(x) for x in grid.get("b_multiplier", [1.0])),
            seeds=tuple(int(s) for s in payload.get("seeds", [0])),
            algorithms=tuple(payload.get("algorithms", ["private"])),
            audits=tuple(payload.get("audits", [])),
            reference=payload.get("reference", "auto"),
            counter_mode=payload.get("counter_mode", "exact"),
            noise=payload.get("noise", "on") in (True, "on"),
            override_supply_check=bool(payload.get("override_supply_check", False)),
            output_dir=str(payload.get("output_dir", "out")),
            write_traces=bool(payload.get("write_traces", False)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc
    if not config.instances:
        raise ConfigError("config needs at least one instance")
    if not config.seeds:
        raise ConfigError("config needs at least one seed")
    if not config.algorithms:
        raise ConfigError("config needs at least one algorithm")
    for algo in config.algorithms:
        if algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algo!r}; expected subset of {ALGORITHMS}")
    for kind in config.audits:
        if kind not in AUDIT_KINDS:
            raise ConfigError(f"unknown audit {kind!r}; expected subset of {AUDIT_KINDS}")
    if config.reference not in REFERENCE_MODES:
        raise ConfigError(f"unknown reference mode {config.reference!r}")
    return config


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(payload)


def worker_count() -> int:
    env = os.environ.get("JDP_PACK_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass
class RowResult:
    key: tuple
    row: dict
    audit_failures: list[str] = field(default_factory=list)
    result: SolveResult | None = None


def _resolve_instance(spec: InstanceSpec, b_mult: float, params: PrivacyParams,
                      solver_config: SolverConfig, seed: int) -> PackingInstance:
    if spec.path is not None:
        inst = load(spec.path)
        if b_mult != 1.0:
            inst = PackingInstance(values=inst.values, demands=inst.demands, b=inst.b * b_mult)
        return inst
    if spec.b is not None:
        b = spec.b * b_mult
    else:
        # no b given: anchor at the supply-condition threshold (b-free formula)
        threshold = DerivedConstants.from_problem(spec.n, spec.m, 1.0, params, solver_config).supply_threshold
        b = math.ceil(threshold) * b_mult
    return generate(spec.kind, spec.n, spec.m, b, seed)


def _reference_value(instance: PackingInstance, alpha: float, mode: str) -> float | None:
    if mode == "none":
        return None
    if mode == "knapsack" or (mode == "auto" and instance.m == 1):
        return knapsack_oracle(instance).opt_value
    if mode == "mwu":
        return nonprivate_mwu(instance, REFERENCE_ALPHA).opt_value
    return None  # auto with m > 1: the high-precision reference is opt-in


def _apply_audits(result: SolveResult, instance: PackingInstance, row: dict,
                  enabled: tuple[str, ...], params: PrivacyParams) -> list[str]:
    # the fixed-step baseline exists to exhibit its width-dependent round
    # count and qualitative utility; the frozen thresholds are claims about
    # the adaptive solver, so baseline rows are reported but never gated
    if row["algorithm"] == "fixed_step":
        return []
    failures = []
    if "gap" in enabled and row["gap_over_alpha_n"] != "":
        if row["gap_over_alpha_n"] > GAP_CONSTANT:
            failures.append(f"gap ratio {row['gap_over_alpha_n']:.3g} > {GAP_CONSTANT}")
    if "feasibility" in enabled:
        rep = audit.measure_feasibility(result, instance)
        if rep.ratio > FEASIBILITY_CONSTANT:
            failures.append(f"overflow ratio {rep.ratio:.3g} > {FEASIBILITY_CONSTANT}")
        if not rep.post_scaling_feasible:
            failures.append("post-scaling allocation infeasible")
    if "rounds" in enabled:
        rep = audit.measure_rounds(result)
        if not rep.ok:
            failures.append(f"round bounds violated (T={rep.rounds}, counts={rep.type_counts})")
    if "budget" in enabled and result.trace:
        cap = BUDGET_CONSTANT * params.epsilon**2 / math.log(2.0 / params.delta)
        if result.epsilon_spent > cap:
            failures.append(f"privacy spent {result.epsilon_spent:.3g} > cap {cap:.3g}")
        alpha = params.alpha
        for rec in result.trace:
            if float(np.max(np.abs(rec.mu))) > alpha * (1 + 1e-12) or rec.sigma > alpha:
                failures.append(f"round {rec.t}: |mu| or sigma exceeds alpha")
                break
    if "regret" in enabled and result.trace:
        for name, comp in audit.canonical_comparators(instance, result).items():
            rep = audit.measure_regret(result.trace, instance, comp, params.alpha)
            if not rep.ok:
                failures.append(f"regret bound violated for {name} comparator (slack {rep.slack:.3g})")
    return failures


def _run_row(config: ExperimentConfig, spec_idx: int, spec: InstanceSpec,
             eps: float, delta: float, alpha: float, b_mult: float,
             seed: int, algo: str) -> RowResult:
    key = (spec_idx, eps, delta, alpha, b_mult, seed, algo)
    params = PrivacyParams(epsilon=eps, delta=delta, alpha=alpha)
    solver_config = config.solver_config()
    row = {
        "instance": spec.label, "seed": seed, "algorithm": algo,
        "epsilon": eps, "delta": delta, "alpha": alpha,
        "objective": "", "opt_reference": "", "gap_over_alpha_n": "",
        "overflow_s_over_alpha_b": "", "rounds_T": "", "rounds_bound_ratio": "",
        "wall_clock_ms": "", "epsilon_spent": "", "status": "ok",
        "n": "", "m": "", "b": "",
    }
    try:
        instance = _resolve_instance(spec, b_mult, params, solver_config, seed)
        row.update(n=instance.n, m=instance.m, b=instance.b)
        start = time.perf_counter()
        if algo == "private":
            result = solve(instance, params, solver_config, seed=seed)
        elif algo == "nonprivate":
            result = nonprivate_mwu(instance, alpha).detail
        else:
            result = fixed_step_mwu(instance, params, seed=seed, config=solver_config)
        elapsed_ms = (time.perf_counter() - start) * 1e3
        rounds_rep = audit.measure_rounds(result)
        row.update(
            objective=result.objective_feasible,
            overflow_s_over_alpha_b=result.overflow_s / (alpha * instance.b),
            rounds_T=result.rounds,
            rounds_bound_ratio=rounds_rep.bound_ratio,
            wall_clock_ms=elapsed_ms,
            epsilon_spent=result.epsilon_spent,
        )
        ref = _reference_value(instance, alpha, config.reference)
        if ref is not None:
            row["opt_reference"] = ref
            row["gap_over_alpha_n"] = (ref - result.objective_feasible) / (alpha * instance.n)
        failures = _apply_audits(result, instance, row, config.audits, params)
        return RowResult(key=key, row=row, audit_failures=failures, result=result)
    except Exception as exc:  # propagate per-row, keep the grid running
        row["status"] = f"error: {type(exc).__name__}: {exc}"
        return RowResult(key=key, row=row, audit_failures=[], result=None)


def run(config: ExperimentConfig, verbose: bool = True) -> tuple[list[RowResult], Path, bool]:
    """Execute the grid; returns (rows in canonical order, csv path, all_ok)."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (spec_idx, spec, eps, delta, alpha, b_mult, seed, algo)
        for spec_idx, spec in enumerate(config.instances)
        for eps in config.epsilons
        for delta in config.deltas
        for alpha in config.alphas
        for b_mult in config.b_multipliers
        for seed in config.seeds
        for algo in config.algorithms
    ]
    if verbose:
        print(f"grid size: {len(tasks)} rows "
              f"({len(config.instances)} instances x {len(config.epsilons)} eps x "
              f"{len(config.deltas)} delta x {len(config.alphas)} alpha x "
              f"{len(config.b_multipliers)} b x {len(config.seeds)} seeds x "
              f"{len(config.algorithms)} algorithms)")
    threads = worker_count()
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: _run_row(config, *t), tasks))
    else:
        results = [_run_row(config, *t) for t in tasks]
    results.sort(key=lambda r: r.key)

    csv_path = out_dir / "results.csv"
    _write_rows(csv_path, (r.row for r in results))
    if config.write_traces:
        for r in results:
            if r.result is not None and r.result.trace:
                spec_idx, eps, delta, alpha, b_mult, seed, algo = r.key
                name = (f"trace_i{spec_idx}_e{eps:g}_d{delta:g}_a{alpha:g}"
                        f"_b{b_mult:g}_s{seed}_{algo}.jsonl")
                write_trace_jsonl(r.result.trace, out_dir / name)
    all_ok = all(r.row["status"] == "ok" and not r.audit_failures for r in results)
    if verbose:
        failed = [r for r in results if r.row["status"] != "ok" or r.audit_failures]
        for r in failed:
            reasons = ([r.row["status"]] if r.row["status"] != "ok" else []) + r.audit_failures
            print(f"row {r.key}: " + "; ".join(reasons))
        print(f"{len(results) - len(failed)}/{len(results)} rows ok -> {csv_path}")
    return results, csv_path, all_ok


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SCHEMA_HEADER + "\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def read_results(path) -> list[dict]:
    """Read a results CSV back into typed dicts (header comment skipped)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    for raw in reader:
        row = dict(raw)
        for col in ("n", "m", "seed", "rounds_T"):
            row[col] = int(row[col]) if row[col] else ""
        for col in ("b", "epsilon", "delta", "alpha", "objective", "opt_reference",
                    "gap_over_alpha_n", "overflow_s_over_alpha_b",
                    "rounds_bound_ratio", "wall_clock_ms", "epsilon_spent"):
            row[col] = float(row[col]) if row[col] else ""
        rows.append(row)
    return rows


SUMMARY_COLUMNS = (
    "instance", "algorithm", "n", "m", "b", "epsilon", "delta", "alpha",
    "runs", "errors", "mean_gap_ratio", "max_gap_ratio",
    "mean_overflow_ratio", "max_overflow_ratio", "max_rounds_ratio",
    "gap_violations", "overflow_violations", "rounds_violations",
    "mean_wall_clock_ms",
)


def summarize_rows(rows: list[dict]) -> list[dict]:
    """Aggregate per (instance, algorithm, grid point); violations vs frozen constants."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (row["instance"], row["algorithm"], row["n"], row["m"], row["b"],
               row["epsilon"], row["delta"], row["alpha"])
        groups.setdefault(key, []).append(row)
    summary = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        bucket = groups[key]
        ok_rows = [r for r in bucket if r["status"] == "ok"]
        gaps = [r["gap_over_alpha_n"] for r in ok_rows if r["gap_over_alpha_n"] != ""]
        overflows = [r["overflow_s_over_alpha_b"] for r in ok_rows if r["overflow_s_over_alpha_b"] != ""]
        ratios = [r["rounds_bound_ratio"] for r in ok_rows if r["rounds_bound_ratio"] != ""]
        clocks = [r["wall_clock_ms"] for r in ok_rows if r["wall_clock_ms"] != ""]
        entry = dict(zip(("instance", "algorithm", "n", "m", "b", "epsilon", "delta", "alpha"), key))
        gated = key[1] != "fixed_step"  # thresholds are claims about the adaptive solver
        entry.update(
            runs=len(bucket),
            errors=len(bucket) - len(ok_rows),
            mean_gap_ratio=float(np.mean(gaps)) if gaps else "",
            max_gap_ratio=float(np.max(gaps)) if gaps else "",
            mean_overflow_ratio=float(np.mean(overflows)) if overflows else "",
            max_overflow_ratio=float(np.max(overflows)) if overflows else "",
            max_rounds_ratio=float(np.max(ratios)) if ratios else "",
            gap_violations=sum(1 for g in gaps if g > GAP_CONSTANT) if gated else 0,
            overflow_violations=sum(1 for s in overflows if s > FEASIBILITY_CONSTANT) if gated else 0,
            rounds_violations=sum(1 for r in ratios if r > 1.0) if gated else 0,
            mean_wall_clock_ms=float(np.mean(clocks)) if clocks else "",
        )
        summary.append(entry)
    return summary


def write_summary(summary: list[dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SCHEMA_HEADER + "\n")
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for entry in summary:
            writer.writerow([_fmt(entry[c]) for c in SUMMARY_COLUMNS])
