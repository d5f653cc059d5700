"""Acceptance gate: every analytical claim checked at desk scale.

Each test prints one PASS/FAIL line (visible with pytest -s; the test name
carries the criterion number either way). Grid criteria share one frozen
seed-grid fixture so the whole gate stays within a few minutes.
"""

import math
import time

import numpy as np
import pytest

import jdp_pack as j
from jdp_pack.audit import (
    canonical_comparators,
    check_divergence_lemma,
    check_divergence_point,
    divergence_grid,
    measure_feasibility,
    measure_regret,
    measure_rounds,
    negative_control_tuple,
)
from jdp_pack.baseline import knapsack_oracle, nonprivate_mwu
from jdp_pack.noise import TruncatedLaplace
from jdp_pack.solver import DerivedConstants, PrivacyParams, SolverConfig, solve
from jdp_pack.thresholds import (
    BUDGET_CONSTANT,
    FEASIBILITY_CONSTANT,
    GAP_CONSTANT,
    REGRET_CONSTANT,
)

DELTA = 1e-6
GRID_ALPHAS = (0.05, 0.1)
GRID_EPSILONS = (1.0, 5.0)
GRID_SEEDS = tuple(range(20))


def report(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, detail


def cell_supply(n, m, params):
    thr = DerivedConstants.from_problem(n, m, 1.0, params, SolverConfig()).supply_threshold
    return float(math.ceil(thr))


@pytest.fixture(scope="session")
def grid_runs():
    """The frozen experiment grid behind criteria 2, 3, 4, 8, 9."""
    runs = []
    for kind in ("uniform", "tight"):
        for alpha in GRID_ALPHAS:
            for eps in GRID_EPSILONS:
                params = PrivacyParams(eps, DELTA, alpha)
                b = cell_supply(2000, 1, params)
                for seed in GRID_SEEDS:
                    inst = j.generate(kind, 2000, 1, b, seed=seed)
                    result = solve(inst, params, seed=seed)
                    runs.append({
                        "kind": kind, "alpha": alpha, "eps": eps, "seed": seed,
                        "instance": inst, "result": result,
                        "opt": knapsack_oracle(inst).opt_value,
                    })
    return runs


@pytest.fixture(scope="session")
def scaling_runs():
    """Criterion 5: same supply, m = 10, n sweeping three decades."""
    params = PrivacyParams(1.0, DELTA, 0.1)
    b = cell_supply(10_000, 10, params)
    out = []
    started = time.perf_counter()
    for n in (10_000, 100_000, 1_000_000):
        inst = j.generate("uniform", n, 10, b, seed=0)
        t0 = time.perf_counter()
        result = solve(inst, params, seed=0)
        out.append({"n": n, "seconds": time.perf_counter() - t0, "result": result,
                    "alpha": 0.1})
    return {"runs": out, "total_seconds": time.perf_counter() - started}


class TestCriterion1ZeroNoiseDegeneracy:
    def test_criterion_1_zero_noise_matches_nonprivate_bit_exact(self):
        started = time.perf_counter()
        gen = np.random.default_rng(2024)
        mismatches = []
        for i in range(20):
            n = int(gen.integers(50, 1001))
            m = int(gen.integers(1, 9))
            b = float(gen.uniform(5.0, max(6.0, n / 3)))
            inst = j.generate("uniform", n, m, b, seed=i)
            alpha = float(gen.uniform(0.05, 0.2))
            res = solve(inst, PrivacyParams(1.0, DELTA, alpha),
                        SolverConfig(noise=False), seed=i)
            ref = nonprivate_mwu(inst, alpha).detail
            same = (
                len(res.trace) == len(ref.trace)
                and np.array_equal(res.x_bar.x, ref.x_bar.x)
                and all(
                    a.t == b2.t and a.eta == b2.eta and a.sigma == b2.sigma
                    and a.eta_type == b2.eta_type and a.value == b2.value
                    and a.epsilon_t == b2.epsilon_t
                    and np.array_equal(a.mu, b2.mu)
                    and np.array_equal(a.delta_realized, b2.delta_realized)
                    and np.array_equal(a.subgrad, b2.subgrad)
                    and np.array_equal(a.prices_before, b2.prices_before)
                    and np.array_equal(a.prices_after, b2.prices_after)
                    for a, b2 in zip(res.trace, ref.trace)
                )
            )
            if not same:
                mismatches.append(i)
        elapsed = time.perf_counter() - started
        ok = not mismatches and elapsed < 10.0
        report(1, ok, f"20 zero-noise runs bit-exact vs the non-private solver "
                      f"(mismatches={mismatches}, {elapsed:.1f}s < 10s)")


class TestCriterion2OptimalityGap:
    def test_criterion_2_gap_on_single_resource_grid(self, grid_runs):
        rows = [r for r in grid_runs if r["kind"] == "uniform"]
        violations = []
        worst = 0.0
        for r in rows:
            gap = r["opt"] - r["result"].objective_feasible
            ratio = gap / (r["alpha"] * r["instance"].n)
            worst = max(worst, ratio)
            if gap > GAP_CONSTANT * r["alpha"] * r["instance"].n:
                violations.append((r["alpha"], r["eps"], r["seed"], round(ratio, 3)))
        rate = len(violations) / len(rows)
        ok = rate <= 0.05
        report(2, ok, f"OPT - ALG <= {GAP_CONSTANT}·alpha·n on {len(rows)} uniform runs "
                      f"(worst ratio {worst:.3f}, violations {violations or 'none'}, "
                      f"rate {rate:.1%} <= 5%)")


class TestCriterion3FeasibilityOverflow:
    def test_criterion_3_overflow_on_tight_grid(self, grid_runs):
        rows = [r for r in grid_runs if r["kind"] == "tight"]
        violations = 0
        infeasible_after_scaling = 0
        worst = -math.inf
        for r in rows:
            rep = measure_feasibility(r["result"], r["instance"])
            worst = max(worst, rep.ratio)
            if rep.overflow > FEASIBILITY_CONSTANT * r["alpha"] * r["instance"].b:
                violations += 1
            if not rep.post_scaling_feasible:
                infeasible_after_scaling += 1
        rate = violations / len(rows)
        ok = rate <= 0.05 and infeasible_after_scaling == 0
        report(3, ok, f"pre-scaling s <= {FEASIBILITY_CONSTANT}·alpha·b on {len(rows)} tight "
                      f"runs (worst ratio {worst:.3f}, rate {rate:.1%} <= 5%); "
                      f"post-scaling infeasible: {infeasible_after_scaling} (zero tolerance)")


class TestCriterion4RoundCount:
    def test_criterion_4_round_bounds_every_run(self, grid_runs, scaling_runs):
        results = [(r["alpha"], r["result"]) for r in grid_runs]
        results += [(r["alpha"], r["result"]) for r in scaling_runs["runs"]]
        total_viol = 0
        worst_ratio = 0.0
        for alpha, res in results:
            m = res.constants.m
            log_m1 = math.log(m + 1)
            rep = measure_rounds(res)
            worst_ratio = max(worst_ratio, res.rounds / (3 * (m + 1) * log_m1 / alpha**2 + m + 1))
            if res.rounds > 3 * (m + 1) * log_m1 / alpha**2 + m + 1:
                total_viol += 1
            if rep.type_counts.get(0, 0) > log_m1 / alpha**2 + 1:
                total_viol += 1
            for t, c in rep.type_counts.items():
                if t != 0 and c > 3 * log_m1 / alpha**2 + 1:
                    total_viol += 1
        ok = total_viol == 0
        report(4, ok, f"T and per-type counts within bounds on {len(results)} runs "
                      f"(worst T/bound {worst_ratio:.3f}, violations {total_viol}, zero tolerance)")


class TestCriterion5LinearScaling:
    def test_criterion_5_wall_clock_slope_and_stable_rounds(self, scaling_runs):
        runs = scaling_runs["runs"]
        ns = np.array([r["n"] for r in runs], dtype=float)
        secs = np.array([r["seconds"] for r in runs])
        rounds = np.array([r["result"].rounds for r in runs])
        slope = float(np.polyfit(np.log(ns), np.log(secs), 1)[0])
        rounds_ratio = float(rounds.max() / rounds.min())
        ok = 0.8 <= slope <= 1.2 and rounds_ratio <= 2.0 and scaling_runs["total_seconds"] < 600
        report(5, ok, f"wall-clock log-log slope {slope:.3f} in [0.8, 1.2] over n=1e4..1e6 "
                      f"(times {np.round(secs, 2).tolist()}s, rounds {rounds.tolist()}, "
                      f"max/min {rounds_ratio:.2f} <= 2, total {scaling_runs['total_seconds']:.0f}s < 600s)")


class TestCriterion6NoiseStatistics:
    def test_criterion_6_moments_on_parameter_grid(self):
        started = time.perf_counter()
        gen = np.random.default_rng(7)
        draws = 200_000
        mean_fail = var_bound_fail = var_match_fail = 0
        for _ in range(100):
            alpha = float(gen.uniform(0.05, 0.5))
            sigma = float(gen.uniform(0.05, 1.0)) * alpha
            mu = float(gen.uniform(-1.0, 1.0)) * alpha
            dist = TruncatedLaplace(mu, sigma, alpha)
            exact = dist.variance_exact()
            if not exact <= 2.0 * sigma**2 * (1 + 1e-12):
                var_bound_fail += 1
            x = dist.sample(gen, size=draws)
            se_mean = x.std(ddof=1) / math.sqrt(draws)
            if abs(x.mean() - mu) > 4.0 * se_mean:
                mean_fail += 1
            centered = x - mu
            sample_var = float(np.mean(centered**2))
            fourth = float(np.mean(centered**4))
            se_var = math.sqrt(max(fourth - sample_var**2, 0.0) / draws)
            if abs(sample_var - exact) > 3.0 * se_var:
                var_match_fail += 1
        elapsed = time.perf_counter() - started
        # 4-SE and 3-SE events leave a small statistical residue over 100 cells
        ok = mean_fail <= 2 and var_bound_fail == 0 and var_match_fail <= 2 and elapsed < 60
        report(6, ok, f"100-point grid, {draws} draws each: mean beyond 4 SE in {mean_fail} cells "
                      f"(<=2), exact variance above 2·sigma^2 in {var_bound_fail} (zero), "
                      f"MC variance beyond 3 SE of exact in {var_match_fail} (<=2), "
                      f"{elapsed:.0f}s < 60s")


class TestCriterion7DivergenceLemma:
    def test_criterion_7_divergence_check_and_negative_control(self):
        started = time.perf_counter()
        reports = check_divergence_lemma(divergence_grid(200, delta=DELTA, seed=0))
        control = check_divergence_point(negative_control_tuple(DELTA))
        worst = max(r.excess for r in reports if r.hypothesis_ok)
        elapsed = time.perf_counter() - started
        ok = (all(r.hypothesis_ok for r in reports)
              and worst <= DELTA + 1e-4
              and not any(r.violated for r in reports)
              and not control.hypothesis_ok
              and elapsed < 60)
        report(7, ok, f"200 valid tuples: max excess {worst:.2e} <= delta + 1e-4; "
                      f"negative control flagged ({control.hypothesis_note!r}); "
                      f"{elapsed:.1f}s < 60s")


class TestCriterion8PrivacyBudget:
    def test_criterion_8_composed_budget_and_per_round_regime(self, grid_runs):
        budget_viol = regime_viol = 0
        worst_ratio = 0.0
        for r in grid_runs:
            res = r["result"]
            cap = BUDGET_CONSTANT * r["eps"] ** 2 / math.log(2.0 / DELTA)
            worst_ratio = max(worst_ratio, res.epsilon_spent / cap)
            if res.epsilon_spent > cap:
                budget_viol += 1
            for rec in res.trace:
                if (float(np.max(np.abs(rec.mu))) > r["alpha"] * (1 + 1e-12)
                        or rec.sigma > r["alpha"]):
                    regime_viol += 1
        ok = budget_viol == 0 and regime_viol == 0
        report(8, ok, f"privacy_spent <= {BUDGET_CONSTANT}·eps^2/ln(2/delta) on all "
                      f"{len(grid_runs)} runs (worst spent/cap {worst_ratio:.3f}); "
                      f"per-round |mu|<=alpha and sigma<=alpha violations: {regime_viol} "
                      f"(zero tolerance)")


class TestCriterion9RegretBound:
    def test_criterion_9_no_regret_for_canonical_comparators(self, grid_runs):
        checks = 0
        violations = 0
        worst_need = -math.inf
        for r in grid_runs:
            inst, res = r["instance"], r["result"]
            eta_sum = res.constants.eta_sum
            for name, comp in canonical_comparators(inst, res).items():
                rep = measure_regret(res.trace, inst, comp, r["alpha"],
                                     constant=REGRET_CONSTANT)
                checks += 1
                need = (rep.lhs - rep.kl) / (r["alpha"] * inst.n * eta_sum)
                worst_need = max(worst_need, need)
                if not rep.ok:
                    violations += 1
        rate = violations / checks
        ok = rate <= 0.05
        report(9, ok, f"lhs <= KL + {REGRET_CONSTANT}·alpha·n·eta_sum on {checks} "
                      f"(run, comparator) pairs (worst implied constant {worst_need:.3f}, "
                      f"rate {rate:.1%} <= 5%)")
