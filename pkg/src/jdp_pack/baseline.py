"""Non-private reference solvers and exact oracles grounding utility comparisons.

``knapsack_oracle`` is the exact LP optimum for m = 1 (greedy by value
density, provably optimal for the fractional knapsack). For m > 1 there is no
closed-form oracle; ``nonprivate_mwu`` run at a small alpha (0.01 by
convention) serves as the high-precision reference, and all comparisons
account for its own alpha-gap. Both baselines share the tie rule and loop
code with the private solver, which is what makes the zero-noise equivalence
check meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .instance import Allocation, InstanceError, PackingInstance, validate
from .solver import (
    DerivedConstants,
    PrivacyParams,
    SolveResult,
    SolverConfig,
    _run_loop,
    _trivial_result,
)


@dataclass(frozen=True, eq=False)
class OracleResult:
    """A feasible reference allocation and its objective.

    ``detail`` carries the full SolveResult (trace included) for MWU-based
    oracles; the greedy oracle leaves it None.
    """

    x_opt: Allocation
    opt_value: float
    method: str
    detail: SolveResult | None = None


def knapsack_oracle(instance: PackingInstance) -> OracleResult:
    """Exact fractional-knapsack optimum; requires m == 1.

    Agents sorted by v_i / a_i1 descending (zero-demand agents first, they are
    free), filled until the supply b is exhausted, fractional last item.
    """
    if instance.m != 1:
        raise ValueError(f"knapsack oracle requires m == 1, got m = {instance.m}")
    a = instance.demands[:, 0]
    v = instance.values
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(a > 0.0, v / a, np.inf)
    order = np.argsort(-ratio, kind="stable")
    a_sorted = a[order]
    cum = np.cumsum(a_sorted)
    x_sorted = np.zeros(instance.n)
    x_sorted[cum <= instance.b] = 1.0
    k = int(np.searchsorted(cum, instance.b, side="right"))
    if k < instance.n and a_sorted[k] > 0.0:
        spent = cum[k - 1] if k > 0 else 0.0
        x_sorted[k] = (instance.b - spent) / a_sorted[k]
    x = np.empty(instance.n)
    x[order] = x_sorted
    alloc = Allocation(x)
    return OracleResult(x_opt=alloc, opt_value=float(v @ x), method="greedy-knapsack")


def nonprivate_mwu(instance: PackingInstance, alpha: float, config: SolverConfig | None = None) -> OracleResult:
    """The solver's loop with the noise removed; the epsilon -> infinity reference.

    At small alpha (0.01) this is the high-precision reference optimum for
    m > 1. Deterministic; the returned detail trace is bit-identical to a
    noise-disabled private solve on the same instance.
    """
    report = validate(instance)
    if not report.ok:
        raise InstanceError(report.problems[0])
    base = config or SolverConfig()
    config = SolverConfig(
        counter_mode="exact", noise=False,
        c0=base.c0, c1=base.c1, counter_share=base.counter_share,
        override_supply_check=True, budget_constant=base.budget_constant,
        reproducible=base.reproducible,
    )
    # epsilon/delta are inert with noise off; any valid values produce the same run
    params = PrivacyParams(epsilon=1.0, delta=1e-6, alpha=alpha)
    consts = DerivedConstants.from_problem(instance.n, instance.m, instance.b, params, config)
    if instance.n < instance.b:
        result = _trivial_result(instance, consts, supply_ok=instance.b >= consts.supply_threshold)
    else:
        result = _run_loop(instance, consts, config, seed=0)
    return OracleResult(
        x_opt=result.x_feasible,
        opt_value=result.objective_feasible,
        method="high-precision-mwu",
        detail=result,
    )


def fixed_step_mwu(instance: PackingInstance, params: PrivacyParams,
                   seed: int = 0, config: SolverConfig | None = None) -> SolveResult:
    """Width-scaled uniform-step baseline: eta = alpha / n every round.

    Same loop, trace format, and noise-scale formula as the solver, but eta
    (and hence sigma) is held constant, so the round count grows linearly
    with n. Qualitative comparison baseline only.
    """
    config = config or SolverConfig()
    report = validate(instance)
    if not report.ok:
        raise InstanceError(report.problems[0])
    eta = params.alpha / instance.n
    eta_sum = math.log(instance.m + 1) / (params.alpha * instance.b)
    t_fixed = int(math.ceil(eta_sum / eta)) + 1
    consts = DerivedConstants.from_problem(
        instance.n, instance.m, instance.b, params, config, t_max_override=t_fixed
    )
    supply_ok = instance.b >= consts.supply_threshold
    if config.noise and not supply_ok and not config.override_supply_check:
        raise ValueError(
            f"supply b={instance.b} below threshold {consts.supply_threshold:.4g}; "
            f"pass override_supply_check to run anyway"
        )
    if instance.n < instance.b:
        return _trivial_result(instance, consts, supply_ok)
    return _run_loop(instance, consts, config, seed, fixed_eta=eta)
