"""Private dual multiplicative-weight solver for packing problems.

Each round posts an l1-normalized price vector, lets every agent best-respond,
and moves prices multiplicatively along the noisy dual subgradient. Step sizes
adapt to the subgradient scale (eta = alpha / max(b, max_j |g_j|)) and the
truncated-Laplace noise scale adapts with them (sigma proportional to
sqrt(eta)), so large-step rounds get less noise and small-step rounds more.
The loop stops once the privately counted sum of step sizes reaches eta_sum,
and the output is the step-size-weighted average of the per-round best
responses. Prices are the only cross-agent state, which is what makes the
released allocations jointly private.

Per-round privacy is accounted as epsilon_t = 4 eta_t ln(2/delta) / sigma_t
(the divergence factor of the noise family); ``privacy_spent`` composes the
squares so the budget claim is measurable rather than asymptotic.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .counter import PrivateCounter
from .instance import Allocation, InstanceError, PackingInstance, validate
from .mwu import best_response, initial_prices, mwu_update, step_size, subgradient
from .noise import sample_truncated_laplace
from .thresholds import BUDGET_CONSTANT


class SupplyConditionError(ValueError):
    """Supply b is below the threshold required by the privacy analysis."""


class NoiseRegimeError(RuntimeError):
    """A round produced sigma_t > alpha, outside the noise family's privacy regime."""


class PrivacyBudgetError(RuntimeError):
    """Composed per-round budgets exceeded the configured cap."""


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy and approximation targets: (epsilon, delta)-JDP at additive alpha n."""

    epsilon: float
    delta: float
    alpha: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class SolverConfig:
    """Knobs consumed from the CLI.

    noise=False is a test mode: the update uses the exact means and the trace
    records sigma = epsilon_t = 0, which makes the run bit-identical to the
    non-private baseline.
    """

    counter_mode: str = "exact"  # "exact" | "tree"
    noise: bool = True
    c0: float = 1.0              # supply-condition constant
    c1: float = 3.0              # round-guard constant
    counter_share: float = 0.1   # budget share carved out for the tree counter
    override_supply_check: bool = False
    budget_constant: float = BUDGET_CONSTANT
    reproducible: bool = True    # dense numpy reductions already have a fixed order

    def __post_init__(self):
        if self.counter_mode not in ("exact", "tree"):
            raise ValueError(f"counter_mode must be 'exact' or 'tree', got {self.counter_mode!r}")
        if not 0.0 < self.counter_share < 1.0:
            raise ValueError(f"counter_share must lie in (0, 1), got {self.counter_share}")


@dataclass(frozen=True)
class DerivedConstants:
    """Constants the loop runs on, derived from (instance shape, params, config)."""

    n: int
    m: int
    b: float
    epsilon: float
    delta: float
    alpha: float
    p_max: float
    eta_sum: float
    t_max: int
    log_term: float          # ln(t_max * m / delta), the factor inside sigma_t
    epsilon_solver: float    # budget driving the noise scales
    epsilon_counter: float   # budget carved out for the tree counter (0 in exact mode)
    supply_threshold: float

    @classmethod
    def from_problem(cls, n: int, m: int, b: float, params: PrivacyParams,
                     config: SolverConfig, t_max_override: int | None = None) -> "DerivedConstants":
        alpha = params.alpha
        eps_counter = params.epsilon * config.counter_share if config.counter_mode == "tree" else 0.0
        eps_solver = params.epsilon - eps_counter
        t_max = t_max_override if t_max_override is not None else int(
            math.ceil(config.c1 * (m + 1) * math.log(m + 1) / alpha**2)
        )
        t_max = max(t_max, 1)
        log_term = math.log(t_max * m / params.delta)
        threshold = config.c0 * math.sqrt(m * math.log(m + 1) * log_term) / (alpha * eps_solver)
        return cls(
            n=n, m=m, b=float(b),
            epsilon=params.epsilon, delta=params.delta, alpha=alpha,
            p_max=2.0 * n / b,
            eta_sum=math.log(m + 1) / (alpha * b),
            t_max=t_max,
            log_term=log_term,
            epsilon_solver=eps_solver,
            epsilon_counter=eps_counter,
            supply_threshold=threshold,
        )


@dataclass(frozen=True, eq=False)
class RoundRecord:
    """Everything one round contributed to the trace.

    ``eta_type`` is 0 when the alpha/b cap bound the step, else the 1-based
    argmax resource. ``value`` is sum_i v_i x^t_i; together with the
    subgradient it reconstructs L(x^t, p) for any comparator p.
    """

    t: int
    eta: float
    sigma: float
    eta_type: int
    mu: np.ndarray
    delta_realized: np.ndarray
    subgrad: np.ndarray
    prices_before: np.ndarray
    prices_after: np.ndarray
    value: float
    epsilon_t: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "eta": self.eta,
            "sigma": self.sigma,
            "eta_type": self.eta_type,
            "mu": self.mu.tolist(),
            "delta_realized": self.delta_realized.tolist(),
            "subgrad": self.subgrad.tolist(),
            "prices_before": self.prices_before.tolist(),
            "prices_after": self.prices_after.tolist(),
            "value": self.value,
            "epsilon_t": self.epsilon_t,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        return cls(
            t=int(d["t"]), eta=float(d["eta"]), sigma=float(d["sigma"]),
            eta_type=int(d["eta_type"]),
            mu=np.asarray(d["mu"], dtype=np.float64),
            delta_realized=np.asarray(d["delta_realized"], dtype=np.float64),
            subgrad=np.asarray(d["subgrad"], dtype=np.float64),
            prices_before=np.asarray(d["prices_before"], dtype=np.float64),
            prices_after=np.asarray(d["prices_after"], dtype=np.float64),
            value=float(d["value"]), epsilon_t=float(d["epsilon_t"]),
        )


@dataclass(frozen=True, eq=False)
class SolveResult:
    x_bar: Allocation
    x_feasible: Allocation
    objective_bar: float
    objective_feasible: float
    overflow_s: float
    rounds: int
    trace: tuple[RoundRecord, ...]
    epsilon_spent: float
    eta_total: float
    scale_factor: float
    constants: DerivedConstants
    trivial: bool = False
    t_max_guard_hit: bool = False
    regime_violated: bool = False
    supply_ok: bool = True

    def summary_dict(self) -> dict:
        return {
            "n": self.constants.n,
            "m": self.constants.m,
            "b": self.constants.b,
            "epsilon": self.constants.epsilon,
            "delta": self.constants.delta,
            "alpha": self.constants.alpha,
            "objective_bar": self.objective_bar,
            "objective_feasible": self.objective_feasible,
            "overflow_s": self.overflow_s,
            "rounds": self.rounds,
            "eta_total": self.eta_total,
            "epsilon_spent": self.epsilon_spent,
            "scale_factor": self.scale_factor,
            "trivial": self.trivial,
            "t_max_guard_hit": self.t_max_guard_hit,
            "regime_violated": self.regime_violated,
            "supply_ok": self.supply_ok,
        }


def feasible_scale_factor(instance: PackingInstance, alloc: Allocation) -> float:
    """Smallest uniform scale-down making every resource load <= b and x <= 1.

    The factor covers the unit box as well because the eta_sum-normalized
    average can exceed 1 by the stopping overshoot.
    """
    load = alloc.x @ instance.demands
    return max(1.0, float(load.max()) / instance.b, float(alloc.x.max()))


def scale_to_feasible(instance: PackingInstance, alloc: Allocation) -> Allocation:
    """Divide by feasible_scale_factor; the objective shrinks by exactly that factor."""
    factor = feasible_scale_factor(instance, alloc)
    if factor == 1.0:
        return alloc
    return Allocation(alloc.x / factor)


def privacy_spent(trace) -> float:
    """Compose per-round budgets: sum over rounds and noisy coordinates of epsilon_t^2."""
    total = 0.0
    for rec in trace:
        m = rec.mu.shape[0] - 1
        total += m * rec.epsilon_t**2
    return total


def _trivial_result(instance: PackingInstance, consts: DerivedConstants,
                    supply_ok: bool) -> SolveResult:
    # n < b: granting everyone is feasible since every resource load is <= n < b
    ones = Allocation(np.ones(instance.n))
    factor = feasible_scale_factor(instance, ones)
    x_feasible = scale_to_feasible(instance, ones)
    load = ones.x @ instance.demands
    objective = float(instance.values.sum())
    return SolveResult(
        x_bar=ones, x_feasible=x_feasible,
        objective_bar=objective, objective_feasible=objective / factor,
        overflow_s=float(load.max()) - instance.b,
        rounds=0, trace=(), epsilon_spent=0.0, eta_total=0.0,
        scale_factor=factor, constants=consts, trivial=True, supply_ok=supply_ok,
    )


def _run_loop(instance: PackingInstance, consts: DerivedConstants, config: SolverConfig,
              seed: int, fixed_eta: float | None = None) -> SolveResult:
    n, m, b = consts.n, consts.m, consts.b
    alpha = consts.alpha
    noise_seq, counter_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(noise_seq)
    counter = PrivateCounter(
        mode=config.counter_mode,
        max_value=alpha / b if fixed_eta is None else fixed_eta,
        epsilon=consts.epsilon_counter if config.counter_mode == "tree" else None,
        t_max=consts.t_max if config.counter_mode == "tree" else None,
        rng=np.random.default_rng(counter_seq) if config.counter_mode == "tree" else None,
    )
    ln2d = math.log(2.0 / consts.delta)
    sigma_coeff = math.sqrt(m * consts.eta_sum * consts.log_term) / consts.epsilon_solver

    prices = initial_prices(m, consts.p_max)
    xbar_accum = np.zeros(n)
    trace: list[RoundRecord] = []
    guard_hit = False
    regime_violated = False
    t = 0
    while True:
        t += 1
        alloc = best_response(instance, prices)
        g = subgradient(instance, alloc)
        if fixed_eta is None:
            eta = step_size(g, alpha, b)
            gmax = float(np.max(np.abs(g[:-1])))
            eta_type = 0 if gmax <= b else int(np.argmax(np.abs(g[:-1]))) + 1
        else:
            eta = fixed_eta
            eta_type = 0
        mu = eta * g  # dummy coordinate stays exactly 0
        if config.noise:
            sigma = sigma_coeff * math.sqrt(eta)
            if sigma > alpha:
                if not config.override_supply_check:
                    raise NoiseRegimeError(
                        f"round {t}: sigma={sigma:.4g} exceeds alpha={alpha}; the noise "
                        f"regime needs b >= {consts.supply_threshold:.4g} (got b={b}); "
                        f"refusing rather than clipping"
                    )
                regime_violated = True
            delta_vec = np.empty(m + 1)
            delta_vec[:-1] = sample_truncated_laplace(mu[:-1], sigma, alpha, rng)
            delta_vec[-1] = 0.0
            epsilon_t = 4.0 * eta * ln2d / sigma
        else:
            sigma = 0.0
            delta_vec = mu.copy()
            epsilon_t = 0.0
        new_prices = mwu_update(prices, delta_vec)
        counter.add(eta)
        xbar_accum += eta * alloc.x
        trace.append(RoundRecord(
            t=t, eta=eta, sigma=sigma, eta_type=eta_type, mu=mu,
            delta_realized=delta_vec, subgrad=g,
            prices_before=prices.p, prices_after=new_prices.p,
            value=float(instance.values @ alloc.x), epsilon_t=epsilon_t,
        ))
        prices = new_prices
        if counter.read() >= consts.eta_sum:
            break
        if t >= consts.t_max:
            guard_hit = True
            warnings.warn(f"round guard t_max={consts.t_max} hit before the step-size "
                          f"budget filled (sum={counter.true_sum:.4g} of {consts.eta_sum:.4g})")
            break

    x_bar = Allocation(xbar_accum / consts.eta_sum)
    factor = feasible_scale_factor(instance, x_bar)
    x_feasible = scale_to_feasible(instance, x_bar)
    load = x_bar.x @ instance.demands
    spent = privacy_spent(trace)
    if config.noise and not regime_violated:
        budget_cap = config.budget_constant * consts.epsilon**2 / ln2d
        if spent > budget_cap:
            raise PrivacyBudgetError(
                f"composed budget {spent:.4g} exceeds cap {budget_cap:.4g} "
                f"({config.budget_constant} * eps^2 / ln(2/delta))"
            )
    return SolveResult(
        x_bar=x_bar, x_feasible=x_feasible,
        objective_bar=float(instance.values @ x_bar.x),
        objective_feasible=float(instance.values @ x_feasible.x),
        overflow_s=float(load.max()) - b,
        rounds=t, trace=tuple(trace),
        epsilon_spent=spent, eta_total=counter.true_sum,
        scale_factor=factor, constants=consts,
        t_max_guard_hit=guard_hit, regime_violated=regime_violated,
        supply_ok=b >= consts.supply_threshold,
    )


def solve(instance: PackingInstance, params: PrivacyParams,
          config: SolverConfig | None = None, seed: int = 0) -> SolveResult:
    """Run the private dual MWU loop end to end.

    Deterministic given (instance, params, config, seed). Raises
    SupplyConditionError when noise is on and b is below the threshold
    (unless config.override_supply_check), NoiseRegimeError if a round would
    need sigma > alpha, and PrivacyBudgetError if the composed budget exceeds
    the configured cap. Returns the trivial all-ones solution when n < b.
    """
    config = config or SolverConfig()
    report = validate(instance)
    if not report.ok:
        raise InstanceError(report.problems[0])
    consts = DerivedConstants.from_problem(instance.n, instance.m, instance.b, params, config)
    supply_ok = instance.b >= consts.supply_threshold
    if config.noise and not supply_ok:
        if not config.override_supply_check:
            raise SupplyConditionError(
                f"supply b={instance.b} is below the threshold {consts.supply_threshold:.4g} "
                f"(c0={config.c0}); pass override_supply_check to run anyway"
            )
        warnings.warn(f"supply b={instance.b} below threshold {consts.supply_threshold:.4g}; "
                      f"running with the check overridden")
    if instance.n < instance.b:
        return _trivial_result(instance, consts, supply_ok)
    return _run_loop(instance, consts, config, seed)


def write_trace_jsonl(trace, path) -> None:
    """One RoundRecord per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace:
            fh.write(json.dumps(rec.to_dict()))
            fh.write("\n")


def read_trace_jsonl(path) -> tuple[RoundRecord, ...]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(RoundRecord.from_dict(json.loads(line)))
    return tuple(records)
