"""Empirical verification of the solver's quantitative claims.

Four checks:

* ``check_divergence_lemma`` — numeric worst-case-event search for the noise
  family's privacy inequality Pr1[S] <= exp(4 eta ln(2/delta)/sigma) Pr2[S] + delta.
  The weighted density difference f1 - kappa f2 of two truncated Laplace
  densities is piecewise exponential with at most three sign changes, so the
  worst measurable S is a union of at most two intervals; the checker scans
  every grid sub-interval and every union of two disjoint ones via prefix
  sums, which is exact up to grid resolution.
* ``measure_regret`` — evaluates the no-regret inequality on a trace against
  an arbitrary l1-normalized comparator price vector.
* ``measure_feasibility`` — pre-scaling overflow of the averaged allocation.
* ``measure_rounds`` — round count and its per-type decomposition.

Constants in the O(.) bounds come from ``thresholds`` (calibrated once,
frozen); these functions only measure and report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import PackingInstance
from .mwu import kl_divergence
from .noise import TruncatedLaplace
from .solver import SolveResult
from .thresholds import REGRET_CONSTANT


@dataclass(frozen=True)
class HypothesisTuple:
    """One grid point for the divergence check."""

    mu1: float
    sigma1: float
    mu2: float
    sigma2: float
    eta: float
    alpha: float
    delta: float


@dataclass(frozen=True)
class DivergenceReport:
    params: HypothesisTuple
    hypothesis_ok: bool
    hypothesis_note: str
    kappa: float = float("nan")        # exp(4 eta ln(2/delta) / sigma)
    worst_set: tuple = ()              # up to two (lo, hi) intervals
    lhs_prob: float = float("nan")     # Pr1[worst_set]
    rhs_bound: float = float("nan")    # kappa * Pr2[worst_set] + delta
    excess: float = float("nan")       # max over scanned S of Pr1[S] - kappa * Pr2[S]
    violated: bool = False             # excess > delta beyond grid tolerance

    @property
    def violation(self) -> float:
        return self.excess - self.params.delta


def check_hypotheses(t: HypothesisTuple) -> str | None:
    """Return a note describing the first failed hypothesis, or None if all hold."""
    if not (0.0 < t.alpha < 1.0):
        return f"alpha={t.alpha} outside (0, 1)"
    if not (0.0 < t.eta <= t.alpha):
        return f"eta={t.eta} outside (0, alpha]"
    if not (-t.alpha <= t.mu1 <= t.alpha and -t.alpha <= t.mu2 <= t.alpha):
        return f"means ({t.mu1}, {t.mu2}) outside [-alpha, alpha]"
    if not (0.0 < t.sigma1 <= t.alpha and 0.0 < t.sigma2 <= t.alpha):
        return f"scales ({t.sigma1}, {t.sigma2}) outside (0, alpha]"
    sigma = max(t.sigma1, t.sigma2)
    if abs(1.0 / t.sigma1**2 - 1.0 / t.sigma2**2) > t.eta / (t.alpha * sigma**2) * (1 + 1e-12):
        return "precision gap |1/s1^2 - 1/s2^2| exceeds eta / (alpha sigma^2)"
    if abs(t.mu1 - t.mu2) > t.eta * (1 + 1e-12):
        return f"mean shift |mu1 - mu2| = {abs(t.mu1 - t.mu2):.4g} exceeds eta = {t.eta:.4g}"
    if not (0.0 < t.delta < 1.0) or t.delta > t.eta * math.log(2.0 / t.delta) / sigma:
        return "delta exceeds eta ln(2/delta) / sigma"
    return None


def _best_one_interval(weights: np.ndarray) -> tuple[float, int, int]:
    """Max-sum contiguous cell range via prefix sums; returns (sum, start, end)."""
    prefix = np.concatenate(([0.0], np.cumsum(weights)))
    run_min = np.minimum.accumulate(prefix[:-1])
    run_argmin = np.zeros(len(weights), dtype=np.intp)
    best_idx = 0
    for i in range(1, len(weights)):  # argmin of the running minimum
        if prefix[i] < prefix[best_idx]:
            best_idx = i
        run_argmin[i] = best_idx
    gains = prefix[1:] - run_min
    end = int(np.argmax(gains))
    return float(gains[end]), int(run_argmin[end]), end + 1


def _best_two_intervals(weights: np.ndarray) -> tuple[float, tuple]:
    """Best union of at most two disjoint cell ranges."""
    n = len(weights)
    prefix = np.concatenate(([0.0], np.cumsum(weights)))
    run_min = np.minimum.accumulate(prefix[:-1])
    left_end = prefix[1:] - run_min                   # best range ending exactly at e
    left_best = np.maximum.accumulate(left_end)       # best range within cells [0, e]
    suf_max = np.maximum.accumulate(prefix[::-1])[::-1]
    right_start = suf_max[1:] - prefix[:-1]           # best range starting exactly at s
    right_best = np.maximum.accumulate(right_start[::-1])[::-1]  # best within [s, n)
    best_single = float(left_best[-1])
    best = best_single
    split = None
    if n >= 2:
        pair = left_best[:-1] + right_best[1:]        # split after cell k
        k = int(np.argmax(pair))
        if float(pair[k]) > best:
            best = float(pair[k])
            split = k
    if best <= 0.0:
        return 0.0, ()
    if split is None:
        _, s, e = _best_one_interval(weights)
        return best, ((s, e),)
    _, s1, e1 = _best_one_interval(weights[: split + 1])
    val2, s2, e2 = _best_one_interval(weights[split + 1 :])
    if val2 <= 0.0:
        return best, ((s1, e1),)
    return best, ((s1, e1), (split + 1 + s2, split + 1 + e2))


def check_divergence_point(t: HypothesisTuple, grid_points: int = 2000,
                           tolerance: float = 1e-4) -> DivergenceReport:
    """Scan one hypothesis tuple; hypothesis failures are flagged, not scanned."""
    note = check_hypotheses(t)
    if note is not None:
        return DivergenceReport(params=t, hypothesis_ok=False, hypothesis_note=note)
    d1 = TruncatedLaplace(t.mu1, t.sigma1, t.alpha)
    d2 = TruncatedLaplace(t.mu2, t.sigma2, t.alpha)
    sigma = max(t.sigma1, t.sigma2)
    kappa = math.exp(4.0 * t.eta * math.log(2.0 / t.delta) / sigma)
    lo = min(d1.support[0], d2.support[0])
    hi = max(d1.support[1], d2.support[1])
    edges = np.linspace(lo, hi, grid_points + 1)
    cell1 = np.diff(d1.cdf(edges))
    cell2 = np.diff(d2.cdf(edges))
    # kappa can reach exp(50+); a single cell then dwarfs the float resolution
    # of the prefix sums. Clamping is lossless: a cell below -1 can never sit
    # inside an optimal set because the total positive mass available is <= 1.
    weights = np.maximum(cell1 - kappa * cell2, -2.0)
    excess, cells = _best_two_intervals(weights)
    worst = tuple((float(edges[s]), float(edges[e])) for s, e in cells)
    lhs = float(sum(cell1[s:e].sum() for s, e in cells))
    rhs = kappa * float(sum(cell2[s:e].sum() for s, e in cells)) + t.delta
    return DivergenceReport(
        params=t, hypothesis_ok=True, hypothesis_note="",
        kappa=kappa, worst_set=worst, lhs_prob=lhs, rhs_bound=rhs,
        excess=excess, violated=excess > t.delta + tolerance,
    )


def check_divergence_lemma(tuples, grid_points: int = 2000,
                           tolerance: float = 1e-4) -> list[DivergenceReport]:
    return [check_divergence_point(t, grid_points, tolerance) for t in tuples]


def divergence_grid(num_points: int, delta: float = 1e-6, seed: int = 0) -> list[HypothesisTuple]:
    """Sample valid hypothesis tuples inside the inequality's provable domain.

    sigma2 is drawn inside [sigma1 / sqrt(1 + eta/alpha), sigma1 * sqrt(1 + eta/alpha)]
    intersected with (0, alpha], which satisfies the precision-gap hypothesis
    by construction whichever of the two scales is larger.

    alpha is capped at 0.085: the two supports differ by the mean shift, the
    second density is exactly zero on the overhang, and the first one's mass
    there is about exp(-(1 - alpha - eta) / sigma) / 2. Keeping
    (1 - 2 alpha) / alpha above ln(1e4) pins that mass under the 1e-4 audit
    tolerance for every tuple in the grid; at larger alpha the inequality as
    stated genuinely fails on the overhang event (see the regression test
    exercising a large-alpha tuple).
    """
    rng = np.random.default_rng(seed)
    tuples = []
    while len(tuples) < num_points:
        alpha = rng.uniform(0.02, 0.085)
        eta = rng.uniform(0.05, 1.0) * alpha
        sigma1 = rng.uniform(0.2, 1.0) * alpha
        span = math.sqrt(1.0 + eta / alpha)
        sigma2 = rng.uniform(sigma1 / span, min(alpha, sigma1 * span))
        mu1 = rng.uniform(-alpha, alpha)
        shift = rng.uniform(-eta, eta)
        mu2 = min(alpha, max(-alpha, mu1 + shift))
        t = HypothesisTuple(mu1=mu1, sigma1=sigma1, mu2=mu2, sigma2=sigma2,
                            eta=eta, alpha=alpha, delta=delta)
        if check_hypotheses(t) is None:
            tuples.append(t)
    return tuples


def negative_control_tuple(delta: float = 1e-6) -> HypothesisTuple:
    """A deliberately broken point: the true mean shift is 10x the claimed eta."""
    alpha = 0.2
    eta = alpha / 10.0
    return HypothesisTuple(mu1=-alpha / 2, sigma1=alpha / 2, mu2=-alpha / 2 + 10 * eta,
                           sigma2=alpha / 2, eta=eta, alpha=alpha, delta=delta)


@dataclass(frozen=True)
class RegretReport:
    comparator: np.ndarray
    lhs: float
    kl: float
    slack_budget: float      # constant * alpha * n * eta_sum
    bound: float
    slack: float
    constant: float

    @property
    def ok(self) -> bool:
        return self.slack >= 0.0


def measure_regret(trace, instance: PackingInstance, comparator_p,
                   alpha: float, constant: float = REGRET_CONSTANT) -> RegretReport:
    """Evaluate sum_t eta_t (L(x_t, p_t) - L(x_t, p)) against KL(p||p1) + C alpha n eta_sum.

    L(x_t, q) is reconstructed from the trace as value_t + <subgrad_t, q>; the
    comparator must be l1-normalized to p_max = 2n/b over m + 1 coordinates.
    """
    p = np.asarray(comparator_p, dtype=np.float64)
    n, m, b = instance.n, instance.m, instance.b
    p_max = 2.0 * n / b
    if p.shape != (m + 1,):
        raise ValueError(f"comparator must have m + 1 = {m + 1} coordinates, got {p.shape}")
    if np.any(p < 0) or abs(float(p.sum()) - p_max) > 1e-9 * p_max:
        raise ValueError(f"comparator must be nonnegative with l1 norm p_max = {p_max}")
    lhs = 0.0
    for rec in trace:
        lagr_t = rec.value + float(rec.subgrad @ rec.prices_before)
        lagr_p = rec.value + float(rec.subgrad @ p)
        lhs += rec.eta * (lagr_t - lagr_p)
    p1 = np.full(m + 1, p_max / (m + 1))
    kl = kl_divergence(p, p1)
    eta_sum = math.log(m + 1) / (alpha * b)
    slack_budget = constant * alpha * n * eta_sum
    bound = kl + slack_budget
    return RegretReport(comparator=p, lhs=lhs, kl=kl, slack_budget=slack_budget,
                        bound=bound, slack=bound - lhs, constant=constant)


def canonical_comparators_from_load(instance: PackingInstance, load: np.ndarray) -> dict[str, np.ndarray]:
    """The two comparators driving the utility analysis.

    'dummy' puts all mass on the dummy coordinate (optimality direction);
    'overdemand' puts all mass on the most overloaded resource (feasibility
    direction).
    """
    m = instance.m
    p_max = 2.0 * instance.n / instance.b
    dummy = np.zeros(m + 1)
    dummy[-1] = p_max
    j_star = int(np.argmax(load - instance.b))
    over = np.zeros(m + 1)
    over[j_star] = p_max
    return {"dummy": dummy, "overdemand": over}


def canonical_comparators(instance: PackingInstance, result: SolveResult) -> dict[str, np.ndarray]:
    return canonical_comparators_from_load(instance, result.x_bar.x @ instance.demands)


def trace_load(trace, instance: PackingInstance, alpha: float) -> np.ndarray:
    """Per-resource load of the eta-averaged allocation, reconstructed from a trace.

    Uses load_t = b - subgrad_t coordinate-wise, so no per-round allocations
    need to be stored.
    """
    m, b = instance.m, instance.b
    eta_sum = math.log(m + 1) / (alpha * b)
    acc = np.zeros(m)
    eta_total = 0.0
    for rec in trace:
        acc += rec.eta * (b - rec.subgrad[:-1])
        eta_total += rec.eta
    return acc / eta_sum


@dataclass(frozen=True)
class FeasibilityReport:
    overflow: float          # s = max_j load_j(x_bar) - b
    ratio: float             # s / (alpha b)
    worst_resource: int
    post_scaling_max_load: float
    post_scaling_feasible: bool


def measure_feasibility(result: SolveResult, instance: PackingInstance) -> FeasibilityReport:
    load = result.x_bar.x @ instance.demands
    j = int(np.argmax(load))
    s = float(load[j]) - instance.b
    load_feasible = result.x_feasible.x @ instance.demands
    return FeasibilityReport(
        overflow=s,
        ratio=s / (result.constants.alpha * instance.b),
        worst_resource=j,
        post_scaling_max_load=float(load_feasible.max()),
        post_scaling_feasible=bool(load_feasible.max() <= instance.b),
    )


@dataclass(frozen=True)
class RoundsReport:
    rounds: int
    normalized: float                  # T / (m ln(m+1) / alpha^2)
    bound: float                       # 3 (m+1) ln(m+1) / alpha^2 + m + 1
    bound_ratio: float
    type_counts: dict[int, int] = field(default_factory=dict)
    type_bound: float = 0.0            # 3 ln(m+1) / alpha^2 + 1 per resource type
    type0_bound: float = 0.0           # ln(m+1) / alpha^2 + 1
    ok: bool = True


def measure_rounds(result: SolveResult) -> RoundsReport:
    m = result.constants.m
    alpha = result.constants.alpha
    log_m1 = math.log(m + 1)
    counts: dict[int, int] = {}
    for rec in result.trace:
        counts[rec.eta_type] = counts.get(rec.eta_type, 0) + 1
    bound = 3.0 * (m + 1) * log_m1 / alpha**2 + m + 1
    type_bound = 3.0 * log_m1 / alpha**2 + 1.0
    type0_bound = log_m1 / alpha**2 + 1.0
    ok = result.rounds <= bound
    ok = ok and counts.get(0, 0) <= type0_bound
    ok = ok and all(c <= type_bound for t, c in counts.items() if t != 0)
    denom = m * log_m1 / alpha**2
    return RoundsReport(
        rounds=result.rounds,
        normalized=result.rounds / denom,
        bound=bound,
        bound_ratio=result.rounds / bound,
        type_counts=counts,
        type_bound=type_bound,
        type0_bound=type0_bound,
        ok=ok,
    )


def recompute_round_types(result: SolveResult) -> list[int]:
    """Re-derive each round's type from its stored subgradient (self-consistency)."""
    b = result.constants.b
    types = []
    for rec in result.trace:
        gmax = float(np.max(np.abs(rec.subgrad[:-1])))
        types.append(0 if gmax <= b else int(np.argmax(np.abs(rec.subgrad[:-1]))) + 1)
    return types
