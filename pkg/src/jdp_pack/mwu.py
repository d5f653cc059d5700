"""Deterministic primal-dual primitives for dual multiplicative weights.

Prices live on the scaled simplex: m + 1 nonnegative coordinates summing to
p_max, where the extra coordinate is a dummy resource with zero supply and
zero demand from every agent. All functions here are pure; the agent scans
are dense numpy reductions with a fixed order, so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Allocation, PackingInstance

L1_REL_TOL = 1e-9
_LOGSPACE_CUTOFF = 30.0  # beyond this, exp(-delta) under/overflows and we renormalize in log space


@dataclass(frozen=True, eq=False)
class PriceState:
    """Dual prices over m + 1 coordinates (last one is the dummy resource)."""

    p: np.ndarray
    p_max: float

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.p, dtype=np.float64))
        p_max = float(self.p_max)
        if p.ndim != 1 or p.shape[0] < 2:
            raise ValueError(f"prices must be a vector over m + 1 >= 2 coordinates, got shape {p.shape}")
        if not p_max > 0:
            raise ValueError(f"p_max must be positive, got {p_max}")
        if np.any(p < 0):
            raise ValueError("prices must be nonnegative")
        if abs(float(p.sum()) - p_max) > L1_REL_TOL * p_max:
            raise ValueError(f"prices must sum to p_max={p_max}, got {float(p.sum())}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "p_max", p_max)

    @property
    def num_resources(self) -> int:
        return self.p.shape[0] - 1


def initial_prices(m: int, p_max: float) -> PriceState:
    """Uniform start: every coordinate gets p_max / (m + 1)."""
    return PriceState(p=np.full(m + 1, p_max / (m + 1)), p_max=p_max)


def best_response(instance: PackingInstance, prices: PriceState) -> Allocation:
    """Allocate agent i fully iff v_i - sum_j a_ij p_j >= 0 (ties allocate)."""
    if prices.num_resources != instance.m:
        raise ValueError(f"price vector has {prices.num_resources} resources, instance has {instance.m}")
    cost = instance.demands @ prices.p[:-1]
    return Allocation((instance.values - cost >= 0.0).astype(np.float64))


def subgradient(instance: PackingInstance, alloc: Allocation) -> np.ndarray:
    """Dual subgradient g_j = b - sum_i a_ij x_i for j <= m; dummy coordinate 0."""
    if alloc.n != instance.n:
        raise ValueError(f"allocation has {alloc.n} agents, instance has {instance.n}")
    g = np.empty(instance.m + 1)
    g[:-1] = instance.b - alloc.x @ instance.demands
    g[-1] = 0.0
    return g


def step_size(g: np.ndarray, alpha: float, b: float) -> float:
    """eta = alpha / max(b, max_j |g_j|), so every price moves by at most alpha."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    return alpha / max(b, float(np.max(np.abs(g[:-1]))))


def mwu_update(prices: PriceState, deltas) -> PriceState:
    """Multiplicative step p'_j proportional to p_j exp(-delta_j), rescaled to p_max.

    Invariant under adding a common constant to every delta. Uses a log-space
    path for large |delta| to avoid under/overflow; in the solver |delta| <= 1
    so the plain path always runs there.
    """
    d = np.asarray(deltas, dtype=np.float64)
    if d.shape != prices.p.shape:
        raise ValueError(f"deltas shape {d.shape} does not match prices shape {prices.p.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("deltas must be finite")
    if float(np.max(np.abs(d))) > _LOGSPACE_CUTOFF:
        with np.errstate(divide="ignore"):  # log(0) = -inf keeps zero prices at zero
            logw = np.log(prices.p) - d
        finite = logw[np.isfinite(logw)]
        if finite.size == 0:
            raise ArithmeticError("all prices vanished in the multiplicative update")
        w = np.exp(logw - finite.max())
    else:
        w = prices.p * np.exp(-d)
    total = float(w.sum())
    if not (total > 0.0 and np.isfinite(total)):
        raise ArithmeticError("renormalization degenerate: total weight is zero or non-finite")
    return PriceState(p=prices.p_max * (w / total), p_max=prices.p_max)


def lagrangian(instance: PackingInstance, alloc: Allocation, prices: PriceState) -> float:
    """L(x, p) = sum_i v_i x_i - sum_{j<=m} (sum_i a_ij x_i - b) p_j.

    The dummy coordinate has zero supply and zero demand, so it never
    contributes.
    """
    if prices.num_resources != instance.m or alloc.n != instance.n:
        raise ValueError("dimension mismatch between instance, allocation, and prices")
    load = alloc.x @ instance.demands
    return float(instance.values @ alloc.x - (load - instance.b) @ prices.p[:-1])


def kl_divergence(p, q) -> float:
    """Generalized KL for nonnegative vectors: sum p ln(p/q) - p + q, with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("vectors must have equal length")
    mask = p > 0.0
    if np.any(q[mask] <= 0.0):
        return float("inf")
    core = float(np.sum(p[mask] * np.log(p[mask] / q[mask])))
    return core - float(p.sum()) + float(q.sum())
