"""Packing-problem data model: validation, synthetic generators, JSON i/o.

An instance holds n agents, each with a value v_i in [0, 1] and a demand row
a_i in [0, 1]^m, plus a common per-resource supply b > 0. Instances are
immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

GENERATOR_KINDS = ("uniform", "correlated", "tight")


class InstanceError(ValueError):
    """Malformed instance file or invariant violation at load time."""


@dataclass(frozen=True, eq=False)
class PackingInstance:
    """Dataset for one packing problem.

    Attributes:
        values: shape (n,), agent values v_i in [0, 1].
        demands: shape (n, m), per-agent demand rows a_ij in [0, 1].
        b: scalar supply, identical for every resource.
    """

    values: np.ndarray
    demands: np.ndarray
    b: float

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        demands = np.ascontiguousarray(np.asarray(self.demands, dtype=np.float64))
        if values.ndim != 1:
            raise InstanceError(f"values must be a vector, got shape {values.shape}")
        if demands.ndim != 2:
            raise InstanceError(f"demands must be a matrix, got shape {demands.shape}")
        if demands.shape[0] != values.shape[0]:
            raise InstanceError(
                f"demand rows ({demands.shape[0]}) do not match values ({values.shape[0]})"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "demands", demands)
        object.__setattr__(self, "b", float(self.b))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.demands.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PackingInstance):
            return NotImplemented
        return (
            self.b == other.b
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.demands, other.demands)
        )


@dataclass(frozen=True, eq=False)
class Allocation:
    """Fractional allocation, one coordinate per agent."""

    x: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.float64))
        if x.ndim != 1:
            raise ValueError(f"allocation must be a vector, got shape {x.shape}")
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Allocation):
            return NotImplemented
        return np.array_equal(self.x, other.x)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    problems: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def validate(instance: PackingInstance) -> ValidationReport:
    """Check all instance invariants; report the first offending index per field."""
    problems = []
    if instance.n < 1:
        problems.append("instance must have at least one agent")
    if instance.m < 1:
        problems.append("instance must have at least one resource")
    if not (instance.b > 0) or not math.isfinite(instance.b):
        problems.append("supply must be positive")
    bad_v = np.flatnonzero(~((instance.values >= 0.0) & (instance.values <= 1.0)))
    if bad_v.size:
        i = int(bad_v[0])
        problems.append(f"value out of [0, 1] at index {i}: {instance.values[i]!r}")
    bad_a = np.argwhere(~((instance.demands >= 0.0) & (instance.demands <= 1.0)))
    if bad_a.size:
        i, j = (int(k) for k in bad_a[0])
        problems.append(f"demand out of [0, 1] at agent {i}, resource {j}: {instance.demands[i, j]!r}")
    return ValidationReport(ok=not problems, problems=tuple(problems))


def generate(kind: str, n: int, m: int, b: float, seed: int) -> PackingInstance:
    """Generate a synthetic instance, deterministic in (kind, n, m, b, seed).

    Kinds:
        uniform: v_i and a_ij i.i.d. uniform on [0, 1].
        correlated: demands uniform, v_i proportional to the agent's total
            demand (clipped to [0, 1]); punishes value-blind heuristics.
        tight: demand columns rescaled so every resource's total demand is
            about 2b, so the supply constraints bind near x = 1/2.
    """
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"unknown generator kind {kind!r}; expected one of {GENERATOR_KINDS}")
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    if not b > 0:
        raise ValueError(f"need b > 0, got b={b}")
    rng = np.random.default_rng(seed)
    demands = rng.random((n, m))
    if kind == "uniform":
        values = rng.random(n)
    elif kind == "correlated":
        values = np.clip(demands.mean(axis=1), 0.0, 1.0)
    else:  # tight; the clip only bites when n < 4b, which leaves slack below 2b
        demands = np.clip(demands * (2.0 * b / demands.sum(axis=0)), 0.0, 1.0)
        values = rng.random(n)
    return PackingInstance(values=values, demands=demands, b=float(b))


def save(instance: PackingInstance, path) -> None:
    """Write the canonical JSON form (floats keep full round-trip precision)."""
    payload = {
        "n": instance.n,
        "m": instance.m,
        "b": instance.b,
        "values": instance.values.tolist(),
        "demands": instance.demands.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load(path) -> PackingInstance:
    """Read an instance from canonical JSON; validate invariants before returning."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise InstanceError(f"{path}: expected a JSON object at top level")
    for key in ("n", "m", "b", "values", "demands"):
        if key not in payload:
            raise InstanceError(f"{path}: missing field {key!r}")
    try:
        instance = PackingInstance(
            values=np.asarray(payload["values"], dtype=np.float64),
            demands=np.asarray(payload["demands"], dtype=np.float64),
            b=float(payload["b"]),
        )
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"{path}: malformed field: {exc}") from exc
    if instance.n != int(payload["n"]) or instance.m != int(payload["m"]):
        raise InstanceError(
            f"{path}: declared shape n={payload['n']}, m={payload['m']} "
            f"does not match arrays (n={instance.n}, m={instance.m})"
        )
    report = validate(instance)
    if not report.ok:
        raise InstanceError(f"{path}: {report.problems[0]}")
    return instance
