"""Running-sum counters backing the solver's stopping rule.

Two modes:

* ``exact`` — read() returns the true running sum. This is the default; the
  stopping rule is analyzed as if exact, and utility experiments use it.
* ``tree`` — the classical binary mechanism: the update stream is organized
  into dyadic blocks, each block carries one Laplace noise draw, and a read
  sums the O(log t) completed blocks that cover the stream. With per-node
  scale (depth * max_value / epsilon) the read error is zero-mean with
  magnitude O(log^2(t_max) * max_value / epsilon).

Node noises are drawn at the moment a block completes, so the draw order (and
hence the whole counter) is a deterministic function of the rng seed,
independent of when read() is called.
"""

from __future__ import annotations

import math

import numpy as np

_MODES = ("exact", "tree")


class PrivateCounter:
    """Append-only sum over values in (0, max_value].

    Args:
        mode: "exact" or "tree".
        max_value: upper bound on appended values (the solver passes alpha/b).
        epsilon: counter budget; required in tree mode.
        t_max: capacity bound fixing the tree depth; required in tree mode.
        rng: numpy Generator for node noises; required in tree mode.
        noise_scale: per-node Laplace scale override (tests force 0 with it).
    """

    def __init__(self, mode: str = "exact", max_value: float = math.inf,
                 epsilon: float | None = None, t_max: int | None = None,
                 rng: np.random.Generator | None = None,
                 noise_scale: float | None = None):
        if mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
        if not max_value > 0:
            raise ValueError(f"max_value must be positive, got {max_value}")
        self.mode = mode
        self.max_value = float(max_value)
        self._prefix = [0.0]
        if mode == "tree":
            if t_max is None or t_max < 1:
                raise ValueError("tree mode needs t_max >= 1")
            if rng is None:
                raise ValueError("tree mode needs an rng for node noises")
            self.t_max = int(t_max)
            self.levels = int(math.ceil(math.log2(self.t_max))) + 1 if self.t_max > 1 else 1
            if noise_scale is None:
                if epsilon is None or epsilon <= 0:
                    raise ValueError("tree mode needs epsilon > 0 (or an explicit noise_scale)")
                noise_scale = self.levels * self.max_value / epsilon
            self.noise_scale = float(noise_scale)
            self.epsilon = epsilon
            self._rng = rng
            self._node_noise: dict[tuple[int, int], float] = {}
        else:
            self.t_max = None
            self.noise_scale = 0.0
            self.epsilon = epsilon

    @property
    def count(self) -> int:
        return len(self._prefix) - 1

    @property
    def true_sum(self) -> float:
        return self._prefix[-1]

    def add(self, value: float) -> None:
        """Append one value; draws noise for every dyadic block this completes."""
        if not (0.0 < value <= self.max_value):
            raise ValueError(f"value must lie in (0, {self.max_value}], got {value}")
        self._prefix.append(self._prefix[-1] + value)
        if self.mode == "tree":
            k = self.count
            if k > self.t_max:
                raise ValueError(f"counter capacity t_max={self.t_max} exceeded")
            for level in range(self.levels):
                size = 1 << level
                if k % size:
                    break
                node = (level, k // size - 1)
                if self.noise_scale > 0.0:
                    self._node_noise[node] = float(self._rng.laplace(0.0, self.noise_scale))
                else:
                    self._node_noise[node] = 0.0

    def read(self) -> float:
        """Current sum; exact mode returns it exactly, tree mode adds node noises."""
        k = self.count
        if self.mode == "exact" or k == 0:
            return self._prefix[k]
        total = 0.0
        start = 0
        for level in range(self.levels - 1, -1, -1):
            size = 1 << level
            if k & size:
                node = (level, start // size)
                total += self._prefix[start + size] - self._prefix[start] + self._node_noise[node]
                start += size
        return total
