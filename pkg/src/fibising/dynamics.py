"""Forward orbits of the trace map: certified escape and escape-time fields.

Escape is certified by the witness condition on a triple ``(a, b, c)``::

    |a| > 1, |b| > 1 and |a*b| > |c|

after which every later coordinate exceeds one in absolute value and grows.
Boundedness is never certified, only "undecided within budget".
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .tracecore import CouplingParams, gamma_line, trace_map


class OrbitStatus(enum.Enum):
    ESCAPED = "E"
    UNDECIDED = "U"


class OrbitOverflowError(ArithmeticError):
    """Orbit left the floating range without a recorded escape witness."""


@dataclass(frozen=True)
class OrbitBudget:
    max_steps: int = 10_000
    escape_threshold: float = 1.0
    overflow_guard: float = 1e150
    strategy: Literal["witness", "threshold"] = "witness"

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.escape_threshold < 1:
            raise ValueError("escape_threshold must be >= 1")
        if self.strategy not in ("witness", "threshold"):
            raise ValueError(f"unknown escape strategy {self.strategy!r}")

    def doubled(self) -> "OrbitBudget":
        return OrbitBudget(2 * self.max_steps, self.escape_threshold, self.overflow_guard, self.strategy)


@dataclass(frozen=True)
class OrbitVerdict:
    status: OrbitStatus
    steps_used: int
    step: int | None = None
    witness: tuple[float, float, float] | None = None
    last: tuple[float, float, float] | None = None

    @property
    def escaped(self) -> bool:
        return self.status is OrbitStatus.ESCAPED


def witness_mask(p: np.ndarray, threshold: float = 1.0, strategy: str = "witness") -> np.ndarray:
    """Escape test on triples ``(x_{k+1}, x_k, x_{k-1})``.

    ``"witness"`` is the per-step sufficient condition; ``"threshold"``
    checks ``|x_{k-1}| <= C < |x_k|, |x_{k+1}|``, which is exact for orbits
    whose starting third coordinate is at most C.
    """
    a, b, c = np.abs(p[..., 0]), np.abs(p[..., 1]), np.abs(p[..., 2])
    if strategy == "threshold":
        return (c <= threshold) & (a > threshold) & (b > threshold)
    with np.errstate(over="ignore", invalid="ignore"):
        return (a > 1.0) & (b > 1.0) & (a * b > c)


@dataclass
class OrbitBatch:
    """Vectorised classification result for many starting points."""

    escaped: np.ndarray
    steps: np.ndarray
    final: np.ndarray

    def verdict(self, i: int) -> OrbitVerdict:
        triple = tuple(float(v) for v in self.final[i])
        if self.escaped[i]:
            return OrbitVerdict(OrbitStatus.ESCAPED, int(self.steps[i]), int(self.steps[i]), witness=triple)
        return OrbitVerdict(OrbitStatus.UNDECIDED, int(self.steps[i]), last=triple)


def classify_many(points, budget: OrbitBudget = OrbitBudget(), fmap=None) -> OrbitBatch:
    """Classify each row of ``points`` (shape ``(n, 3)``).

    ``steps`` holds the escape step for escaped rows and the number of steps
    taken otherwise; ``final`` is the witness triple or the last triple.
    """
    fmap = trace_map if fmap is None else fmap
    p = np.array(points, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(p)):
        raise ValueError("orbit starting points must be finite")
    n = p.shape[0]
    escaped = np.zeros(n, bool)
    steps = np.zeros(n, np.int64)
    active = np.arange(n)
    cur = p.copy()
    for step in range(budget.max_steps + 1):
        if active.size == 0:
            break
        w = witness_mask(cur, budget.escape_threshold, budget.strategy)
        if w.any():
            hit = active[w]
            escaped[hit] = True
            steps[hit] = step
            p[hit] = cur[w]
            active, cur = active[~w], cur[~w]
        if step == budget.max_steps or active.size == 0:
            break
        cur = fmap(cur)
        big = ~(np.abs(cur) <= budget.overflow_guard).all(axis=-1)
        if big.any():
            bad = active[big]
            raise OrbitOverflowError(
                f"{bad.size} orbit(s) exceeded {budget.overflow_guard:g} at step {step + 1} "
                f"without an escape witness; first start point {p[bad[0]].tolist()}"
            )
    p[active] = cur
    steps[active] = min(budget.max_steps, step)
    return OrbitBatch(escaped, steps, p)


def classify_orbit(p, budget: OrbitBudget = OrbitBudget(), fmap=None) -> OrbitVerdict:
    """Iterate until an escape witness appears or the budget runs out."""
    p = np.asarray(p, dtype=float)
    if p.shape != (3,):
        raise ValueError(f"expected a single triple, got shape {p.shape}")
    return classify_many(p[None, :], budget, fmap).verdict(0)


def coordinate_divergence_check(p, budget: OrbitBudget = OrbitBudget(), bound: float = 1e6) -> bool | None:
    """After the escape witness, check every coordinate passes ``bound``.

    Returns True on success, False if the orbit stops growing (which would
    contradict the witness) and None when the budget runs out first.
    Raises ValueError if ``p`` is not certified as escaping.
    """
    verdict = classify_orbit(p, budget)
    if not verdict.escaped:
        raise ValueError("divergence check needs an escaping orbit")
    diverged, failed = divergence_many(np.asarray(verdict.witness)[None, :], budget.max_steps, bound)
    if failed[0]:
        return False
    return True if diverged[0] else None


def divergence_many(witnesses, max_steps: int, bound: float = 1e6):
    """Follow witness triples until all coordinates exceed ``bound``.

    Returns ``(diverged, failed)`` boolean arrays; ``failed`` marks orbits
    whose leading coordinate stopped growing.  Rows with neither flag ran
    out of steps.
    """
    cur = np.array(witnesses, dtype=float).reshape(-1, 3)
    diverged = np.zeros(cur.shape[0], bool)
    failed = np.zeros(cur.shape[0], bool)
    for _ in range(max_steps + 1):
        diverged |= ~failed & np.all(np.abs(cur) > bound, axis=-1)
        live = ~(diverged | failed)
        if not live.any():
            break
        nxt = trace_map(cur)
        failed |= live & ~(np.abs(nxt[:, 0]) > np.abs(cur[:, 0]))
        cur = np.where(live[:, None], nxt, cur)
    return diverged, failed


@dataclass
class EscapeField:
    s: np.ndarray
    escaped: np.ndarray
    steps: np.ndarray

    def __len__(self) -> int:
        return self.s.size

    def rows(self):
        for s, e, n in zip(self.s, self.escaped, self.steps):
            yield float(s), OrbitStatus.ESCAPED if e else OrbitStatus.UNDECIDED, int(n)


def escape_time_field(params: CouplingParams, s_values, budget: OrbitBudget = OrbitBudget()) -> EscapeField:
    """Classify the orbit of the seed triple at each spectral value."""
    s = np.asarray(s_values, dtype=float).ravel()
    if np.any(s < 0):
        raise ValueError("spectral values must be non-negative")
    if s.size == 0:
        return EscapeField(s, np.zeros(0, bool), np.zeros(0, np.int64))
    batch = classify_many(gamma_line(params, s), budget)
    return EscapeField(s, batch.escaped, batch.steps)
