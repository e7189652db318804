"""Algebraic identity suite: residuals of the trace-map identities.

The trace map is looked up on :mod:`fibising.tracecore` at call time so a
deliberately broken map can be swapped in to exercise the failure path.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tracecore as tc
from .dynamics import witness_mask


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.threshold)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    """Largest componentwise error, relative to max(1, |b|)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    with np.errstate(invalid="ignore", over="ignore"):
        err = np.abs(a - b) / np.maximum(1.0, np.abs(b))
    return float(np.nanmax(np.where(np.isfinite(err), err, np.inf)))


def seed_identity(rng: np.random.Generator, n: int = 1000) -> float:
    r = rng.uniform(0.1, 10.0, n)
    J1 = rng.uniform(0.1, 10.0, n)
    s = rng.uniform(0.0, 100.0, n)
    worst = 0.0
    for ri, Ji, si in zip(r, J1, s):
        m_minus, m0, m1 = tc.seed_matrices(tc.CouplingParams.from_ratio(ri, Ji), si)
        worst = max(worst, float(np.max(np.abs(m1 - m0 @ m_minus)) / max(1.0, np.max(np.abs(m1)))))
    return worst


def seed_half_traces(rng: np.random.Generator, n: int = 200) -> float:
    worst = 0.0
    for _ in range(n):
        params = tc.CouplingParams.from_ratio(rng.uniform(0.1, 10.0), rng.uniform(0.1, 10.0))
        s = rng.uniform(0.0, 100.0)
        mats = tc.seed_matrices(params, s)
        x1, x0, xm = tc.gamma_line(params, s)
        got = np.array([tc.half_trace(m) for m in mats])
        worst = max(worst, _rel(got, np.array([xm, x0, x1])))
    return worst


def singularity_cycle() -> float:
    f = tc.trace_map
    pairs = [(tc.P1, tc.P1), (tc.P2, tc.P3), (tc.P3, tc.P4), (tc.P4, tc.P2)]
    return float(max(np.max(np.abs(f(a) - b)) for a, b in pairs))


def per2_period() -> float:
    x = np.concatenate([np.linspace(-10.0, 0.49, 500), np.linspace(0.51, 10.0, 500)])
    pts = tc.per2_curve(x)
    back = tc.trace_map(tc.trace_map(pts))
    scale = np.linalg.norm(pts, axis=-1, keepdims=True)
    return float(np.max(np.abs(back - pts) / scale))


def jacobian_spectrum() -> float:
    ev = np.sort(np.linalg.eigvals(tc.jacobian(tc.P1)).real)
    want = np.array([-1.0, (3.0 - tc.SQRT5) / 2.0, (3.0 + tc.SQRT5) / 2.0])
    return float(np.max(np.abs(ev - want)))


def semiconjugacy(n: int = 100) -> float:
    theta, phi = np.meshgrid(np.arange(n) / n, np.arange(n) / n, indexing="ij")
    lhs = tc.trace_map(tc.torus_factor(theta, phi))
    rhs = tc.torus_factor(*tc.torus_map(theta, phi))
    return float(np.max(np.abs(lhs - rhs)))


def _f6(p, fmap: Callable) -> np.ndarray:
    for _ in range(6):
        p = fmap(p)
    return p


def reversing_symmetry(pts: np.ndarray) -> float:
    lhs = tc.apply_symmetry("s", _f6(tc.apply_symmetry("s", pts), tc.trace_map))
    return _rel(lhs, _f6(pts, tc.trace_map_inverse))


def sign_symmetry(name: str, pts: np.ndarray) -> float:
    lhs = tc.apply_symmetry(name, _f6(tc.apply_symmetry(name, pts), tc.trace_map))
    return _rel(lhs, _f6(pts, tc.trace_map))


def invariant_preservation(pts: np.ndarray, steps: int = 50) -> float:
    """max |I(f^n p) - I(p)| / max(1, |I(p)|) for n <= steps.

    An orbit is dropped once it shows an escape witness; past that point it
    grows doubly exponentially and I is lost to cancellation.
    """
    I0 = tc.fricke_vogt(pts)
    worst = 0.0
    cur = pts
    live = np.ones(pts.shape[0], bool)
    for _ in range(steps):
        live &= ~witness_mask(cur)
        if not live.any():
            break
        cur = tc.trace_map(cur)
        err = np.abs(tc.fricke_vogt(cur[live]) - I0[live]) / np.maximum(1.0, np.abs(I0[live]))
        worst = max(worst, float(err.max()))
    return worst


def inverse_roundtrip(pts: np.ndarray) -> float:
    return _rel(tc.trace_map_inverse(tc.trace_map(pts)), pts)


def gamma_closed_form(rng: np.random.Generator, n: int = 1000) -> float:
    worst = 0.0
    for r, J1, s in zip(rng.uniform(0.1, 10.0, n), rng.uniform(0.1, 10.0, n), rng.uniform(0.0, 100.0, n)):
        params = tc.CouplingParams.from_ratio(r, J1)
        direct = float(tc.fricke_vogt(tc.gamma_line(params, s)))
        closed = float(tc.gamma_invariant(params, s))
        worst = max(worst, abs(direct - closed) / max(1.0, abs(closed)))
    return worst


def run_identity_suite(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    cube = rng.uniform(-2.0, 2.0, size=(1000, 3))
    results = [
        CheckResult("seed M1 = M0 M-1", seed_identity(rng), 1e-12),
        CheckResult("seed half-traces", seed_half_traces(rng), 1e-12),
        CheckResult("cycle P2->P3->P4->P2, P1 fixed", singularity_cycle(), 0.0),
        CheckResult("per2 curve f^2 = id", per2_period(), 1e-9),
        CheckResult("Df(P1) eigenvalues", jacobian_spectrum(), 1e-9),
        CheckResult("torus semiconjugacy", semiconjugacy(), 1e-10),
        CheckResult("s∘f⁶∘s vs f⁻⁶", reversing_symmetry(cube), 1e-8),
    ]
    for name in ("s2", "s3", "s4"):
        results.append(CheckResult(f"{name}∘f⁶∘{name} vs f⁶", sign_symmetry(name, cube), 1e-8))
    results += [
        CheckResult("invariant preserved (n<=50)", invariant_preservation(cube), 1e-9),
        CheckResult("f^-1∘f = id", inverse_roundtrip(cube), 1e-12),
        CheckResult("I(gamma) closed form", gamma_closed_form(rng), 1e-10),
    ]
    return results
