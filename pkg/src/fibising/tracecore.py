"""Transfer matrices, the Fibonacci trace map and its algebraic companions.

Points of R^3 are handled as numpy arrays whose last axis has length 3 and
holds the trace triple ``(x_{k+1}, x_k, x_{k-1})``.  Every map here is
vectorised over leading axes.

The spectral variable ``s`` is the rescaled squared energy; the physical
energy is ``E = +-2*sqrt(s)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

SQRT5 = np.sqrt(5.0)

# the four conic points of the V = 0 surface
P1 = np.array([1.0, 1.0, 1.0])
P2 = np.array([-1.0, -1.0, 1.0])
P3 = np.array([1.0, -1.0, -1.0])
P4 = np.array([-1.0, 1.0, -1.0])


class ParameterError(ValueError):
    """Invalid model parameters (non-positive or non-finite couplings)."""


@dataclass(frozen=True)
class CouplingParams:
    """Couplings of the two letters: ``J0`` on A, ``J1`` on B."""

    J0: float
    J1: float

    def __post_init__(self):
        for name in ("J0", "J1"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError) as exc:
                raise ParameterError(f"{name} must be a real number, got {value!r}") from exc
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be a finite positive real, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_ratio(cls, r: float, J1: float = 1.0) -> "CouplingParams":
        return cls(J0=r * J1, J1=J1)

    @property
    def r(self) -> float:
        return self.J0 / self.J1

    def swapped(self) -> "CouplingParams":
        return CouplingParams(J0=self.J1, J1=self.J0)

    @property
    def s_max(self) -> float:
        """Default upper end of the spectral scan window."""
        return (1.0 + max(self.J0, self.J1)) ** 2 + 1.0


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (3,):
        raise ValueError(f"trace points need a trailing axis of length 3, got shape {p.shape}")
    return p


# --- transfer matrices -----------------------------------------------------


def single_site_matrix(J: float, s) -> np.ndarray:
    """Single-site transfer matrix at spectral value ``s`` (lambda = 2 sqrt(s)).

    Vectorised in ``s``; returns shape ``s.shape + (2, 2)``.  Unimodular.
    """
    s = np.asarray(s, dtype=float)
    lam = 2.0 * np.sqrt(s)
    m = np.empty(s.shape + (2, 2))
    m[..., 0, 0] = -1.0 / J
    m[..., 0, 1] = lam / (2.0 * J)
    m[..., 1, 0] = -lam / (2.0 * J)
    m[..., 1, 1] = (lam * lam - 4.0 * J * J) / (4.0 * J)
    return m


def seed_matrices(params: CouplingParams, s):
    """Return ``(M_{-1}, M_0, M_1)``; ``M_1 = M_0 @ M_{-1}``."""
    s = np.asarray(s, dtype=float)
    J0, J1 = params.J0, params.J1
    lam = 2.0 * np.sqrt(s)
    m_minus = np.zeros(s.shape + (2, 2))
    m_minus[..., 0, 0] = J0 / J1
    m_minus[..., 0, 1] = lam * (J1 * J1 - J0 * J0) / (2.0 * J0 * J1)
    m_minus[..., 1, 1] = J1 / J0
    return m_minus, single_site_matrix(J0, s), single_site_matrix(J1, s)


def half_trace(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    return 0.5 * (m[..., 0, 0] + m[..., 1, 1])


# --- the trace map ---------------------------------------------------------


def trace_map(p) -> np.ndarray:
    """f(x, y, z) = (2xy - z, x, y)."""
    p = _as_points(p)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    with np.errstate(over="ignore", invalid="ignore"):
        return np.stack([2.0 * x * y - z, x, y], axis=-1)


def trace_map_inverse(p) -> np.ndarray:
    """f^{-1}(x, y, z) = (y, z, 2yz - x)."""
    p = _as_points(p)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    with np.errstate(over="ignore", invalid="ignore"):
        return np.stack([y, z, 2.0 * y * z - x], axis=-1)


def iterate(p, n: int, fmap=None) -> np.ndarray:
    """Apply ``fmap`` (default :func:`trace_map`) ``n`` times."""
    fmap = trace_map if fmap is None else fmap
    p = _as_points(p)
    for _ in range(n):
        p = fmap(p)
    return p


def fricke_vogt(p) -> np.ndarray:
    """The invariant I(x, y, z) = x^2 + y^2 + z^2 - 2xyz - 1."""
    p = _as_points(p)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    return x * x + y * y + z * z - 2.0 * x * y * z - 1.0


def jacobian(p) -> np.ndarray:
    """Derivative of the trace map; shape ``(..., 3, 3)``."""
    p = _as_points(p)
    out = np.zeros(p.shape[:-1] + (3, 3))
    out[..., 0, 0] = 2.0 * p[..., 1]
    out[..., 0, 1] = 2.0 * p[..., 0]
    out[..., 0, 2] = -1.0
    out[..., 1, 0] = 1.0
    out[..., 2, 1] = 1.0
    return out


# --- the line of initial conditions ----------------------------------------


def gamma_line(params: CouplingParams, s) -> np.ndarray:
    """Seed triple ``(x_1, x_0, x_{-1})`` at spectral value(s) ``s``."""
    s = np.asarray(s, dtype=float)
    r, J1 = params.r, params.J1
    x1 = (s - (1.0 + J1 * J1)) / (2.0 * J1)
    x0 = (s - (1.0 + r * r * J1 * J1)) / (2.0 * r * J1)
    xm = np.full_like(x1, (1.0 + r * r) / (2.0 * r))
    return np.stack([x1, x0, xm], axis=-1)


def gamma_invariant(params: CouplingParams, s) -> np.ndarray:
    """Closed form of ``fricke_vogt(gamma_line(params, s))``: (s/4)(1/r - r)^2."""
    r = params.r
    return np.asarray(s, dtype=float) / 4.0 * (1.0 / r - r) ** 2


# --- period-two curve ------------------------------------------------------


def per2_curve(x) -> np.ndarray:
    """Period-two points (x, x/(2x-1), x); undefined at x = 1/2."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0.5):
        raise ValueError("the period-two curve is not defined at x = 1/2")
    return np.stack([x, x / (2.0 * x - 1.0), x], axis=-1)


# --- symmetries ------------------------------------------------------------

SymmetryName = Literal["s", "s2", "s3", "s4"]

_SIGNS = {"s2": (-1.0, -1.0, 1.0), "s3": (1.0, -1.0, -1.0), "s4": (-1.0, 1.0, -1.0)}


def apply_symmetry(name: SymmetryName, p) -> np.ndarray:
    """Reversing symmetry ``s`` (coordinate reversal) or sign flips ``s2..s4``."""
    p = _as_points(p)
    if name == "s":
        return p[..., ::-1].copy()
    try:
        return p * np.array(_SIGNS[name])
    except KeyError:
        raise ValueError(f"unknown symmetry {name!r}") from None


# --- torus factor ----------------------------------------------------------


def torus_map(theta, phi):
    """Hyperbolic automorphism (theta + phi, theta) mod 1."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.mod(theta + phi, 1.0), np.mod(theta, 1.0)


def torus_factor(theta, phi) -> np.ndarray:
    """Factor map (cos 2pi(theta+phi), cos 2pi theta, cos 2pi phi) onto the V = 0 core."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    tau = 2.0 * np.pi
    return np.stack(
        [np.cos(tau * (theta + phi)), np.cos(tau * theta), np.cos(tau * phi)], axis=-1
    )


# --- invariant surfaces ----------------------------------------------------


def surface_mesh(V: float, xs, ys) -> np.ndarray:
    """Points of the level set I = V over the grid ``xs`` x ``ys``.

    Solves the quadratic in z; tangential (double) roots are emitted once.
    Returns an ``(n, 3)`` array, possibly empty.
    """
    if V < 0:
        raise ValueError(f"surface level must be non-negative, got {V}")
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    X, Y = X.ravel(), Y.ravel()
    disc = X * X * Y * Y - X * X - Y * Y + 1.0 + V
    ok = disc >= 0
    X, Y, root = X[ok], Y[ok], np.sqrt(disc[ok])
    centre = X * Y
    double = root == 0
    upper = np.column_stack([X, Y, centre + root])
    lower = np.column_stack([X, Y, centre - root])[~double]
    pts = np.concatenate([upper, lower])
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    return pts[order]
