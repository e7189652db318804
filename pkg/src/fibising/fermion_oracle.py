"""Exact free-fermion spectra and direct transfer-matrix products.

This module is the independent reference for :mod:`fibising.spectrum`: it
never touches the trace recursion.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fibword import coupling_sequence, fib_length, word_at_level
from .spectrum import BandSet, ScanOptions, band_set, trace_value
from .tracecore import CouplingParams, half_trace, single_site_matrix


class OracleError(ArithmeticError):
    def __init__(self, message: str, matrix: np.ndarray | None = None):
        if matrix is not None:
            message += "\n" + np.array2string(matrix, precision=17, threshold=400)
        super().__init__(message)
        self.matrix = matrix


@dataclass(frozen=True)
class FermionMatrices:
    n: int
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    couplings: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class OracleSpectrum:
    mu: np.ndarray
    s_values: np.ndarray

    @property
    def energies(self) -> np.ndarray:
        return 2.0 * np.sqrt(self.s_values)


def build_matrices(params: CouplingParams, k: int) -> FermionMatrices:
    """Quadratic-form matrices of the level-k ring (A symmetric, B antisymmetric)."""
    n = fib_length(k)
    if n < 3:
        raise ValueError(f"ring of {n} sites is too small; need a level with at least 3 sites")
    J = coupling_sequence(word_at_level(k), params)
    A = np.zeros((n, n))
    B = np.zeros((n, n))
    np.fill_diagonal(A, -2.0)
    i = np.arange(n - 1)
    A[i, i + 1] = A[i + 1, i] = -J[:-1]
    B[i, i + 1] = -J[:-1]
    B[i + 1, i] = J[:-1]
    A[0, n - 1] = A[n - 1, 0] = -J[-1]
    B[0, n - 1] = J[-1]
    B[n - 1, 0] = -J[-1]
    return FermionMatrices(n, A, B, J)


def oracle_spectrum(m: FermionMatrices, return_vectors: bool = False):
    """Eigenvalues of (A+B)(A-B) from the singular values of A-B.

    Since A+B is the transpose of A-B the product is a Gram matrix, so
    ``mu = sigma**2`` and the spectral values are ``s = mu / 4``.
    With ``return_vectors`` the matching eigenvectors (columns) are returned
    as a second value.
    """
    D = m.A - m.B
    try:
        _, sigma, vt = np.linalg.svd(D)
    except np.linalg.LinAlgError as exc:
        raise OracleError(f"SVD did not converge for n={m.n}: {exc}", D) from exc
    order = np.argsort(sigma)
    mu = sigma[order] ** 2
    spec = OracleSpectrum(mu=mu, s_values=mu / 4.0)
    if return_vectors:
        return spec, vt[order].T
    return spec


def seed_factor_couplings(params: CouplingParams, k: int) -> np.ndarray:
    """Couplings fed to the transfer product: A -> J1, B -> J0.

    This letter assignment is the one under which half-traces of the
    products obey the trace recursion seeded with ``M_1`` (the J1 matrix)
    at level 1.
    """
    return coupling_sequence(word_at_level(k), params.swapped())


def direct_transfer_product(params: CouplingParams, k: int, s) -> np.ndarray:
    """Ordered product of single-site matrices over the level-k word.

    The latest site multiplies from the left.  Vectorised in ``s``.
    """
    if k < 1:
        raise ValueError("level must be >= 1")
    s = np.asarray(s, dtype=float)
    mats = {J: single_site_matrix(J, s) for J in (params.J0, params.J1)}
    prod = np.broadcast_to(np.eye(2), s.shape + (2, 2)).copy()
    with np.errstate(over="raise", invalid="raise"):
        try:
            for J in seed_factor_couplings(params, k):
                prod = mats[J] @ prod
        except FloatingPointError as exc:
            raise OracleError(f"transfer product overflowed at level {k}") from exc
    return prod


@dataclass(frozen=True)
class ContainmentReport:
    k: int
    inflate: float
    fraction: float
    violators: np.ndarray
    literal_fraction: float
    literal_violators: np.ndarray
    n: int


def matched_band_set(params: CouplingParams, k: int, opts: ScanOptions | None = None) -> BandSet:
    """Band set of the periodic chain whose unit cell is the level-k ring.

    With couplings A -> J0 that chain's trace sequence is the one seeded by
    the swapped couplings, one index further along.
    """
    return band_set(params.swapped(), k + 1, opts)


def containment_check(
    params: CouplingParams, k: int, inflate: float = 1e-9, opts: ScanOptions | None = None
) -> ContainmentReport:
    """Fraction of ring eigenvalues inside the band set (inflated by ``inflate``).

    ``fraction`` uses the band set of the same periodic chain;
    ``literal_fraction`` compares with ``band_set(params, k)``.
    """
    if inflate < 0:
        raise ValueError("inflate must be non-negative")
    s = oracle_spectrum(build_matrices(params, k)).s_values
    matched = matched_band_set(params, k, opts).contains(s, inflate)
    literal = band_set(params, k, opts).contains(s, inflate)
    return ContainmentReport(
        k=k,
        inflate=inflate,
        fraction=float(matched.mean()),
        violators=s[~matched],
        literal_fraction=float(literal.mean()),
        literal_violators=s[~literal],
        n=s.size,
    )


def recursion_error(params: CouplingParams, k: int, s: float) -> float:
    """|half-trace of the direct product - trace recursion| / max(1, |recursion|)."""
    direct = float(half_trace(direct_transfer_product(params, k, s)))
    rec = trace_value(params, s, k)
    return abs(direct - rec) / max(1.0, abs(rec))


def recursion_equivalence(samples, k_max: int = 12) -> float:
    """Largest :func:`recursion_error` over ``(params, s)`` samples and levels 1..k_max."""
    return max(recursion_error(p, k, s) for p, s in samples for k in range(1, k_max + 1))


def random_samples(rng: np.random.Generator, n: int = 100, lo: float = 0.5, hi: float = 2.0):
    """Random ``(params, s)`` with r, J1 uniform in [lo, hi] and s in [0, s_max]."""
    out = []
    for _ in range(n):
        p = CouplingParams.from_ratio(rng.uniform(lo, hi), rng.uniform(lo, hi))
        out.append((p, float(rng.uniform(0.0, p.s_max))))
    return out
