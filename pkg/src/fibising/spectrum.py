"""Band sets of the periodic approximants and their nested covers.

The level-k band set is ``{s >= 0 : |x_{k-1}(s)| <= 1}`` where ``x_j`` is the
trace sequence seeded by :func:`tracecore.gamma_line`.  Three consecutive
levels form the cover ``Sigma_k = sigma_{N+k} | sigma_{N+k+1} | sigma_{N+k+2}``
which decreases to the limit spectrum.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .dynamics import witness_mask
from .tracecore import CouplingParams, gamma_line, trace_map

log = logging.getLogger(__name__)

DEFAULT_EDGE_TOL = 1e-12
DEFAULT_DENSITY = 2e4
DEFAULT_TANGENCY_TOL = 1e-9
OVERFLOW_GUARD = 1e150


class TraceOverflowError(ArithmeticError):
    """A trace left the floating range before any escape witness."""


class RefinementWarning(RuntimeWarning):
    """Band or gap features near the grid spacing; the scan was refined."""


class NestingError(RuntimeError):
    """Consecutive covers are not nested within the endpoint slack."""


# --- interval unions -------------------------------------------------------


def _merge(iv: np.ndarray) -> np.ndarray:
    if iv.shape[0] == 0:
        return iv.reshape(0, 2)
    iv = iv[np.lexsort((iv[:, 1], iv[:, 0]))]
    out = [list(iv[0])]
    for a, b in iv[1:]:
        if a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return np.array(out, dtype=float)


@dataclass(frozen=True, eq=False)
class BandSet:
    """Sorted, pairwise disjoint closed intervals ``[a_i, b_i]``."""

    intervals: np.ndarray
    level: int | None = None
    axis: str = "s"
    dropped: int = 0
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        iv = np.asarray(self.intervals, dtype=float).reshape(-1, 2)
        if np.any(iv[:, 0] > iv[:, 1]):
            raise ValueError("interval with a > b")
        iv = _merge(iv)
        if self.axis == "s" and iv.size and iv[0, 0] < 0:
            raise ValueError("spectral-axis band sets live in s >= 0")
        iv.flags.writeable = False
        object.__setattr__(self, "intervals", iv)

    @classmethod
    def empty(cls, level=None, axis="s") -> "BandSet":
        return cls(np.zeros((0, 2)), level=level, axis=axis)

    def __len__(self) -> int:
        return self.intervals.shape[0]

    def __iter__(self):
        for a, b in self.intervals:
            yield float(a), float(b)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BandSet):
            return NotImplemented
        return self.axis == other.axis and np.array_equal(self.intervals, other.intervals)

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    @property
    def lo(self) -> np.ndarray:
        return self.intervals[:, 0]

    @property
    def hi(self) -> np.ndarray:
        return self.intervals[:, 1]

    @property
    def length(self) -> float:
        """Lebesgue measure."""
        return float(np.sum(self.hi - self.lo))

    @property
    def hull(self) -> tuple[float, float]:
        if self.is_empty:
            raise ValueError("empty band set has no hull")
        return float(self.lo[0]), float(self.hi[-1])

    @property
    def min_width(self) -> float:
        return float(np.min(self.hi - self.lo))

    def union(self, *others: "BandSet", level=None) -> "BandSet":
        iv = np.concatenate([self.intervals] + [o.intervals for o in others])
        return BandSet(iv, level=self.level if level is None else level, axis=self.axis)

    def clip(self, lo: float, hi: float) -> "BandSet":
        iv = self.intervals.copy()
        iv[:, 0] = np.maximum(iv[:, 0], lo)
        iv[:, 1] = np.minimum(iv[:, 1], hi)
        return BandSet(iv[iv[:, 0] <= iv[:, 1]], level=self.level, axis=self.axis)

    def contains(self, x, inflate: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_empty:
            return np.zeros(x.shape, bool)
        j = np.searchsorted(self.lo - inflate, x, side="right") - 1
        jj = np.clip(j, 0, len(self) - 1)
        return (j >= 0) & (x <= self.hi[jj] + inflate)

    def distance_to(self, x) -> np.ndarray:
        """Distance from each point of ``x`` to the set."""
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(self.lo, x, side="right") - 1
        left = np.clip(j, 0, len(self) - 1)
        right = np.clip(j + 1, 0, len(self) - 1)
        d_left = np.where(x <= self.hi[left], np.maximum(self.lo[left] - x, 0.0), x - self.hi[left])
        d_right = np.abs(self.lo[right] - x)
        d = np.minimum(np.abs(d_left), d_right)
        return np.where(self.contains(x), 0.0, d)

    def containment_excess(self, other: "BandSet") -> np.ndarray:
        """Per interval of ``self``, how far it sticks out of the interval of
        ``other`` that best covers it (0 when contained)."""
        if self.is_empty:
            return np.zeros(0)
        if other.is_empty:
            return np.full(len(self), np.inf)
        mid = 0.5 * (self.lo + self.hi)
        j = np.clip(np.searchsorted(other.lo, mid, side="right") - 1, 0, len(other) - 1)
        cand = np.stack([j, np.minimum(j + 1, len(other) - 1)])
        excess = np.maximum(other.lo[cand] - self.lo, 0.0) + np.maximum(self.hi - other.hi[cand], 0.0)
        return excess.min(axis=0)

    def subset_of(self, other: "BandSet", slack: float = 0.0) -> bool:
        return bool(np.all(self.containment_excess(other) <= slack))


# --- traces ----------------------------------------------------------------


def _trace_mp(params: CouplingParams, s: float, k: int, dps: int = 60):
    """x_k at high precision; mpmath floats do not overflow."""
    with mpmath.workdps(dps):
        s = mpmath.mpf(s)
        J1 = mpmath.mpf(params.J1)
        r = mpmath.mpf(params.J0) / J1
        seq = [
            (1 + r * r) / (2 * r),
            (s - (1 + r * r * J1 * J1)) / (2 * r * J1),
            (s - (1 + J1 * J1)) / (2 * J1),
        ]
        if k <= 1:
            return seq[k + 1]
        a, b, c = seq[2], seq[1], seq[0]
        for _ in range(k - 1):
            a, b, c = 2 * a * b - c, a, b
        return a


def trace_value(params: CouplingParams, s: float, k: int, overflow_guard: float = OVERFLOW_GUARD) -> float:
    """The trace sequence value ``x_k(s)`` for ``k >= -1``.

    Returns ``+-inf`` when ``|x_k|`` passes ``overflow_guard`` after an escape
    witness (so ``|x_k| > 1`` is certified).  Without a witness the value is
    recomputed at high precision and :class:`TraceOverflowError` is raised if
    it is still out of range.
    """
    if k < -1:
        raise ValueError(f"trace index must be >= -1, got {k}")
    p = gamma_line(params, float(s))
    if k <= 1:
        return float(p[1 - k])
    witnessed = False
    for _ in range(k - 1):
        witnessed = witnessed or bool(witness_mask(p))
        p = trace_map(p)
    x = float(p[0])
    if abs(x) <= overflow_guard:
        return x
    if witnessed:
        return math.inf if math.isnan(x) else math.copysign(math.inf, x)
    exact = _trace_mp(params, s, k)
    if abs(exact) <= overflow_guard:
        return float(exact)
    raise TraceOverflowError(
        f"x_{k}(s={s!r}) for {params} exceeds {overflow_guard:g} without an escape witness "
        f"(high-precision value {mpmath.nstr(exact, 8)})"
    )


def trace_values(params: CouplingParams, s, k: int) -> np.ndarray:
    """Vectorised :func:`trace_value`; certified escapes come back as inf."""
    return _inside_and_trace(params, np.asarray(s, float), k + 1)[1]


def _inside_and_trace(params: CouplingParams, s: np.ndarray, level: int):
    """Membership in the level band set and the value of ``x_{level-1}``.

    Orbits with an escape witness at or before the relevant index are
    frozen and reported with value inf.
    """
    p = gamma_line(params, s)
    if level == 0:
        x = p[..., 2]
        return np.abs(x) <= 1.0, x.copy()
    escaped = np.zeros(s.shape, bool)
    for _ in range(level - 1):
        escaped |= witness_mask(p)
        p = np.where(escaped[..., None], p, trace_map(p))
    x = np.where(escaped, np.inf, p[..., 1])
    bad = ~escaped & ~np.isfinite(x)
    if bad.any():
        log.debug("re-evaluating %d trace values at high precision", int(bad.sum()))
        for idx in zip(*np.nonzero(bad)):
            x[idx] = float(_trace_mp(params, float(s[idx]), level - 1))
    return np.abs(x) <= 1.0, x


# --- band extraction -------------------------------------------------------


@dataclass(frozen=True)
class ScanOptions:
    s_max: float | None = None
    density: float = DEFAULT_DENSITY
    edge_tol: float = DEFAULT_EDGE_TOL
    tangency_tol: float = DEFAULT_TANGENCY_TOL
    max_refine: int = 2

    def __post_init__(self):
        for name in ("density", "edge_tol", "tangency_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.s_max is not None and not self.s_max > 0:
            raise ValueError("s_max must be positive")


def _bisect_edges(params, level, lo, hi, lo_inside, edge_tol):
    """Shrink each bracket ``[lo, hi]`` around a membership change."""
    lo, hi = lo.copy(), hi.copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        live = (hi - lo > edge_tol) & (mid > lo) & (mid < hi)
        if not live.any():
            break
        ins = _inside_and_trace(params, mid[live], level)[0]
        move_lo = ins == lo_inside[live]
        idx = np.nonzero(live)[0]
        lo[idx[move_lo]] = mid[live][move_lo]
        hi[idx[~move_lo]] = mid[live][~move_lo]
    # report the endpoint lying inside the band
    return np.where(lo_inside, lo, hi)


def _scan(params: CouplingParams, level: int, s_max: float, density: float, opts: ScanOptions):
    n = int(math.ceil(density * s_max)) + 1
    s = np.linspace(0.0, s_max, n)
    inside, _ = _inside_and_trace(params, s, level)
    change = np.nonzero(inside[1:] != inside[:-1])[0]
    edges = _bisect_edges(params, level, s[change], s[change + 1], inside[change], opts.edge_tol)
    rising = ~inside[change]
    starts = list(edges[rising])
    ends = list(edges[~rising])
    if inside[0]:
        starts.insert(0, 0.0)
    if inside[-1]:
        ends.append(s_max)
        log.warning("level %d band reaches the scan window end s_max=%g", level, s_max)
    iv = np.column_stack([starts, ends]) if starts else np.zeros((0, 2))

    # gaps that never rise above roundoff are tangencies, not gaps
    if len(iv) > 1:
        keep_gap = np.ones(len(iv) - 1, bool)
        for i in range(len(iv) - 1):
            probe = np.linspace(iv[i, 1], iv[i + 1, 0], 9)[1:-1]
            x = _inside_and_trace(params, probe, level)[1]
            keep_gap[i] = np.max(np.abs(x)) - 1.0 > opts.tangency_tol
        merged = [iv[0].copy()]
        for i in range(1, len(iv)):
            if keep_gap[i - 1]:
                merged.append(iv[i].copy())
            else:
                merged[-1][1] = iv[i, 1]
        iv = np.array(merged)

    widths = iv[:, 1] - iv[:, 0] if len(iv) else np.zeros(0)
    thin = widths < opts.edge_tol
    iv = iv[~thin]
    h = s_max / (n - 1)
    gaps = iv[1:, 0] - iv[:-1, 1] if len(iv) > 1 else np.zeros(0)
    feature = np.concatenate([iv[:, 1] - iv[:, 0], gaps]) if len(iv) else np.zeros(0)
    crowded = bool(feature.size and feature.min() < 2.0 * h)
    return iv, int(thin.sum()), crowded, h


@lru_cache(maxsize=512)
def _band_set_cached(params: CouplingParams, k: int, opts: ScanOptions) -> BandSet:
    s_max = params.s_max if opts.s_max is None else opts.s_max
    density = opts.density
    for attempt in range(opts.max_refine + 1):
        iv, dropped, crowded, h = _scan(params, k, s_max, density, opts)
        if not crowded:
            break
        if attempt < opts.max_refine:
            warnings.warn(
                f"level {k}: features narrower than two grid steps (h={h:.3g}); "
                f"retrying at {4 * density:g} points per unit s",
                RefinementWarning,
                stacklevel=4,
            )
            density *= 4
    meta = {"s_max": s_max, "density": density, "edge_tol": opts.edge_tol, "crowded": crowded}
    return BandSet(iv, level=k, dropped=dropped, meta=meta)


def band_set(params: CouplingParams, k: int, opts: ScanOptions | None = None, **kw) -> BandSet:
    """Level-k band set on ``[0, s_max]``, edges bisected to ``edge_tol``.

    Keyword arguments override fields of :class:`ScanOptions`.
    """
    if k < 1:
        raise ValueError(f"band level must be >= 1, got {k}")
    opts = ScanOptions(**kw) if opts is None else (ScanOptions(**{**opts.__dict__, **kw}) if kw else opts)
    return _band_set_cached(params, int(k), opts)


# --- nested covers ---------------------------------------------------------


@dataclass(frozen=True)
class NestedCover:
    bands: BandSet
    k: int
    N: int

    @property
    def length(self) -> float:
        return self.bands.length


def nested_cover(params: CouplingParams, k: int, N: int = 0, opts: ScanOptions | None = None) -> NestedCover:
    levels = [band_set(params, N + k + i, opts) for i in range(3)]
    return NestedCover(levels[0].union(*levels[1:], level=k), k, N)


def nesting_violations(outer: BandSet, inner: BandSet, slack: float) -> int:
    """Number of intervals of ``inner`` not inside ``outer`` up to ``slack``."""
    return int(np.count_nonzero(inner.containment_excess(outer) > slack))


def choose_offset(
    params: CouplingParams, ks: Sequence[int], max_offset: int = 5, opts: ScanOptions | None = None
) -> int:
    """Smallest offset N <= max_offset for which the covers over ``ks`` nest."""
    opts = opts or ScanOptions()
    slack = 2.0 * opts.edge_tol
    ks = sorted(ks)
    for N in range(max_offset + 1):
        covers = [nested_cover(params, k, N, opts).bands for k in ks]
        if all(nesting_violations(a, b, slack) == 0 for a, b in zip(covers, covers[1:])):
            return N
        log.info("covers do not nest at offset N=%d for %s", N, params)
    raise NestingError(f"no offset N <= {max_offset} makes the covers nest for {params}")


def b_infinity_approx(params: CouplingParams, k_max: int, N: int = 0, opts: ScanOptions | None = None) -> BandSet:
    """Outer approximation ``Sigma_{k_max}`` of the limit spectrum on the s-axis."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    return nested_cover(params, k_max, N, opts).bands


def symmetrize_to_energy(bands: BandSet) -> BandSet:
    """Image under s -> {+2 sqrt(s), -2 sqrt(s)}."""
    if bands.axis != "s":
        raise ValueError("expected a spectral-axis band set")
    if bands.is_empty:
        return BandSet.empty(level=bands.level, axis="energy")
    e = 2.0 * np.sqrt(bands.intervals)
    iv = np.concatenate([e, -e[:, ::-1]])
    return BandSet(iv, level=bands.level, axis="energy")


# --- Hausdorff distance ----------------------------------------------------


@dataclass(frozen=True)
class HausdorffReport:
    distance: float
    witnesses: tuple[float, float]


def _directed(A: BandSet, B: BandSet):
    """sup over A of the distance to B, with the maximising point."""
    cand = [A.lo, A.hi]
    if len(B) > 1:
        mids = 0.5 * (B.hi[:-1] + B.lo[1:])
        cand.append(mids[A.contains(mids)])
    pts = np.concatenate(cand)
    d = B.distance_to(pts)
    i = int(np.argmax(d))
    return float(d[i]), float(pts[i])


def _nearest(B: BandSet, x: float) -> float:
    if B.contains(x):
        return x
    ends = B.intervals.ravel()
    return float(ends[np.argmin(np.abs(ends - x))])


def hausdorff_distance(A: BandSet, B: BandSet) -> HausdorffReport:
    """Exact Hausdorff distance between two finite interval unions.

    The distance to an interval union is piecewise linear, so its maximum
    over an interval sits at an endpoint or at a gap midpoint of the other
    set.
    """
    if A.is_empty or B.is_empty:
        raise ValueError("Hausdorff distance needs two nonempty sets")
    dab, xa = _directed(A, B)
    dba, xb = _directed(B, A)
    if dab >= dba:
        return HausdorffReport(dab, (xa, _nearest(B, xa)))
    return HausdorffReport(dba, (_nearest(A, xb), xb))


# --- convergence -----------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    hausdorff: float | None
    length: float


def convergence_study(
    params: CouplingParams, ks: Iterable[int], N: int | None = 0, opts: ScanOptions | None = None
) -> list[ConvergenceRow]:
    """Hausdorff distance between consecutive covers and cover lengths.

    ``N=None`` runs the offset probe first.  The last row has no distance.
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks:
        raise ValueError("need at least one level")
    if N is None:
        N = choose_offset(params, ks, opts=opts)
    covers = {k: nested_cover(params, k, N, opts).bands for k in ks}
    rows = []
    for k in ks:
        nxt = covers.get(k + 1)
        dist = hausdorff_distance(covers[k], nxt).distance if nxt is not None else None
        rows.append(ConvergenceRow(k, dist, covers[k].length))
    return rows
