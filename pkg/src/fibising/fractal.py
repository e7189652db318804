"""Box-counting dimension of interval unions and of spectrum approximants."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .spectrum import BandSet, ScanOptions, band_set, nested_cover
from .tracecore import CouplingParams


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    stderr: float
    eps_range: tuple[float, float]
    counts: tuple[tuple[float, int], ...]
    slope: float = math.nan

    @property
    def eps(self) -> np.ndarray:
        return np.array([e for e, _ in self.counts])

    @property
    def n_boxes(self) -> np.ndarray:
        return np.array([n for _, n in self.counts])


def box_count(bands: BandSet, eps: float) -> int:
    """Number of grid boxes ``[j eps, (j+1) eps)`` met by the set.

    Intervals of positive length are taken half-open, so a right endpoint
    on a box boundary does not open a new box; degenerate intervals count
    the box holding the point.
    """
    if not eps > 0:
        raise ValueError("box size must be positive")
    if bands.is_empty:
        return 0
    first = np.floor(bands.lo / eps).astype(np.int64)
    last = np.maximum(first, np.ceil(bands.hi / eps).astype(np.int64) - 1)
    # boxes shared with the previous interval are counted once
    prev_last = np.maximum.accumulate(np.concatenate([[first[0] - 1], last[:-1]]))
    start = np.maximum(first, prev_last + 1)
    return int(np.sum(np.maximum(last - start + 1, 0)))


def auto_schedule(bands: BandSet, min_points: int = 4, window: float | None = None) -> np.ndarray:
    """Dyadic box sizes from an eighth of the window down to four times the
    narrowest band (the scale of the approximant)."""
    if bands.is_empty:
        raise ValueError("cannot build a schedule for an empty set")
    a, b = bands.hull
    span = window if window is not None else (b - a)
    if span <= 0:
        span = 1.0
    eps_max = 2.0 ** math.floor(math.log2(span / 8.0))
    eps_min = 4.0 * max(bands.min_width, 1e-12)
    n = max(min_points - 1, int(math.floor(math.log2(eps_max / eps_min))) if eps_min < eps_max else 0)
    return eps_max * 2.0 ** -np.arange(n + 1)


def box_dimension(bands: BandSet, eps_schedule: Sequence[float] | None = None) -> DimensionEstimate:
    """Least-squares slope of log N(eps) against log(1/eps)."""
    eps = auto_schedule(bands) if eps_schedule is None else np.asarray(eps_schedule, dtype=float)
    if eps.size < 4 or np.any(eps <= 0) or np.unique(eps).size != eps.size:
        raise ValueError("need at least four distinct positive box sizes")
    eps = np.sort(eps)[::-1]
    ratios = eps[1:] / eps[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-6):
        raise ValueError("box sizes must form a geometric sequence")
    counts = np.array([box_count(bands, e) for e in eps])
    if np.any(counts == 0):
        raise ValueError("empty set has no box dimension")
    fit = stats.linregress(np.log(1.0 / eps), np.log(counts))
    return DimensionEstimate(
        value=float(np.clip(fit.slope, 0.0, 1.0)),
        stderr=float(fit.stderr),
        eps_range=(float(eps[-1]), float(eps[0])),
        counts=tuple((float(e), int(n)) for e, n in zip(eps, counts)),
        slope=float(fit.slope),
    )


def middle_thirds(depth: int) -> BandSet:
    """Depth-d prefix of the middle-thirds Cantor set on [0, 1]."""
    lo = np.zeros(1)
    width = 1.0
    for _ in range(depth):
        width /= 3.0
        lo = np.concatenate([lo, lo + 2.0 * width])
    lo.sort()
    return BandSet(np.column_stack([lo, lo + width]), axis="line")


# --- local profiles --------------------------------------------------------


@dataclass(frozen=True)
class WindowEstimate:
    center: float
    halfwidth: float
    n_intervals: int
    estimate: DimensionEstimate | None
    low_confidence: bool


@dataclass(frozen=True)
class LocalDimensionProfile:
    k: int
    windows: tuple[WindowEstimate, ...]


def default_windows(bands: BandSet, n: int = 8) -> list[tuple[float, float]]:
    a, b = bands.hull
    half = (b - a) / (2 * n)
    return [(a + (2 * i + 1) * half, half) for i in range(n)]


def window_dimension(bands: BandSet, center: float, halfwidth: float, min_intervals: int = 3) -> WindowEstimate:
    """Box dimension of the part of ``bands`` within ``center +- halfwidth``.

    The smallest box is tied to the narrowest band meeting the window, not
    to slivers produced by clipping.
    """
    lo, hi = center - halfwidth, center + halfwidth
    meets = (bands.hi >= lo) & (bands.lo <= hi)
    piece = bands.clip(lo, hi)
    if piece.is_empty:
        return WindowEstimate(center, halfwidth, 0, None, True)
    scale = float(np.min(bands.hi[meets] - bands.lo[meets]))
    eps_max = 2.0 ** math.floor(math.log2(2 * halfwidth / 8.0))
    eps_min = 4.0 * max(scale, 1e-12)
    n = max(3, int(math.floor(math.log2(eps_max / eps_min))) if eps_min < eps_max else 0)
    est = box_dimension(piece, eps_max * 2.0 ** -np.arange(n + 1))
    return WindowEstimate(center, halfwidth, len(piece), est, len(piece) < min_intervals)


def local_dimension_profile(
    params: CouplingParams,
    k: int,
    windows: int | Sequence[tuple[float, float]] | None = None,
    opts: ScanOptions | None = None,
    bands: BandSet | None = None,
) -> LocalDimensionProfile:
    """Windowed box dimensions of the level-k band set.

    ``windows`` is a list of ``(center, halfwidth)`` pairs or a number of
    equal slices of the band hull (default 8).
    """
    bands = band_set(params, k, opts) if bands is None else bands
    if windows is None or isinstance(windows, int):
        windows = default_windows(bands, windows or 8)
    return LocalDimensionProfile(k, tuple(window_dimension(bands, c, h) for c, h in windows))


def dimension_vs_parameters(
    J1: float, r_list: Sequence[float], k: int, N: int = 0, opts: ScanOptions | None = None
) -> list[tuple[float, DimensionEstimate]]:
    """Global box dimension of the level-k cover for each ratio r = J0/J1."""
    out = []
    for r in r_list:
        if not r > 0:
            raise ValueError(f"ratios must be positive, got {r}")
        cover = nested_cover(CouplingParams.from_ratio(r, J1), k, N, opts).bands
        out.append((float(r), box_dimension(cover)))
    return out
