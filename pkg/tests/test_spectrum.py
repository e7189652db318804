import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fibising import spectrum as sp
from fibising import tracecore as tc
from fibising.spectrum import BandSet, ScanOptions
from fibising.tracecore import CouplingParams

UNIFORM = CouplingParams(1.0, 1.0)
R08 = CouplingParams.from_ratio(0.8, 1.0)


# --- interval algebra ------------------------------------------------------


def test_bandset_merges_and_freezes():
    b = BandSet([[3, 4], [0, 1], [0.5, 2]])
    assert b.intervals.tolist() == [[0, 2], [3, 4]]
    assert b.length == 3 and b.hull == (0, 4)
    with pytest.raises(ValueError):
        b.intervals[0, 0] = 9
    with pytest.raises(ValueError):
        BandSet([[2, 1]])
    with pytest.raises(ValueError):
        BandSet([[-1, 1]])
    assert BandSet.empty().is_empty and BandSet.empty().length == 0


def test_contains_and_distance():
    b = BandSet([[0, 1], [3, 4]])
    assert b.contains([0, 0.5, 1, 2, 3, 4, 4.5]).tolist() == [1, 1, 1, 0, 1, 1, 0]
    assert b.contains(1.1, inflate=0.2)
    assert np.allclose(b.distance_to([2.0, 2.5, 5.0, 0.5]), [1.0, 0.5, 1.0, 0.0])


def test_subset_with_slack():
    outer = BandSet([[0, 1], [2, 3]])
    assert BandSet([[0.2, 0.8], [2.5, 3.0]]).subset_of(outer)
    assert not BandSet([[0.2, 1.1]]).subset_of(outer)
    assert BandSet([[0.2, 1.1]]).subset_of(outer, slack=0.1 + 1e-12)
    assert sp.nesting_violations(outer, BandSet([[0.5, 1.5], [2, 3]]), 0.0) == 1


# --- Hausdorff distance ----------------------------------------------------


def _brute_hausdorff(A: BandSet, B: BandSet, h=1e-3):
    def sample(X):
        return np.concatenate([np.arange(a, b + h / 2, h) for a, b in X])

    a, b = sample(A), sample(B)
    return max(B.distance_to(a).max(), A.distance_to(b).max())


@pytest.mark.parametrize("A,B,want", [
    ([[0, 1]], [[0, 2]], 1.0),
    ([[0, 1], [3, 4]], [[0, 1], [3, 4]], 0.0),
    ([[0, 1], [3, 4]], [[0, 4]], 1.0),
])
def test_hausdorff_examples(A, B, want):
    A, B = BandSet(A, axis="line"), BandSet(B, axis="line")
    assert sp.hausdorff_distance(A, B).distance == pytest.approx(want, abs=1e-15)
    assert _brute_hausdorff(A, B) == pytest.approx(want, abs=1e-3)


def test_hausdorff_gap_midpoint_witness():
    rep = sp.hausdorff_distance(BandSet([[0, 1], [3, 4]]), BandSet([[0, 4]]))
    assert 2.0 in rep.witnesses


intervals = st.lists(st.tuples(st.floats(0, 10), st.floats(0, 2)), min_size=1, max_size=6).map(
    lambda xs: BandSet([[a, a + w] for a, w in xs], axis="line")
)


@settings(max_examples=60, deadline=None)
@given(intervals, intervals)
def test_hausdorff_matches_brute_force(A, B):
    d = sp.hausdorff_distance(A, B).distance
    assert d == pytest.approx(_brute_hausdorff(A, B), abs=1.1e-3)
    assert d == pytest.approx(sp.hausdorff_distance(B, A).distance)


def test_hausdorff_rejects_empty():
    with pytest.raises(ValueError):
        sp.hausdorff_distance(BandSet.empty(), BandSet([[0, 1]]))


# --- traces ----------------------------------------------------------------


def test_trace_value_closed_forms():
    for r in (0.5, 0.8, 2.0):
        p = CouplingParams.from_ratio(r, 1.0)
        for s in (0.0, 1.0, 7.5):
            assert sp.trace_value(p, s, -1) == pytest.approx((r + 1 / r) / 2)
            assert sp.trace_value(p, s, 1) == pytest.approx((s - 2) / 2)
    with pytest.raises(ValueError):
        sp.trace_value(UNIFORM, 1.0, -2)


def test_trace_value_follows_recursion():
    p = CouplingParams(0.7, 1.3)
    s = 2.2
    x = [sp.trace_value(p, s, k) for k in range(-1, 12)]
    for m in range(2, 12):
        # index shift: x[j] holds x_{j-1}
        assert x[m + 1] == pytest.approx(2 * x[m] * x[m - 1] - x[m - 2], rel=1e-12, abs=1e-12)


def test_trace_value_past_guard_is_inf_after_witness():
    assert sp.trace_value(R08, 30.0, 30) == np.inf


def test_trace_values_vectorised():
    s = np.linspace(0, 4, 9)
    vec = sp.trace_values(R08, s, 5)
    ref = np.array([sp.trace_value(R08, x, 5) for x in s])
    fin = np.isfinite(vec)
    assert fin.sum() >= 4
    assert np.allclose(vec[fin], ref[fin], rtol=1e-12)
    # certified escapes are reported as inf; the scalar value confirms |x| > 1
    assert np.all(np.abs(ref[~fin]) > 1)


# --- band sets -------------------------------------------------------------


@pytest.mark.parametrize("r", [0.3, 0.8, 1.0, 1.7, 3.0])
def test_level_two_is_analytic_band(r):
    bands = sp.band_set(CouplingParams.from_ratio(r, 1.0), 2)
    assert len(bands) == 1
    assert np.allclose(bands.intervals[0], [0.0, 4.0], atol=1e-10)


@pytest.mark.parametrize("J", [0.6, 1.0, 1.4])
def test_uniform_chain_band(J):
    params = CouplingParams(J, J)
    lo, hi = (1 - J) ** 2, (1 + J) ** 2
    delta = 1e-6
    for k in range(1, 9):
        bands = sp.band_set(params, k)
        assert bands.contains([lo + delta, hi - delta]).all()
        assert bands.subset_of(BandSet([[lo, hi]]), slack=1e-9)
        # dispersion oracle: every momentum of the periodic chain lies in the band
        q = np.linspace(0, np.pi, 50)
        assert bands.contains(1 + J * J - 2 * J * np.cos(q), inflate=1e-9).all()


def test_band_set_within_window_and_nonempty():
    for k in range(1, 11):
        b = sp.band_set(R08, k)
        assert not b.is_empty
        assert b.lo[0] >= 0 and b.hi[-1] <= R08.s_max


def test_band_edges_are_level_crossings():
    b = sp.band_set(R08, 7)
    inner = b.intervals.ravel()
    x = sp.trace_values(R08, inner, 6)
    assert np.all(np.abs(x) <= 1.0)
    # just outside each gap edge the trace exceeds one
    out = np.concatenate([b.lo[1:] - 1e-9, b.hi[:-1] + 1e-9])
    assert np.all(np.abs(sp.trace_values(R08, out, 6)) > 1.0)


def test_band_set_rejects_bad_input():
    with pytest.raises(ValueError):
        sp.band_set(R08, 0)
    with pytest.raises(ValueError):
        ScanOptions(edge_tol=0.0)


def test_refinement_warning_on_coarse_grid():
    with pytest.warns(sp.RefinementWarning):
        sp.band_set(R08, 8, density=50.0)


# --- covers and convergence -------------------------------------------------


def test_uniform_cover_is_single_band():
    for k in range(1, 9):
        cover = sp.nested_cover(UNIFORM, k).bands
        assert len(cover) == 1
        assert np.allclose(cover.intervals[0], [0, 4], atol=1e-6)


def test_covers_nest_for_r08():
    covers = [sp.nested_cover(R08, k).bands for k in range(1, 10)]
    for outer, inner in zip(covers, covers[1:]):
        assert sp.nesting_violations(outer, inner, 2e-12) == 0
    lengths = [c.length for c in covers]
    assert all(b <= a for a, b in zip(lengths, lengths[1:]))


def test_choose_offset():
    assert sp.choose_offset(R08, range(1, 6)) == 0


def test_uniform_convergence_is_stationary():
    rows = sp.convergence_study(UNIFORM, range(1, 8))
    assert all(r.hausdorff < 2e-12 for r in rows[:-1])
    assert rows[-1].hausdorff is None
    assert all(abs(r.length - 4.0) < 1e-6 for r in rows)


def test_convergence_single_level():
    rows = sp.convergence_study(R08, [3])
    assert len(rows) == 1 and rows[0].hausdorff is None


def test_r08_distances_mostly_decrease():
    rows = sp.convergence_study(R08, range(2, 10))
    d = [r.hausdorff for r in rows[:-1]]
    assert sum(b > a for a, b in zip(d, d[1:])) <= 1


def test_b_infinity_approx():
    assert sp.b_infinity_approx(R08, 6) == sp.nested_cover(R08, 6).bands
    with pytest.raises(ValueError):
        sp.b_infinity_approx(R08, 0)


# --- energy axis -----------------------------------------------------------


def test_symmetrize_examples():
    e = sp.symmetrize_to_energy(BandSet([[0, 4]]))
    assert e.axis == "energy" and e.intervals.tolist() == [[-4, 4]]
    assert sp.symmetrize_to_energy(BandSet([[1, 4]])).intervals.tolist() == [[-4, -2], [2, 4]]
    assert sp.symmetrize_to_energy(BandSet.empty()).is_empty
    with pytest.raises(ValueError):
        sp.symmetrize_to_energy(e)
