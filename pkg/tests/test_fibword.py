import numpy as np
import pytest
from hypothesis import given, strategies as st

from fibising.fibword import (
    CapacityError, FibWord, Letter, coupling_sequence, fib_length, substitute, word_at_level,
)
from fibising.tracecore import CouplingParams, ParameterError


@pytest.mark.parametrize("src,dst", [("A", "AB"), ("AB", "ABA"), ("ABA", "ABAAB")])
def test_substitute_examples(src, dst):
    assert str(substitute(FibWord.from_string(len(src), src))) == dst


def test_word_at_level_examples():
    assert str(word_at_level(1)) == "A"
    assert str(word_at_level(4)) == "ABAAB"
    w5 = word_at_level(5)
    assert len(w5) == 8
    assert str(w5) == str(word_at_level(4)) + str(word_at_level(3))


def test_lengths_follow_fibonacci():
    lengths = [fib_length(k) for k in range(1, 30)]
    assert lengths[:6] == [1, 2, 3, 5, 8, 13]
    assert all(c == a + b for a, b, c in zip(lengths, lengths[1:], lengths[2:]))
    assert all(len(word_at_level(k)) == fib_length(k) for k in range(1, 25))


@given(st.integers(min_value=2, max_value=24))
def test_concatenation_recurrence(k):
    w = word_at_level(k + 1).bits
    assert np.array_equal(w, np.concatenate([word_at_level(k).bits, word_at_level(k - 1).bits]))


@given(st.integers(min_value=1, max_value=22))
def test_substitution_matches_recurrence(k):
    assert substitute(word_at_level(k)) == word_at_level(k + 1)


def test_capacity_cap():
    with pytest.raises(CapacityError):
        word_at_level(40)
    with pytest.raises(CapacityError):
        word_at_level(10, capacity=50)
    with pytest.raises(ValueError):
        word_at_level(0)


def test_letters_and_hash():
    w = word_at_level(3)
    assert w.letters == [Letter.A, Letter.B, Letter.A]
    assert hash(w) == hash(FibWord.from_string(3, "ABA"))
    with pytest.raises(ValueError):
        FibWord.from_string(1, "AC")


@pytest.mark.parametrize("text,J0,J1,want", [
    ("AB", 2.0, 1.0, [2, 1]),
    ("A", 3.0, 3.0, [3]),
    ("ABAAB", 1.0, 2.0, [1, 2, 1, 1, 2]),
])
def test_coupling_sequence(text, J0, J1, want):
    got = coupling_sequence(FibWord.from_string(1, text), CouplingParams(J0, J1))
    assert got.tolist() == want


@pytest.mark.parametrize("J0,J1", [(0.0, 1.0), (-1.0, 1.0), (1.0, float("nan")), (1.0, float("inf"))])
def test_bad_couplings_rejected(J0, J1):
    with pytest.raises(ParameterError):
        CouplingParams(J0, J1)
