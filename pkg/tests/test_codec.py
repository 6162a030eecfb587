import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agecodec.codec import (
    CodecError,
    CodeBook,
    LengthAssignment,
    canonical_code,
    kraft_sum,
    moments,
    round_up,
    shannon_lengths,
)
from agecodec.pmf import entropy, new_pmf, uniform, zipf
from conftest import head_tail_alt, head_tail_pmf


@pytest.mark.parametrize("ell,expected", [((1, 1), 1.0), ((1, 2, 2), 1.0), ((1, 2, 3), 0.875)])
def test_kraft_sum(ell, expected):
    assert kraft_sum(LengthAssignment.integer(ell)) == expected


def test_length_assignment_validation():
    with pytest.raises(CodecError):
        LengthAssignment(np.array([1.0, -0.5]))
    with pytest.raises(CodecError):
        LengthAssignment(np.array([1.0, math.inf]))
    with pytest.raises(CodecError):
        LengthAssignment(np.array([1.5, 2.0]), integral=True)
    with pytest.raises(CodecError):
        LengthAssignment(np.array([]))
    assert LengthAssignment.integer([1, 2]).as_ints() == [1, 2]
    with pytest.raises(CodecError):
        LengthAssignment(np.array([1.5])).as_ints()


def test_kraft_feasible_flag():
    assert LengthAssignment.integer([1, 2, 2]).kraft_feasible
    assert not LengthAssignment.integer([1, 1, 2]).kraft_feasible
    assert LengthAssignment(np.array([1.0, 1.0 - 1e-12])).kraft_feasible


def test_shannon_lengths_examples():
    ell = shannon_lengths(new_pmf([0.5, 0.25, 0.25]), integer=True)
    assert ell.as_ints() == [1, 2, 2]
    real = shannon_lengths(new_pmf([0.9, 0.1]))
    assert real.lengths == pytest.approx([0.15200309, 3.32192809], abs=1e-8)
    ex = shannon_lengths(head_tail_pmf(16), integer=True).as_ints()
    assert ex[0] == 1 and set(ex[1:]) == {20} and len(ex) == 2**16 + 1


def test_shannon_lengths_kraft(rng):
    for _ in range(100):
        p = new_pmf(rng.dirichlet(np.ones(int(rng.integers(2, 64)))))
        assert abs(kraft_sum(shannon_lengths(p)) - 1) < 1e-12
        assert kraft_sum(shannon_lengths(p, integer=True)) <= 1


def test_shannon_lengths_exact_powers_of_two():
    for k in range(1, 11):
        assert set(shannon_lengths(uniform(2**k), integer=True).as_ints()) == {k}


def test_round_up():
    assert round_up(LengthAssignment(np.array([0.5, 1.2]))).as_ints() == [1, 2]
    ints = LengthAssignment.integer([1, 2, 2])
    assert round_up(ints) is ints
    p = zipf(1, 8)
    assert round_up(shannon_lengths(p)).as_ints() == shannon_lengths(p, integer=True).as_ints()


@pytest.mark.parametrize(
    "ell,words",
    [
        ((1, 2, 2), ("0", "10", "11")),
        ((2, 2, 2, 2), ("00", "01", "10", "11")),
        ((1, 2, 3, 3), ("0", "10", "110", "111")),
        ((3, 1, 3, 2), ("110", "0", "111", "10")),
    ],
)
def test_canonical_code(ell, words):
    assert canonical_code(ell).codewords == words


def test_canonical_code_errors():
    with pytest.raises(CodecError):
        canonical_code([1, 1, 1])
    with pytest.raises(CodecError):
        canonical_code([0, 1])
    with pytest.raises(CodecError):
        canonical_code(LengthAssignment(np.array([1.5, 2.0])))


@st.composite
def kraft_feasible_lengths(draw):
    n = draw(st.integers(2, 64))
    ell = draw(st.lists(st.integers(1, 12), min_size=n, max_size=n))
    # lengthen words until Kraft holds
    while sum(2.0**-k for k in ell) > 1:
        i = min(range(n), key=lambda j: ell[j])
        ell[i] += 1
    return ell


@settings(max_examples=200, deadline=None)
@given(kraft_feasible_lengths())
def test_canonical_code_is_prefix_free(ell):
    book = canonical_code(ell)
    assert [len(w) for w in book.codewords] == ell
    words = sorted(book.codewords)
    assert all(not b.startswith(a) for a, b in zip(words, words[1:]))


def test_codebook_rejects_prefix_and_junk():
    with pytest.raises(CodecError):
        CodeBook(("0", "01"))
    with pytest.raises(CodecError):
        CodeBook(("0", "12"))
    with pytest.raises(CodecError):
        CodeBook(("", "1"))


def test_encode_decode_round_trip(rng):
    book = canonical_code([1, 2, 3, 3])
    msg = rng.integers(0, 4, size=500).tolist()
    assert book.decode(book.encode(msg)) == msg
    with pytest.raises(CodecError):
        book.decode("11")


def test_serialization_round_trips():
    book = canonical_code([2, 1, 3, 3])
    assert CodeBook.from_json(book.to_json()) == book
    ell = LengthAssignment.integer([2, 1, 3, 3])
    back = LengthAssignment.from_csv(ell.to_csv())
    assert back.integral and back.as_ints() == [2, 1, 3, 3]
    real = LengthAssignment(np.array([0.1, 2.75]))
    assert LengthAssignment.from_csv(real.to_csv()).lengths.tolist() == [0.1, 2.75]
    with pytest.raises(CodecError):
        LengthAssignment.from_csv("symbol,len\n0,1\n")
    with pytest.raises(CodecError):
        LengthAssignment.from_csv("symbol,length\n0,1\n2,1\n")


def test_moments_examples():
    assert moments(uniform(4), [2, 2, 2, 2]) == (2.0, 4.0)
    assert moments(new_pmf([0.5, 0.5]), [1, 2]) == (1.5, 2.5)
    with pytest.raises(CodecError):
        moments(uniform(4), [1, 2])


def test_moments_of_alternative_code_under_p():
    # Shannon lengths for P' evaluated under the true source P
    n = 16
    head = 2 ** -math.sqrt(n)
    a, b = -math.log2(head), -math.log2((1 - head) / 2**n)
    m1 = (1 - 1 / n) * a + (1 / n) * b
    m2 = (1 - 1 / n) * a * a + (1 / n) * b * b
    got = moments(head_tail_pmf(n), shannon_lengths(head_tail_alt(n)))
    assert got == pytest.approx((m1, m2), rel=1e-10)
    assert round(got[0], 3) == 4.756 and round(got[1], 2) == 31.19


def test_average_length_at_least_entropy(rng):
    for _ in range(200):
        p = new_pmf(rng.dirichlet(np.ones(int(rng.integers(2, 40)))))
        q = rng.dirichlet(np.ones(len(p)))
        ell = -np.log2(q)  # Kraft equality
        assert moments(p, ell)[0] >= entropy(p) - 1e-12
