from math import gcd

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.symbolic import (
    RotationalParams,
    SymbolWord,
    all_bases,
    cyclic_equal,
    cyclic_offset,
    family_identity_failures,
    farey_roots,
    flip_at,
    g_index,
    g_word,
    g_word_product,
    main_identity_holds,
    mult_inverse,
    partitions,
    prefix_word,
    rotation_of_itinerary,
    rotational_word,
    shift,
)


@st.composite
def bases(draw, n_max=30):
    n = draw(st.integers(3, n_max))
    m = draw(st.integers(1, n - 1).filter(lambda m: gcd(m, n) == 1))
    l = draw(st.integers(1, n - 1))
    return RotationalParams(l, m, n)


words = st.text(alphabet="LR", min_size=1, max_size=40).map(SymbolWord)


@pytest.mark.parametrize("lmn, expected", [((3, 3, 8), "LRRLRRLR"), ((2, 2, 5), "LRRLR"), ((1, 1, 2), "LR")])
def test_known_rotational_words(lmn, expected):
    assert str(rotational_word(*lmn)) == expected


@pytest.mark.parametrize(
    "m, n, left, right",
    [(3, 8, (1, 3), (2, 5)), (2, 5, (1, 3), (1, 2)), (1, 2, (0, 1), (1, 1)), (1, 3, (0, 1), (1, 2))],
)
def test_farey_roots(m, n, left, right):
    roots = farey_roots(m, n)
    assert roots.left == left and roots.right == right
    # neighbours in the Farey sense
    assert right[0] * n - m * right[1] == 1
    assert m * left[1] - left[0] * n == 1


def test_rotational_word_counts_and_inverse():
    b = RotationalParams(3, 3, 8)
    assert b.word.count("L") == 3
    assert (b.m * b.d) % b.n == 1
    assert mult_inverse(3, 8) == 3


def test_partitions_concatenate_to_word():
    b = RotationalParams(3, 3, 8)
    x, y, xh = partitions(b)
    assert str(x) + str(y) == str(b.word)
    assert len(xh) == (-b.d) % b.n


def test_prefix_word_shape():
    b = RotationalParams(2, 2, 5)
    x, y, _ = partitions(b)
    assert len(prefix_word(2, b)) == len(x) + 2 * (len(y) + len(x))
    assert prefix_word(0, b)[0] != x[0]


def test_g_word_length_and_product_form():
    b = RotationalParams(3, 3, 8)
    for k in range(1, 6):
        for dl in range(k):
            idx = g_index(1, k, dl, b)
            g = g_word(1, k, dl, b)
            assert len(g) == idx.n_k == k * b.n + 5
            assert g == g_word_product(k, dl, b)


def test_g_word_rejects_bad_input():
    with pytest.raises(ValueError):
        g_word(1, 0, 0, RotationalParams(3, 3, 8))
    with pytest.raises(ValueError):
        g_word_product(2, 2, RotationalParams(3, 3, 8))


def test_family_identities_small_exhaustive():
    for b in all_bases(14):
        assert main_identity_holds(b), b
        assert family_identity_failures(b, 5) == [], b


@given(bases())
@settings(max_examples=150, deadline=None)
def test_main_identity_random(b):
    assert main_identity_holds(b)


@given(bases(n_max=20), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_family_identities_random(b, k_max):
    assert family_identity_failures(b, k_max) == []


@given(words, st.integers(-100, 100))
def test_shift_is_cyclic(w, i):
    s = shift(w, i)
    assert cyclic_equal(s, w)
    assert shift(s, -i) == w
    assert shift(w, i + len(w)) == s
    off = cyclic_offset(w, s)
    assert off is not None and shift(w, off) == s


@given(words, st.integers(0, 39))
def test_flip_is_involution(w, i):
    i %= len(w)
    f = flip_at(w, i)
    assert f != w
    assert flip_at(f, i) == w
    assert sum(a != b for a, b in zip(str(f), str(w))) == 1


@given(bases(n_max=25), st.integers(0, 50))
@settings(max_examples=100, deadline=None)
def test_itinerary_round_trip(b, i):
    if gcd(b.m, b.n) != 1:
        return
    found = rotation_of_itinerary(str(shift(b.word, i)))
    assert found is not None
    l, m, p = found
    assert (l, p) == (b.l, b.n)
    assert cyclic_equal(rotational_word(l, m, p), b.word)


@pytest.mark.parametrize("itin", ["LL", "RRR", "LLRRRLR"])
def test_non_rotational_itineraries(itin):
    assert rotation_of_itinerary(itin) is None


def test_symbol_word_validation():
    with pytest.raises(ValueError):
        SymbolWord("LXR")
    assert str(SymbolWord("LR") * 3) == "LRLRLR"
    assert SymbolWord("LR", tag="a") == SymbolWord("LR", tag="b")


def test_parse_rotational_params():
    b = RotationalParams.parse("3,3,8")
    assert (b.l, b.m, b.n) == (3, 3, 8)
    with pytest.raises(ValueError):
        RotationalParams(1, 2, 4)
