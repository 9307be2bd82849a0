import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qihyp.freewords import (
    FreeWord,
    NotInW,
    ResourceCeilingError,
    block_reduce_step,
    comm_count,
    commutator,
    count_levels,
    gen_comm_level,
    growth_floor,
    is_reduced,
    level_stats,
    reconstruct,
    reduce,
    reduced_images,
    staged_reduce,
    verify_injectivity,
)

words = st.lists(st.sampled_from([1, 2, -1, -2]), max_size=40).map(FreeWord)


def test_freeword_parsing():
    w = FreeWord("abAB")
    assert tuple(w) == (1, 2, -1, -2)
    assert str(w) == "abAB"
    assert str(FreeWord()) == "1"
    assert w.inverse() == FreeWord("baBA")
    with pytest.raises(ValueError):
        FreeWord("abc")
    with pytest.raises(ValueError):
        FreeWord((3,))


def test_commutator_convention():
    assert commutator(FreeWord("a"), FreeWord("b")) == FreeWord("abAB")


def test_reduce_examples():
    assert reduce(FreeWord("abBA")) == FreeWord()
    assert reduce(FreeWord("abAB")) == FreeWord("abAB")


@given(words)
def test_reduce_idempotent_and_shortening(w):
    r = reduce(w)
    assert reduce(r) == r
    assert len(r) <= len(w)
    assert is_reduced(r)


@given(words, words)
def test_reduce_is_a_homomorphism(u, v):
    assert reduce(u + v) == reduce(reduce(u) + reduce(v))
    assert reduce(u + u.inverse()) == FreeWord()


def test_block_reduce_examples():
    x = FreeWord("abAB")
    assert block_reduce_step(x + x.inverse(), 4) == FreeWord()
    w = commutator("a", "b") + commutator("b", "A")
    assert block_reduce_step(w, 4) == w
    with pytest.raises(ValueError):
        block_reduce_step(FreeWord("abA"), 2)


def test_block_reduce_resumes_after_pair():
    # X X^-1 X: the pass cancels the first pair and keeps the last block
    assert block_reduce_step(FreeWord("ab") + FreeWord("BA") + FreeWord("ab"), 2) == FreeWord("ab")
    # a A a A collapses in one pass but a a A A only loses its middle pair
    assert block_reduce_step(FreeWord("aAaA"), 1) == FreeWord()
    assert block_reduce_step(FreeWord("aaAA"), 1) == FreeWord("aA")


@pytest.mark.parametrize("i", [0, 1, 2, 3])
def test_staged_reduce_equals_reduce(i):
    for w in gen_comm_level(i):
        assert staged_reduce(w, i) == reduce(w)


def test_level_sizes():
    assert [len(gen_comm_level(i)) for i in range(4)] == [4, 8, 48, 2208]
    assert [comm_count(i) for i in range(4)] == [4, 8, 48, 2208]
    assert tuple(gen_comm_level(0)) == tuple(FreeWord(c) for c in "abAB")
    assert gen_comm_level(1).words[0] == FreeWord("abAB")


@pytest.mark.parametrize("i", [0, 1, 2, 3])
def test_level_invariants(i):
    ws = gen_comm_level(i).words
    assert all(len(w) == 4**i for w in ws)
    assert all(w != w.inverse() for w in ws)
    assert all(len(r) <= 4**i for r in reduced_images(i))


def test_level_ceiling():
    with pytest.raises(ResourceCeilingError):
        gen_comm_level(4)
    with pytest.raises(ValueError):
        gen_comm_level(-1)


def test_count_levels():
    rows = count_levels(3)
    assert rows[1] == (1, 8, 4, 8)
    assert rows[2] == (2, 48, 16, 32)
    assert rows[3] == (3, 2208, 256, 512)
    for i, c, lo, hi in rows:
        assert c >= lo
        if i >= 1:
            assert c >= hi


def test_reconstruct_examples():
    assert reconstruct(FreeWord("abAB")) == (1, FreeWord("abAB"))
    assert reconstruct(FreeWord("a")) == (0, FreeWord("a"))
    with pytest.raises(ValueError):
        reconstruct(FreeWord("aA"))


@pytest.mark.parametrize("i", [0, 1, 2])
def test_reconstruct_exhaustive(i):
    for w in gen_comm_level(i):
        assert reconstruct(reduce(w)) == (i, w)


def test_reconstruct_samples_level3():
    rng = random.Random(0)
    for w in rng.sample(gen_comm_level(3).words, 500):
        assert reconstruct(reduce(w)) == (3, w)


@pytest.mark.parametrize("bad", ["ab", "aa", "aab", "abABa", "abAbab"])
def test_reconstruct_not_in_w(bad):
    with pytest.raises(NotInW) as exc:
        reconstruct(FreeWord(bad))
    assert exc.value.level >= 0


def test_reconstruct_rejects_near_misses():
    # a reduced W2 word with its last letter dropped is not in W
    w = reduce(gen_comm_level(2).words[5])
    with pytest.raises(NotInW):
        reconstruct(w[:-1])


@pytest.mark.parametrize("i", [0, 1, 2, 3])
def test_injectivity(i):
    assert verify_injectivity(i)
    stats = level_stats(i)
    assert stats["distinct_reduced"] == stats["c_i"] == comm_count(i)


def test_level_stats_lengths():
    assert level_stats(2)["min_reduced_length"] == 14
    assert level_stats(2)["max_reduced_length"] == 16


def test_growth_floor():
    assert growth_floor(0) == 1
    assert growth_floor(16) == 2
    assert growth_floor(64) == 4
    with pytest.raises(ValueError):
        growth_floor(-1)


def test_dyadic_word_counts_beat_floor():
    seen = set()
    for i in range(4):
        seen.update(reduced_images(i))
        n = 4**i
        assert len({w for w in seen if len(w) <= n}) >= 2 ** (2**i) >= growth_floor(n)
