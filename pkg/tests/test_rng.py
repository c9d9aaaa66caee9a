import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyavg import RngStream
from levyavg.rng import as_generator, tag_id


def test_same_address_replays_identically():
    a = RngStream(3, 5, (1, 2)).generator().random(100)
    b = RngStream(3, 5, (1, 2)).generator().random(100)
    assert np.array_equal(a, b)


def test_generator_is_fresh_each_call():
    s = RngStream(0, 1)
    g1 = s.generator()
    g1.random(10)
    assert np.array_equal(s.generator().random(5), RngStream(0, 1).generator().random(5))


@given(st.integers(0, 2**64 - 1), st.integers(0, 1000), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_distinct_children_give_distinct_draws(seed, i, j):
    if i == j:
        return
    s = RngStream(seed, 1)
    assert not np.array_equal(s.child(i).generator().random(4), s.child(j).generator().random(4))


def test_children_are_uncorrelated():
    s = RngStream(0, 9)
    a = s.child(0).generator().standard_normal(20_000)
    b = s.child(1).generator().standard_normal(20_000)
    # |corr| below 4 standard errors of a null correlation
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(a.size)


def test_child_path_nesting_differs_from_flat():
    s = RngStream(0, 1)
    assert s.child(1, 2) == s.child(1).child(2)
    assert s.child(1, 2) != s.child(2, 1)


def test_tags_are_stable_and_distinct():
    assert tag_id("strong-rate") == tag_id("strong-rate")
    assert tag_id("strong-rate") != tag_id("weak-rate")
    assert RngStream.from_tag(0, "a").stream_id == tag_id("a")


@pytest.mark.parametrize("bad", [dict(seed=-1), dict(seed=2**64), dict(seed=1.5), dict(seed=0, stream_id=-3),
                                 dict(seed=0, path=(-1,))])
def test_invalid_addresses_rejected(bad):
    with pytest.raises(ValueError):
        RngStream(**bad)


def test_as_generator_accepts_both_kinds():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert isinstance(as_generator(RngStream(0)), np.random.Generator)
    with pytest.raises(TypeError):
        as_generator(42)
