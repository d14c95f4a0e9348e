"""Cross-module properties, driven by hypothesis."""

from __future__ import annotations

from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from taxa.compare import jaccard, truncate_labels
from taxa.model import format_path, parse_path
from taxa.predict import ancestor_closure
from taxa.assist import postprocess_caption
from taxa.storage import dumps_canonical

segment = st.text(
    alphabet=st.characters(blacklist_characters="/", blacklist_categories=("Cs",)),
    min_size=1,
    max_size=8,
)
path = st.lists(segment, min_size=1, max_size=4).map(tuple)
path_set = st.sets(path, min_size=0, max_size=6)


@given(path)
def test_path_format_parse_round_trip(p):
    assert parse_path(format_path(p)) == p


@given(path_set)
def test_ancestor_closure_is_idempotent_and_monotone(paths):
    closed = ancestor_closure(paths)
    assert closed >= paths
    assert ancestor_closure(closed) == closed
    assert () not in closed
    for p in closed:
        for i in range(1, len(p)):
            assert p[:i] in closed


@given(path_set, path_set)
def test_jaccard_bounds_and_symmetry(a, b):
    val = jaccard(a, b)
    assert 0 <= val <= 1
    assert val == jaccard(b, a)
    assert jaccard(a, a) == 1


@given(st.dictionaries(st.text(min_size=1, max_size=4), path_set, max_size=4),
       st.integers(1, 3))
def test_truncate_idempotent_and_shortens(labels, depth):
    once = truncate_labels(labels, depth)
    assert truncate_labels(once, depth) == once
    for paths in once.values():
        assert all(len(p) <= depth for p in paths)


@given(st.text(max_size=40))
def test_postprocess_caption_never_returns_empty(text):
    out = postprocess_caption(text)
    assert out != ""
    assert out == out.strip()


@given(
    st.recursive(
        st.one_of(
            st.none(),
            st.booleans(),
            st.integers(-(2**31), 2**31),
            st.text(max_size=10),
        ),
        lambda children: st.one_of(
            st.lists(children, max_size=4),
            st.dictionaries(st.text(max_size=6), children, max_size=4),
        ),
        max_leaves=20,
    )
)
@settings(max_examples=60, deadline=None)
def test_canonical_dumps_is_deterministic(doc):
    assert dumps_canonical(doc) == dumps_canonical(doc)
    assert dumps_canonical(doc).endswith(b"\n")


@given(path_set, path_set)
def test_exact_match_implies_jaccard_one(a, b):
    if a == b:
        assert jaccard(a, b) == Fraction(1)
