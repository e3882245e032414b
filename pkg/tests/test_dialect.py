import io
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from korpus.dialect import (
    BUNDLED_WORDLISTS,
    WordList,
    lexical_distance,
    load_bundled,
    pairwise_distance_matrix,
    read_wordlists,
    split_variants,
)
from korpus.exceptions import KorpusError, NoSharedGlossesError


def wl(locale, **entries):
    return WordList(locale, {g.replace("_", "/"): split_variants(v) for g, v in entries.items()})


@pytest.fixture(scope="module")
def jambi():
    return {w.locale: w for w in load_bundled("jambi_malay")}


def test_split_variants_trims_and_casefolds():
    assert split_variants(" Dio' , NO,,") == frozenset({"dio'", "no"})


def test_identical_lists_zero():
    a = wl("a", one="satu", two="dua")
    assert lexical_distance(a, a) == 0.0


def test_suo_suo_vs_lubuk_telau(jambi):
    # by hand: he/she kau|no, I/me sayo|ambo, if bilao|jiko differ; You and one agree
    assert lexical_distance(jambi["Suo Suo"], jambi["Lubuk Telau"]) == 0.6


def test_shared_variant_counts_as_match(jambi):
    a, b = jambi["Mudung Laut"], jambi["Dusun Teluk"]
    assert a.entries["he/she"] == {"dio'"}
    assert b.entries["he/she"] == {"dio'", "no"}
    only = WordList("a", {"he/she": a.entries["he/she"]}), WordList("b", {"he/she": b.entries["he/she"]})
    assert lexical_distance(*only) == 0.0


def test_jambi_matrix_properties(jambi):
    m = pairwise_distance_matrix(list(jambi.values()))
    assert len(m.locales) == 8
    assert np.array_equal(m.values, m.values.T)
    assert not np.diag(m.values).any()
    assert ((m.values >= 0) & (m.values <= 1)).all()
    assert m["Suo Suo", "Lubuk Telau"] == 0.6


@pytest.mark.parametrize("name", BUNDLED_WORDLISTS)
def test_bundled_fixtures_load(name):
    lists = load_bundled(name)
    assert len(lists) >= 2
    m = pairwise_distance_matrix(lists)
    assert np.array_equal(m.values, m.values.T)


def test_unknown_bundle():
    with pytest.raises(KorpusError):
        load_bundled("klingon")


def test_one_fully_disjoint_pair():
    a = wl("a", one="satu", two="dua")
    b = wl("b", one="satu", two="dua")
    c = wl("c", one="sa", two="ro")
    m = pairwise_distance_matrix([a, b, c])
    assert m["a", "b"] == 0.0 and m["a", "c"] == 1.0 and m["b", "c"] == 1.0


def test_no_shared_glosses_names_pair():
    with pytest.raises(NoSharedGlossesError, match="'x'.*'y'"):
        pairwise_distance_matrix([wl("x", one="satu"), wl("y", two="dua")])


def test_unshared_glosses_ignored():
    a = wl("a", one="satu", two="dua")
    b = wl("b", one="satu", three="tiga")
    assert lexical_distance(a, b) == 0.0


def test_reader_handles_quoted_and_empty_cells():
    src = io.StringIO('gloss,A,B\nhe/she,"dio\', no",\nI/me,aku,Aku\n')
    a, b = read_wordlists(src)
    assert a.entries["he/she"] == {"dio'", "no"}
    assert "he/she" not in b.entries
    assert lexical_distance(a, b) == 0.0
    with pytest.raises(KorpusError):
        read_wordlists(io.StringIO("word,A\n"))
    with pytest.raises(KorpusError):
        read_wordlists(io.StringIO(""))


words = st.text(alphabet="abcdehikmnosu'", min_size=1, max_size=5)
cells = st.lists(words, min_size=1, max_size=3)
glosses = st.lists(st.sampled_from(["one", "two", "three", "four", "five", "six"]), min_size=1, unique=True)


@given(glosses, st.data())
def test_order_invariance_and_agreement_monotone(gs, data):
    a_cells = {g: data.draw(cells) for g in gs}
    b_cells = {g: data.draw(cells) for g in gs}
    a = WordList("a", {g: frozenset(v) for g, v in a_cells.items()})
    b = WordList("b", {g: frozenset(v) for g, v in b_cells.items()})
    d = lexical_distance(a, b)
    assert 0.0 <= d <= 1.0
    assert d == lexical_distance(b, a)
    rev = WordList("a", {g: frozenset(reversed(a_cells[g])) for g in reversed(gs)})
    assert lexical_distance(rev, b) == d
    agree = dict(a.entries, extra=frozenset({"sama"})), dict(b.entries, extra=frozenset({"sama"}))
    assert lexical_distance(WordList("a", agree[0]), WordList("b", agree[1])) <= d
