import io
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from korpus.cascade import (
    REPORTED_TOTALS,
    TABULATION_COLUMNS,
    CascadeReport,
    CityTabulation,
    CorpusStatistics,
    check_tabulation,
    compare_totals,
    load_city_counts,
    read_tabulation_csv,
    run_cascade,
    summarize_statistics,
    tabulate_by_city,
    tabulate_counts,
    total_row,
    write_tabulation_csv,
)
from korpus.exceptions import EmptyInputError
from korpus.geotag import UNASSIGNED
from korpus.records import CascadeLabel, GeoPoint, TweetRecord

F, FO, I = CascadeLabel.FOREIGN, CascadeLabel.FORMAL, CascadeLabel.INFORMAL
AMBON = GeoPoint(-3.62553, 128.190643)


def make_records(kinds, cities=None):
    """``kinds`` holds 'F' (foreign), 'P' (formal), 'I' (informal)."""
    recs, emb = [], {}
    for i, k in enumerate(kinds):
        city = cities[i] if cities else None
        recs.append(TweetRecord(f"r{i:05d}", ("en: " if k == "F" else "") + f"teks {i}",
                                geo=AMBON if city else None, city=city))
        emb[f"r{i:05d}"] = np.array([1.0 if k == "P" else -1.0, 0.0])
    return recs, emb


def counts(labeled):
    return Counter(lab for _, lab in labeled)


def test_empty_stream(stub_langid, stub_head):
    assert list(run_cascade([], stub_langid, stub_head, {})) == []
    assert stub_head.calls == 0


def test_foreign_short_circuits(stub_langid, stub_head):
    recs, emb = make_records("F")
    out = list(run_cascade(recs, stub_langid, stub_head, emb))
    assert out == [(recs[0], F)]
    assert stub_head.rows == 0


def test_three_foreign_two_formal_leaves_five_informal(stub_langid, stub_head):
    recs, emb = make_records("FIPFIIPIFI")
    report = CascadeReport()
    out = list(run_cascade(recs, stub_langid, stub_head, emb, report=report))
    assert [r for r, _ in out] == recs
    assert counts(out) == {F: 3, FO: 2, I: 5}
    assert report.to_dict() == {"Foreign": 3, "FormalIndonesian": 2, "Informal": 5, "quarantined": 0}
    assert stub_head.rows == 7


def test_missing_embedding_is_quarantined(stub_langid, stub_head):
    recs, emb = make_records("IFIP")
    del emb["r00002"]
    del emb["r00001"]  # foreign records never need an embedding
    quarantine, report = [], CascadeReport()
    out = list(run_cascade(recs, stub_langid, stub_head, emb, quarantine=quarantine, report=report))
    assert [r.id for r, _ in out] == ["r00000", "r00001", "r00003"]
    assert quarantine == [recs[2]]
    assert report.quarantined == 1


def test_langid_none_skips_foreign_stage(stub_head):
    recs, emb = make_records("FP")
    assert [lab for _, lab in run_cascade(recs, None, stub_head, emb)] == [I, FO]


def test_bad_jobs(stub_langid, stub_head):
    with pytest.raises(ValueError):
        list(run_cascade([], stub_langid, stub_head, {}, n_jobs=0))


@pytest.mark.parametrize("n_jobs", [1, 4])
@pytest.mark.parametrize("batch_size", [1, 7, 4096])
def test_partition_and_order_across_jobs(stub_langid, stub_head, n_jobs, batch_size):
    rng = np.random.default_rng(0)
    kinds = rng.choice(list("FPI"), 500)
    recs, emb = make_records(kinds)
    out = list(run_cascade(recs, stub_langid, stub_head, emb, n_jobs=n_jobs, batch_size=batch_size))
    assert [r for r, _ in out] == recs
    expected = {"F": F, "P": FO, "I": I}
    assert [lab for _, lab in out] == [expected[k] for k in kinds]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from("FPI"), max_size=60), st.randoms(use_true_random=False))
def test_counts_invariant_under_permutation(kinds, rnd):
    from conftest import StubHead, StubLangid

    recs, emb = make_records(kinds)
    shuffled = list(recs)
    rnd.shuffle(shuffled)
    a = counts(run_cascade(recs, StubLangid(), StubHead(), emb, batch_size=8))
    b = counts(run_cascade(shuffled, StubLangid(), StubHead(), emb, batch_size=5, n_jobs=3))
    assert a == b
    assert sum(a.values()) == len(kinds)


def test_ambon_row():
    row = CityTabulation("Ambon", 13_998, 2_930, 11_068, 1_859, 9_209)
    assert row.violations() == []
    assert CityTabulation("Ambon", 13_999, 2_930, 11_068, 1_859, 9_209).violations()


def test_single_informal_record():
    rows = tabulate_counts([("X", I)])
    assert [(r.city, r.raw, r.foreign, r.formal, r.colloquial_local) for r in rows] == [("X", 1, 0, 0, 1)]
    stats = summarize_statistics(rows)
    assert (stats.foreign_pct, stats.formal_pct, stats.informal_pct) == (0.0, 0.0, 100.0)


def test_tabulation_partitions_input(stub_langid, stub_head):
    rng = np.random.default_rng(1)
    kinds = rng.choice(list("FPI"), 300)
    cities = list(rng.choice(["Ambon", "Medan", None], 300))
    recs, emb = make_records(kinds, cities)
    labeled = list(run_cascade(recs, stub_langid, stub_head, emb))
    rows = tabulate_by_city(labeled)
    assert check_tabulation(rows) == []
    assert [r.city for r in rows] == ["Ambon", "Medan", UNASSIGNED]
    assert rows[0].lat == pytest.approx(-3.62553)
    t = total_row(rows)
    c = counts(labeled)
    assert (t.raw, t.foreign, t.formal, t.colloquial_local) == (300, c[F], c[FO], c[I])


def test_city_counts_fixture_rows_are_consistent():
    rows = load_city_counts()
    assert len(rows) == 33
    assert check_tabulation(rows) == []
    ambon = next(r for r in rows if r.city == "Ambon")
    assert (ambon.raw, ambon.foreign, ambon.formal) == (13_998, 2_930, 1_859)


def test_city_counts_totals_vs_reported():
    rows = load_city_counts()
    t = total_row(rows)
    assert (t.raw, t.foreign, t.colloquial_local) == (1_326_099, 271_861, 922_755)
    # the formal column sums to 131,483; the reported 131,843 is a digit transposition
    assert compare_totals(rows) == {"formal": (131_483, 131_843)}
    assert t.foreign + t.formal + t.colloquial_local == REPORTED_TOTALS["raw"]


def test_statistics_from_reported_counts():
    s = CorpusStatistics.from_counts(1_326_099, 271_861, 131_843, 922_755)
    assert (s.foreign_pct, s.formal_pct, s.informal_pct, s.filtered_pct) == (20.5, 9.9, 69.6, 30.4)
    s8 = summarize_statistics(load_city_counts())
    assert (s8.foreign_pct, s8.formal_pct, s8.informal_pct, s8.filtered_pct) == (20.5, 9.9, 69.6, 30.4)


def test_half_up_rounding():
    assert CorpusStatistics.from_counts(1000, 5, 0, 995).foreign_pct == 0.5
    assert CorpusStatistics.from_counts(2000, 1, 0, 1999).foreign_pct == 0.1  # 0.05 -> 0.1


def test_empty_statistics():
    with pytest.raises(EmptyInputError):
        summarize_statistics([])
    with pytest.raises(EmptyInputError):
        CorpusStatistics.from_counts(0, 0, 0, 0)


def test_csv_round_trip():
    rows = load_city_counts()
    buf = io.StringIO()
    write_tabulation_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(TABULATION_COLUMNS)
    assert lines[-1].startswith("TOTAL,,,1326099,271861,")
    back = read_tabulation_csv(io.StringIO(buf.getvalue()))
    assert back == rows
