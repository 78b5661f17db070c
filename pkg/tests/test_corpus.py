"""Data model, CSV ingest, query derivation and leave-one-out splitting."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_pois, make_trip, small_corpus_trips
from triprec.corpus import (Corpus, Poi, PoiTable, Query, Trip, Visit, hour_of,
                            ingest_pois, ingest_trips, leave_one_out_splits,
                            load_corpus, query_of, save_corpus)
from triprec.errors import (DataError, IntegrityError, LoopTripError,
                            ParseError, ValidationError)


# ----------------------------------------------------------------- datatypes

def test_poi_validation():
    with pytest.raises(ValidationError):
        Poi("", 0.0, 0.0)
    with pytest.raises(ValidationError):
        Poi("a", 181.0, 0.0)
    with pytest.raises(ValidationError):
        Poi("a", 0.0, -91.0)


def test_poi_table_rejects_duplicates_and_unknown_lookup():
    with pytest.raises(IntegrityError):
        PoiTable([Poi("a", 0, 0), Poi("a", 1, 1)])
    table = make_pois(3)
    with pytest.raises(IntegrityError):
        table["nope"]
    assert "p01" in table
    assert table.ids() == ["p00", "p01", "p02"]


def test_trip_requires_visits_and_reports_length():
    trip = make_trip("t", ["a", "b", "c"])
    assert len(trip) == 3
    assert trip.poi_ids() == ["a", "b", "c"]


def test_query_validation():
    with pytest.raises(ValidationError):
        Query("a", 9, "a", 17, 3)  # loop
    with pytest.raises(ValidationError):
        Query("a", 9, "b", 17, 1)  # too short
    with pytest.raises(ValidationError):
        Query("a", 24, "b", 17, 3)  # bad hour


def test_corpus_rejects_trip_with_unknown_poi():
    pois = make_pois(2)
    trip = make_trip("t", ["p00", "zz", "p01"])
    with pytest.raises(IntegrityError):
        Corpus(pois, (trip,))


# --------------------------------------------------------------------- hours

def test_hour_of_epoch_zero_is_midnight():
    assert hour_of(0) == 0


def test_hour_of_applies_offset_and_wraps():
    ts = 23 * 3600
    assert hour_of(ts) == 23
    assert hour_of(ts, tz_offset_hours=2.0) == 1
    assert hour_of(0, tz_offset_hours=-1.0) == 23


# -------------------------------------------------------------------- ingest

POI_CSV = "poi_id,lon,lat\na,135.50,34.70\nb,135.51,34.71\nc,135.52,34.72\n"


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_ingest_pois_canonical(tmp_path):
    table = ingest_pois(write(tmp_path, "pois.csv", POI_CSV))
    assert table.ids() == ["a", "b", "c"]
    assert table["b"].lon == 135.51


def test_ingest_pois_header_and_field_errors(tmp_path):
    with pytest.raises(ParseError, match="expected header"):
        ingest_pois(write(tmp_path, "bad.csv", "id,x,y\na,0,0\n"))
    with pytest.raises(ParseError, match="non-numeric"):
        ingest_pois(write(tmp_path, "nan.csv", "poi_id,lon,lat\na,east,34\n"))
    with pytest.raises(IntegrityError, match="duplicate"):
        ingest_pois(write(tmp_path, "dup.csv",
                          "poi_id,lon,lat\na,0,0\na,1,1\n"))
    with pytest.raises(ParseError, match="empty file"):
        ingest_pois(write(tmp_path, "empty.csv", ""))


def test_ingest_pois_flickr_layout(tmp_path):
    csv_text = "poiID,poiName,lat,long,theme\n1,Castle,34.7,135.5,Historic\n"
    table = ingest_pois(write(tmp_path, "f.csv", csv_text), flickr_format=True)
    assert table.ids() == ["1"]
    assert table["1"].lat == 34.7
    assert table["1"].lon == 135.5


TRIP_HEADER = "user_id,trip_id,poi_id,timestamp\n"


def trips_csv(rows):
    return TRIP_HEADER + "".join(f"{u},{t},{p},{ts}\n" for u, t, p, ts in rows)


def test_ingest_trips_sorts_and_collapses(tmp_path):
    pois = ingest_pois(write(tmp_path, "pois.csv", POI_CSV))
    rows = [
        ("u1", "t1", "b", 2000),
        ("u1", "t1", "a", 1000),
        ("u1", "t1", "b", 2500),  # consecutive duplicate after sorting
        ("u1", "t1", "c", 3000),
    ]
    trips = ingest_trips(write(tmp_path, "t.csv", trips_csv(rows)), pois)
    assert len(trips) == 1
    assert trips[0].poi_ids() == ["a", "b", "c"]
    assert [v.timestamp for v in trips[0].visits] == [1000, 2000, 3000]


def test_ingest_trips_discards_short_trips(tmp_path):
    pois = ingest_pois(write(tmp_path, "pois.csv", POI_CSV))
    rows = [
        ("u1", "short", "a", 1000),
        ("u1", "short", "b", 2000),
        ("u1", "dup", "a", 1000),
        ("u1", "dup", "a", 2000),  # collapses to one visit
        ("u1", "dup", "b", 3000),
        ("u1", "keep", "a", 1000),
        ("u1", "keep", "b", 2000),
        ("u1", "keep", "c", 3000),
    ]
    trips = ingest_trips(write(tmp_path, "t.csv", trips_csv(rows)), pois)
    assert [t.trip_id for t in trips] == ["keep"]


def test_ingest_trips_output_sorted_by_trip_id(tmp_path):
    pois = ingest_pois(write(tmp_path, "pois.csv", POI_CSV))
    rows = []
    for tid in ("zz", "aa", "mm"):
        rows += [("u", tid, "a", 1000), ("u", tid, "b", 2000), ("u", tid, "c", 3000)]
    trips = ingest_trips(write(tmp_path, "t.csv", trips_csv(rows)), pois)
    assert [t.trip_id for t in trips] == ["aa", "mm", "zz"]


def test_ingest_trips_unknown_poi(tmp_path):
    pois = ingest_pois(write(tmp_path, "pois.csv", POI_CSV))
    rows = [("u", "t", "a", 1), ("u", "t", "nope", 2), ("u", "t", "c", 3)]
    with pytest.raises(IntegrityError, match="unknown POI"):
        ingest_trips(write(tmp_path, "t.csv", trips_csv(rows)), pois)


def test_ingest_trips_timestamps_set_visit_hours(tmp_path):
    pois = ingest_pois(write(tmp_path, "pois.csv", POI_CSV))
    rows = [("u", "t", "a", 10 * 3600), ("u", "t", "b", 11 * 3600),
            ("u", "t", "c", 12 * 3600)]
    trips = ingest_trips(write(tmp_path, "t.csv", trips_csv(rows)), pois,
                         tz_offset_hours=1.0)
    assert [v.hour for v in trips[0].visits] == [11, 12, 13]


def test_ingest_trips_flickr_layout(tmp_path):
    poi_csv = "poiID,poiName,lat,long,theme\n7,Park,34.7,135.5,Park\n8,Zoo,34.71,135.51,Park\n9,Pier,34.72,135.52,Beach\n"
    pois = ingest_pois(write(tmp_path, "p.csv", poi_csv), flickr_format=True)
    visit_csv = (
        "photoID;userID;dateTaken;poiID;poiTheme;poiFreq;seqID\n"
        "101;u9;1000;7;Park;5;s1\n"
        "102;u9;2000;8;Park;5;s1\n"
        "103;u9;3000;9;Beach;5;s1\n"
    )
    trips = ingest_trips(write(tmp_path, "v.csv", visit_csv), pois,
                         flickr_format=True)
    assert len(trips) == 1
    assert trips[0].user_id == "u9"
    assert trips[0].poi_ids() == ["7", "8", "9"]


def test_ingest_trips_flickr_header_error(tmp_path):
    pois = make_pois(2)
    with pytest.raises(ParseError, match="flickr header"):
        ingest_trips(write(tmp_path, "v.csv", "a;b;c\n"), pois, flickr_format=True)


# ------------------------------------------------------ queries and splitting

def test_query_of_reads_endpoints_and_hours():
    trip = make_trip("t", ["a", "b", "c"], start_hour=21)
    q = query_of(trip)
    assert (q.start_poi, q.end_poi, q.n) == ("a", "c", 3)
    assert (q.start_hour, q.end_hour) == (21, 23)


def test_query_of_loop_trip():
    trip = make_trip("t", ["a", "b", "a"])
    with pytest.raises(LoopTripError):
        query_of(trip)


def test_leave_one_out_needs_two_trips():
    corpus = Corpus(make_pois(3), (make_trip("t1", ["p00", "p01", "p02"]),))
    with pytest.raises(DataError):
        list(leave_one_out_splits(corpus))


def test_leave_one_out_covers_every_trip_once():
    corpus = Corpus(make_pois(6), small_corpus_trips())
    splits = list(leave_one_out_splits(corpus))
    assert [s.held_out.trip_id for s in splits] == [t.trip_id for t in corpus.trips]
    for s in splits:
        assert s.skip_reason is None
        assert len(s.train.trips) == len(corpus.trips) - 1
        assert s.held_out.trip_id not in {t.trip_id for t in s.train.trips}


def test_leave_one_out_skips_loops_and_uncovered_endpoints():
    trips = (
        make_trip("loop", ["p00", "p01", "p00"]),
        make_trip("rare", ["p03", "p01", "p02"]),  # p03 appears nowhere else
        make_trip("ok1", ["p00", "p01", "p02"]),
        make_trip("ok2", ["p02", "p01", "p00"]),
    )
    corpus = Corpus(make_pois(4), trips)
    by_id = {s.held_out.trip_id: s for s in leave_one_out_splits(corpus)}
    assert "loop trip" in by_id["loop"].skip_reason
    assert "absent from training trips" in by_id["rare"].skip_reason
    assert by_id["ok1"].skip_reason is None
    # skipped splits still free their trip for others' training sets
    assert "loop" in {t.trip_id for t in by_id["ok1"].train.trips}


# ------------------------------------------------------------- serialization

def test_corpus_round_trip(tmp_path):
    corpus = Corpus(make_pois(6), small_corpus_trips())
    path = str(tmp_path / "corpus.json")
    save_corpus(corpus, path)
    loaded = load_corpus(path)
    assert loaded.pois.ids() == corpus.pois.ids()
    assert loaded.trips == corpus.trips


@settings(max_examples=25, deadline=None)
@given(st.permutations(list(range(6))))
def test_ingest_is_insensitive_to_row_order(tmp_path_factory, order):
    """Distinct timestamps fully determine visit order within each trip."""
    tmp_path = tmp_path_factory.mktemp("rows")
    base = [("u", "t", p, 1000 + 500 * i)
            for i, p in enumerate(["a", "b", "c", "a", "b", "c"])]
    rows = [base[i] for i in order]
    pois = ingest_pois(write(tmp_path, "p.csv", POI_CSV))
    trips = ingest_trips(write(tmp_path, "t.csv", trips_csv(rows)), pois)
    assert trips[0].poi_ids() == ["a", "b", "c", "a", "b", "c"]
