"""Check-in ingestion: POIs, trips, derived queries and leave-one-out splits.

Canonical CSV schemas:
    pois.csv   poi_id,lon,lat
    trips.csv  user_id,trip_id,poi_id,timestamp

The public Flickr photo-visit layout (semicolon separated,
photoID;userID;dateTaken;poiID;poiTheme;poiFreq;seqID) is supported through
``flickr_format=True`` with seqID -> trip_id and dateTaken -> timestamp.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Iterator

from .errors import (
    DataError,
    IntegrityError,
    LoopTripError,
    ParseError,
    ValidationError,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Poi:
    id: str
    lon: float
    lat: float

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("POI id must be non-empty")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"POI {self.id}: lon {self.lon} outside [-180, 180]")
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"POI {self.id}: lat {self.lat} outside [-90, 90]")


class PoiTable:
    """Immutable id -> Poi mapping; insertion order preserved."""

    def __init__(self, pois: list[Poi] | tuple[Poi, ...] = ()):
        table: dict[str, Poi] = {}
        for poi in pois:
            if poi.id in table:
                raise IntegrityError(f"duplicate POI id {poi.id!r}")
            table[poi.id] = poi
        self._table = table

    def __contains__(self, poi_id: str) -> bool:
        return poi_id in self._table

    def __getitem__(self, poi_id: str) -> Poi:
        try:
            return self._table[poi_id]
        except KeyError:
            raise IntegrityError(f"unknown POI id {poi_id!r}") from None

    def __len__(self) -> int:
        return len(self._table)

    def __iter__(self) -> Iterator[Poi]:
        return iter(self._table.values())

    def ids(self) -> list[str]:
        return list(self._table)


@dataclass(frozen=True)
class Visit:
    poi_id: str
    timestamp: int
    hour: int

    def __post_init__(self) -> None:
        if not 0 <= self.hour <= 23:
            raise ValidationError(f"visit hour {self.hour} outside [0, 23]")


@dataclass(frozen=True)
class Trip:
    trip_id: str
    user_id: str
    visits: tuple[Visit, ...]

    def __post_init__(self) -> None:
        for a, b in zip(self.visits, self.visits[1:]):
            if b.timestamp < a.timestamp:
                raise ValidationError(f"trip {self.trip_id}: visits not time-ordered")

    def poi_ids(self) -> list[str]:
        return [v.poi_id for v in self.visits]

    def __len__(self) -> int:
        return len(self.visits)


@dataclass(frozen=True)
class Query:
    """Travel demand: start/end POI, start/end hour, number of POIs to visit."""

    start_poi: str
    start_hour: int
    end_poi: str
    end_hour: int
    n: int

    def __post_init__(self) -> None:
        if self.start_poi == self.end_poi:
            raise ValidationError("query start and end POI must differ")
        if self.n < 2:
            raise ValidationError(f"query n {self.n} must be >= 2")
        for name, hour in (("start_hour", self.start_hour), ("end_hour", self.end_hour)):
            if not 0 <= hour <= 23:
                raise ValidationError(f"query {name} {hour} outside [0, 23]")


@dataclass(frozen=True)
class Corpus:
    pois: PoiTable
    trips: tuple[Trip, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for trip in self.trips:
            if trip.trip_id in seen:
                raise IntegrityError(f"duplicate trip id {trip.trip_id!r}")
            seen.add(trip.trip_id)
            for visit in trip.visits:
                if visit.poi_id not in self.pois:
                    raise IntegrityError(
                        f"trip {trip.trip_id}: unknown POI {visit.poi_id!r}"
                    )


@dataclass(frozen=True)
class LooSplit:
    """One leave-one-out split; ``skip_reason`` is None for eligible trips."""

    held_out: Trip
    train: Corpus | None
    skip_reason: str | None = field(default=None)


_POI_HEADER = ["poi_id", "lon", "lat"]
_TRIP_HEADER = ["user_id", "trip_id", "poi_id", "timestamp"]
_FLICKR_VISIT_HEADER = [
    "photoID", "userID", "dateTaken", "poiID", "poiTheme", "poiFreq", "seqID",
]


def _strip_quotes(cell: str) -> str:
    return cell.strip().strip('"')


def ingest_pois(csv_path: str, flickr_format: bool = False) -> PoiTable:
    """Read a POI table from CSV.

    Canonical header is poi_id,lon,lat. With ``flickr_format`` the public
    POI file layout (poiID,poiName,lat,long,theme) is accepted instead.
    """
    pois: list[Poi] = []
    seen: set[str] = set()
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [_strip_quotes(c) for c in next(reader)]
        except StopIteration:
            raise ParseError(f"{csv_path}: empty file, expected header row") from None
        if flickr_format:
            idx = _flickr_poi_columns(header, csv_path)
        else:
            if header != _POI_HEADER:
                raise ParseError(
                    f"{csv_path}:1: expected header {','.join(_POI_HEADER)},"
                    f" got {','.join(header)}"
                )
            idx = (0, 1, 2)
        id_col, lon_col, lat_col = idx
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) <= max(idx):
                raise ParseError(f"{csv_path}:{lineno}: expected {max(idx) + 1}+ fields")
            poi_id = _strip_quotes(row[id_col])
            try:
                lon = float(row[lon_col])
                lat = float(row[lat_col])
            except ValueError:
                raise ParseError(
                    f"{csv_path}:{lineno}: non-numeric coordinate in {row!r}"
                ) from None
            if poi_id in seen:
                raise IntegrityError(f"{csv_path}:{lineno}: duplicate POI id {poi_id!r}")
            seen.add(poi_id)
            try:
                pois.append(Poi(poi_id, lon, lat))
            except ValidationError as exc:
                raise ValidationError(f"{csv_path}:{lineno}: {exc}") from None
    return PoiTable(pois)


def _flickr_poi_columns(header: list[str], path: str) -> tuple[int, int, int]:
    lowered = [h.lower() for h in header]
    try:
        return lowered.index("poiid"), lowered.index("long"), lowered.index("lat")
    except ValueError:
        raise ParseError(
            f"{path}:1: flickr POI header must contain poiID, lat, long;"
            f" got {','.join(header)}"
        ) from None


def hour_of(timestamp: int, tz_offset_hours: float = 0.0) -> int:
    """Calendar hour of an epoch timestamp under a fixed utc offset."""
    return int((timestamp + tz_offset_hours * 3600.0) // 3600) % 24


def ingest_trips(
    csv_path: str,
    pois: PoiTable,
    tz_offset_hours: float = 0.0,
    flickr_format: bool = False,
) -> list[Trip]:
    """Read trips from CSV, validate against ``pois`` and normalize.

    Per trip the visits are sorted by timestamp (stable on ties), consecutive
    duplicate POIs are collapsed, and trips shorter than 3 POIs afterwards are
    discarded. Output is sorted by trip_id.
    """
    rows = _read_visit_rows(csv_path, flickr_format)
    if not rows:
        log.warning("%s: no visit rows, returning empty trip list", csv_path)
        return []
    grouped: dict[str, list[tuple[str, str, int]]] = {}
    for user_id, trip_id, poi_id, ts in rows:
        if poi_id not in pois:
            raise IntegrityError(f"{csv_path}: trip {trip_id}: unknown POI {poi_id!r}")
        grouped.setdefault(trip_id, []).append((user_id, poi_id, ts))
    trips: list[Trip] = []
    for trip_id in sorted(grouped):
        entries = grouped[trip_id]
        user_id = entries[0][0]
        entries.sort(key=lambda e: e[2])
        visits: list[Visit] = []
        for _, poi_id, ts in entries:
            if visits and visits[-1].poi_id == poi_id:
                continue  # repeated check-ins at one POI are not transitions
            visits.append(Visit(poi_id, ts, hour_of(ts, tz_offset_hours)))
        if len(visits) < 3:
            continue
        trips.append(Trip(trip_id, user_id, tuple(visits)))
    return trips


def _read_visit_rows(csv_path: str, flickr_format: bool) -> list[tuple[str, str, str, int]]:
    delimiter = ";" if flickr_format else ","
    rows: list[tuple[str, str, str, int]] = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [_strip_quotes(c) for c in next(reader)]
        except StopIteration:
            raise ParseError(f"{csv_path}: empty file, expected header row") from None
        if flickr_format:
            if [h.lower() for h in header] != [h.lower() for h in _FLICKR_VISIT_HEADER]:
                raise ParseError(
                    f"{csv_path}:1: expected flickr header"
                    f" {';'.join(_FLICKR_VISIT_HEADER)}, got {';'.join(header)}"
                )
            user_col, ts_col, poi_col, trip_col = 1, 2, 3, 6
        else:
            if header != _TRIP_HEADER:
                raise ParseError(
                    f"{csv_path}:1: expected header {','.join(_TRIP_HEADER)},"
                    f" got {','.join(header)}"
                )
            user_col, trip_col, poi_col, ts_col = 0, 1, 2, 3
        n_fields = max(user_col, ts_col, poi_col, trip_col) + 1
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < n_fields:
                raise ParseError(f"{csv_path}:{lineno}: expected {n_fields} fields")
            try:
                ts = int(float(row[ts_col]))
            except ValueError:
                raise ParseError(
                    f"{csv_path}:{lineno}: non-numeric timestamp {row[ts_col]!r}"
                ) from None
            rows.append(
                (_strip_quotes(row[user_col]), _strip_quotes(row[trip_col]),
                 _strip_quotes(row[poi_col]), ts)
            )
    return rows


def query_of(trip: Trip) -> Query:
    """Derive the travel-demand query a trip answers."""
    first, last = trip.visits[0], trip.visits[-1]
    if first.poi_id == last.poi_id:
        raise LoopTripError(f"trip {trip.trip_id}: start POI equals end POI")
    return Query(first.poi_id, first.hour, last.poi_id, last.hour, len(trip.visits))


def leave_one_out_splits(corpus: Corpus) -> Iterator[LooSplit]:
    """Yield one split per trip; ineligible trips carry a skip reason.

    A trip is eligible when it is not a loop (distinct endpoints) and both of
    its endpoint POIs are visited by at least one training trip. Eligible
    splits have ``skip_reason`` None and a train corpus that excludes exactly
    the held-out trip.
    """
    if len(corpus.trips) < 2:
        raise DataError(f"leave-one-out needs >= 2 trips, got {len(corpus.trips)}")
    for held_out in corpus.trips:
        rest = tuple(t for t in corpus.trips if t.trip_id != held_out.trip_id)
        reason = _skip_reason(held_out, rest)
        if reason is not None:
            yield LooSplit(held_out, None, reason)
            continue
        yield LooSplit(held_out, Corpus(corpus.pois, rest), None)


def _skip_reason(held_out: Trip, train_trips: tuple[Trip, ...]) -> str | None:
    start, end = held_out.visits[0].poi_id, held_out.visits[-1].poi_id
    if start == end:
        return "loop trip: start POI equals end POI"
    covered = {v.poi_id for t in train_trips for v in t.visits}
    if start not in covered:
        return f"start POI {start} absent from training trips"
    if end not in covered:
        return f"end POI {end} absent from training trips"
    return None


def save_corpus(corpus: Corpus, path: str) -> None:
    doc = {
        "pois": [{"id": p.id, "lon": p.lon, "lat": p.lat} for p in corpus.pois],
        "trips": [
            {
                "trip_id": t.trip_id,
                "user_id": t.user_id,
                "visits": [
                    {"poi_id": v.poi_id, "timestamp": v.timestamp, "hour": v.hour}
                    for v in t.visits
                ],
            }
            for t in corpus.trips
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_corpus(path: str) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    pois = PoiTable([Poi(p["id"], p["lon"], p["lat"]) for p in doc["pois"]])
    trips = tuple(
        Trip(
            t["trip_id"],
            t["user_id"],
            tuple(Visit(v["poi_id"], v["timestamp"], v["hour"]) for v in t["visits"]),
        )
        for t in doc["trips"]
    )
    return Corpus(pois, trips)
