"""JSON Lines ingestion with per-line fault isolation."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .exceptions import (
    GeoOutOfRangeError,
    IngestError,
    InvalidFieldError,
    MalformedJsonError,
    MissingFieldError,
)
from .records import GeoPoint, TweetRecord, parse_timestamp


@dataclass
class IngestReport:
    lines_read: int = 0
    records_ok: int = 0
    records_rejected: int = 0
    rejection_reasons: Counter = field(default_factory=Counter)

    def reject(self, reason: str) -> None:
        self.records_rejected += 1
        self.rejection_reasons[reason] += 1

    def to_dict(self) -> dict:
        return {
            "lines_read": self.lines_read,
            "records_ok": self.records_ok,
            "records_rejected": self.records_rejected,
            "rejection_reasons": dict(sorted(self.rejection_reasons.items())),
        }


def _coordinate(obj: dict, key: str) -> float | None:
    value = obj.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidFieldError(f"{key} is not a number: {value!r}")
    return float(value)


def parse_tweet_line(line: str) -> TweetRecord:
    """Parse one serialized record.

    Raises an :class:`~korpus.exceptions.IngestError` subclass whose
    ``reason`` names the rejection.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedJsonError(str(exc)) from None
    if not isinstance(obj, dict):
        raise MalformedJsonError("line is not a JSON object")

    rid = obj.get("id")
    if isinstance(rid, int) and not isinstance(rid, bool):
        rid = str(rid)
    if not isinstance(rid, str) or not rid:
        raise MissingFieldError("id")
    text = obj.get("text")
    if not isinstance(text, str):
        raise MissingFieldError("text")

    lat, lon = _coordinate(obj, "lat"), _coordinate(obj, "lon")
    geo = None
    if lat is not None and lon is not None:
        if not (math.isfinite(lat) and math.isfinite(lon)
                and -90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise GeoOutOfRangeError(f"({lat}, {lon})")
        geo = GeoPoint(lat, lon)

    city = obj.get("city")
    if city is not None and (not isinstance(city, str) or geo is None):
        raise InvalidFieldError("city requires a string value and coordinates")

    return TweetRecord(rid, text, parse_timestamp(obj.get("created_at")), geo, city)


def iter_records(lines: Iterable[str | bytes], report: IngestReport | None = None) -> Iterator[TweetRecord]:
    report = report if report is not None else IngestReport()
    for line in lines:
        if not line.strip():
            continue
        report.lines_read += 1
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError:
                report.reject(MalformedJsonError.reason)
                continue
        try:
            record = parse_tweet_line(line)
        except IngestError as exc:
            report.reject(exc.reason)
            continue
        report.records_ok += 1
        yield record


def ingest_file(path: str | Path, report: IngestReport | None = None) -> Iterator[TweetRecord]:
    """Stream records from a JSONL file in file order.

    The file is opened eagerly so an unreadable path raises ``OSError`` here,
    not on first iteration. Blank lines are skipped without being counted.
    """
    fh = open(path, "rb")

    def _gen():
        with fh:
            yield from iter_records(fh, report)

    return _gen()


def dump_record(record: TweetRecord, **extra) -> str:
    d = record.to_dict()
    d.update(extra)
    return json.dumps(d, ensure_ascii=False)
