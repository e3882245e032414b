"""Domain types shared by every pipeline stage, and tweet text normalization."""

from __future__ import annotations

import enum
import math
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, timezone

LOCAL_LANGUAGES = frozenset(
    {"ind", "jav", "sun", "mad", "min", "bug", "bew", "ace", "bjn", "ban", "mus"}
)
FOREIGN_LANGUAGES = frozenset({"eng", "jpn", "kor", "ara"})
LANGUAGE_CODES = LOCAL_LANGUAGES | FOREIGN_LANGUAGES | {"other"}

URL_TOKEN = "HTTPURL"
USER_TOKEN = "@USER"

# Mentions take priority over the sentinels so "@USERname" still collapses to
# @USER; sentinels are kept verbatim (never lowercased) for idempotence.
_SPECIAL = re.compile(
    r"(?P<url>(?:https?://|www\.)\S+)|(?P<user>@\w+)|(?P<sentinel>HTTPURL)",
    re.IGNORECASE,
)


def normalize_text(raw: str) -> str:
    """Canonicalize tweet text for n-gram featurization.

    NFC composition, lowercasing, URLs to ``HTTPURL``, mentions to ``@USER``,
    whitespace collapsed and stripped. The substitution tokens are exempt from
    lowercasing.

    >>> normalize_text("cek https://t.co/abc @budi dong")
    'cek HTTPURL @USER dong'
    """
    text = unicodedata.normalize("NFC", raw)
    out = []
    pos = 0
    for m in _SPECIAL.finditer(text):
        out.append(text[pos : m.start()].lower())
        if m.group("url") is not None:
            out.append(URL_TOKEN)
        elif m.group("user") is not None:
            out.append(USER_TOKEN)
        elif m.group("sentinel") == URL_TOKEN:
            out.append(URL_TOKEN)
        else:
            out.append(m.group("sentinel").lower())
        pos = m.end()
    out.append(text[pos:].lower())
    text = unicodedata.normalize("NFC", "".join(out))
    return " ".join(text.split())


class CascadeLabel(str, enum.Enum):
    FOREIGN = "Foreign"
    FORMAL = "FormalIndonesian"
    INFORMAL = "Informal"

    def __str__(self) -> str:
        return self.value


def check_language_code(code: str) -> str:
    if code not in LANGUAGE_CODES:
        raise ValueError(f"unknown language code {code!r}")
    return code


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"non-finite coordinates ({self.lat}, {self.lon})")
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise ValueError(f"coordinates out of range ({lat}, {lon})")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True)
class TweetRecord:
    """One ingested post. ``text_norm`` is derived, never passed in."""

    id: str
    text_raw: str
    created_at: datetime | None = None
    geo: GeoPoint | None = None
    city: str | None = None
    text_norm: str = field(init=False)

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("record id must be a non-empty string")
        if self.city is not None and self.geo is None:
            raise ValueError("city can only be set on geotagged records")
        object.__setattr__(self, "text_norm", normalize_text(self.text_raw))

    def with_city(self, city: str | None) -> "TweetRecord":
        return TweetRecord(self.id, self.text_raw, self.created_at, self.geo, city)

    def to_dict(self) -> dict:
        """Canonical serialized form; re-parsing it yields an equal record."""
        d = {"id": self.id, "text": self.text_raw}
        if self.created_at is not None:
            d["created_at"] = format_timestamp(self.created_at)
        if self.geo is not None:
            d["lat"] = self.geo.lat
            d["lon"] = self.geo.lon
        if self.city is not None:
            d["city"] = self.city
        return d


def parse_timestamp(value) -> datetime | None:
    """ISO-8601 to aware UTC datetime; anything unparseable becomes None."""
    if not isinstance(value, str):
        return None
    s = value.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        return None
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")
