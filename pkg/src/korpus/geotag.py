"""Nearest-capital geofencing for geotagged records."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import EmptyRegistryError, KorpusError
from .records import GeoPoint

EARTH_RADIUS_KM = 6371.0088
DEFAULT_RADIUS_KM = 50.0
UNASSIGNED = "UNASSIGNED"

# The bundled table lists Banda Aceh with coordinates ~2 km from Medan's anchor.
FLAGGED_ROWS = frozenset({"Banda Aceh"})


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance on a sphere of mean Earth radius."""
    return float(_haversine(a.lat, a.lon, b.lat, b.lon))


def _haversine(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dlat = p2 - p1
    dlon = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dlat / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


@dataclass(frozen=True)
class CityRegion:
    name: str
    anchor: GeoPoint
    radius_km: float = DEFAULT_RADIUS_KM

    def __post_init__(self):
        if not self.name:
            raise ValueError("city name must be non-empty")
        if not self.radius_km > 0:
            raise ValueError(f"radius for {self.name} must be positive")


class CityRegistry(Sequence[CityRegion]):
    """Ordered, name-unique collection of city regions."""

    def __init__(self, regions: Iterable[CityRegion]):
        self._regions = tuple(regions)
        names = [r.name for r in self._regions]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise KorpusError(f"duplicate city names: {sorted(dupes)}")
        self._by_name = {r.name: r for r in self._regions}

    def __getitem__(self, i):
        return self._regions[i]

    def __len__(self):
        return len(self._regions)

    def __contains__(self, name):
        return name in self._by_name

    def get(self, name: str) -> CityRegion | None:
        return self._by_name.get(name)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self._regions]

    @classmethod
    def from_csv(cls, source: str | Path | io.TextIOBase, radius_km: float | None = None) -> "CityRegistry":
        """Load ``name,lat,lon[,radius_km]``; ``radius_km`` overrides every row."""
        if isinstance(source, (str, Path)):
            with open(source, newline="", encoding="utf-8") as fh:
                return cls.from_csv(fh, radius_km)
        regions = []
        for row in csv.DictReader(source):
            r = radius_km
            if r is None:
                r = float(row.get("radius_km") or DEFAULT_RADIUS_KM)
            regions.append(CityRegion(row["name"].strip(),
                                      GeoPoint(float(row["lat"]), float(row["lon"])), r))
        return cls(regions)

    @classmethod
    def bundled(cls, radius_km: float | None = None) -> "CityRegistry":
        """The 33 provincial capitals, coordinates as published with the per-city counts."""
        text = resources.files("korpus").joinpath("data/cities.csv").read_text("utf-8")
        return cls.from_csv(io.StringIO(text), radius_km)


def assign_city(p: GeoPoint, registry: CityRegistry) -> str | None:
    """Nearest anchor within its radius, ties to the smallest name, else None."""
    if len(registry) == 0:
        raise EmptyRegistryError("city registry is empty")
    best = None
    for region in sorted(registry, key=lambda r: r.name):
        d = haversine_km(p, region.anchor)
        if best is None or d < best[0]:
            best = (d, region)
    d, region = best
    return region.name if d <= region.radius_km else None


class CityAssigner(TransformerMixin, BaseEstimator):
    """Vectorized :func:`assign_city` over an ``(n, 2)`` array of lat/lon.

    ``transform`` returns an object array of city names, ``None`` where the
    point falls outside every fence (or is NaN).
    """

    def __init__(self, registry: CityRegistry | None = None, radius_km: float | None = None):
        self.registry = registry
        self.radius_km = radius_km

    def fit(self, X=None, y=None):
        registry = self.registry if self.registry is not None else CityRegistry.bundled()
        if len(registry) == 0:
            raise EmptyRegistryError("city registry is empty")
        ordered = sorted(registry, key=lambda r: r.name)
        self.names_ = np.array([r.name for r in ordered], dtype=object)
        self.anchors_ = np.array([[r.anchor.lat, r.anchor.lon] for r in ordered])
        if self.radius_km is not None:
            self.radii_ = np.full(len(ordered), float(self.radius_km))
        else:
            self.radii_ = np.array([r.radius_km for r in ordered])
        return self

    def distances(self, X) -> np.ndarray:
        check_is_fitted(self, "anchors_")
        X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan")
        if X.shape[1] != 2:
            raise ValueError(f"expected (n, 2) lat/lon array, got {X.shape}")
        return _haversine(X[:, :1], X[:, 1:2], self.anchors_[:, 0], self.anchors_[:, 1])

    def transform(self, X) -> np.ndarray:
        out = np.full(len(X), None, dtype=object)
        if len(X) == 0:
            return out
        d = self.distances(X)
        valid = ~np.isnan(d).any(axis=1)
        best = np.argmin(np.where(np.isnan(d), np.inf, d), axis=1)
        rows = np.arange(len(best))
        inside = valid & (d[rows, best] <= self.radii_[best])
        out[inside] = self.names_[best[inside]]
        return out
