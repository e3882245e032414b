"""Foreign -> formal -> informal filtering cascade, per-city tabulation and statistics."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from itertools import islice
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .exceptions import EmptyInputError, KorpusError
from .formality import FORMAL
from .geotag import UNASSIGNED, CityRegistry
from .langid import foreign_mask
from .records import CascadeLabel, TweetRecord

log = logging.getLogger(__name__)

TABULATION_COLUMNS = ("city", "lat", "lon", "raw", "foreign", "indonesian", "formal", "colloquial_local")
TOTAL_ROW = "TOTAL"

# Corpus totals as printed in the data-statistics table.
REPORTED_TOTALS = {"raw": 1_326_099, "foreign": 271_861, "formal": 131_843, "colloquial_local": 922_755}
REPORTED_PCTS = {"foreign_pct": 20.5, "formal_pct": 9.9, "informal_pct": 69.6}


@dataclass
class CascadeReport:
    counts: Counter = field(default_factory=Counter)
    quarantined: int = 0

    def to_dict(self) -> dict:
        out = {label.value: self.counts[label] for label in CascadeLabel}
        out["quarantined"] = self.quarantined
        return out


def _label_batch(batch, langid_model, formality_head, embedding_source, threshold):
    """Labels for one batch; ``None`` marks a quarantined record."""
    labels: list[CascadeLabel | None] = [CascadeLabel.FOREIGN] * len(batch)
    if langid_model is None:
        foreign = np.zeros(len(batch), dtype=bool)
    else:
        foreign = foreign_mask(langid_model, [r.text_norm for r in batch], threshold)
    survivors, vectors = [], []
    for i in np.flatnonzero(~foreign):
        vec = embedding_source.get(batch[i].id)
        if vec is None:
            labels[i] = None
        else:
            survivors.append(i)
            vectors.append(vec)
    if survivors:
        preds = formality_head.predict(np.asarray(vectors, dtype=np.float64))
        for i, pred in zip(survivors, preds):
            labels[i] = CascadeLabel.FORMAL if pred == FORMAL else CascadeLabel.INFORMAL
    return labels


def _batches(records: Iterable[TweetRecord], size: int) -> Iterator[list[TweetRecord]]:
    it = iter(records)
    while batch := list(islice(it, size)):
        yield batch


def run_cascade(records: Iterable[TweetRecord], langid_model, formality_head,
                embedding_source: Mapping[str, np.ndarray], *, threshold: float = 0.5,
                batch_size: int = 4096, n_jobs: int = 1, quarantine: list | None = None,
                report: CascadeReport | None = None) -> Iterator[tuple[TweetRecord, CascadeLabel]]:
    """Label every record Foreign, FormalIndonesian or Informal, in input order.

    ``langid_model`` needs ``classes_`` and ``predict_proba`` over texts
    (``None`` skips the foreign stage);
    ``formality_head`` needs ``predict`` over an embedding matrix returning
    "Formal"/"Informal". Records that pass the foreign filter but have no
    entry in ``embedding_source`` are appended to ``quarantine`` instead of
    being labeled. With ``n_jobs > 1`` batches are labeled on a thread pool;
    output order is unchanged.
    """
    if n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    report = report if report is not None else CascadeReport()

    def label(batch):
        return batch, _label_batch(batch, langid_model, formality_head, embedding_source, threshold)

    def emit(batch, labels):
        for record, lab in zip(batch, labels):
            if lab is None:
                report.quarantined += 1
                if quarantine is not None:
                    quarantine.append(record)
                continue
            report.counts[lab] += 1
            yield record, lab

    if n_jobs == 1:
        for batch in _batches(records, batch_size):
            yield from emit(*label(batch))
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            pending: deque = deque()
            for batch in _batches(records, batch_size):
                pending.append(pool.submit(label, batch))
                if len(pending) >= 2 * n_jobs:
                    yield from emit(*pending.popleft().result())
            while pending:
                yield from emit(*pending.popleft().result())
    if report.quarantined:
        log.warning("%d records quarantined for missing embeddings", report.quarantined)


# -- tabulation -------------------------------------------------------------

@dataclass
class CityTabulation:
    city: str
    raw: int = 0
    foreign: int = 0
    indonesian: int = 0
    formal: int = 0
    colloquial_local: int = 0
    lat: float | None = None
    lon: float | None = None

    def violations(self) -> list[str]:
        problems = []
        if min(self.raw, self.foreign, self.indonesian, self.formal, self.colloquial_local) < 0:
            problems.append(f"{self.city}: negative count")
        if self.raw != self.foreign + self.indonesian:
            problems.append(f"{self.city}: raw {self.raw} != foreign {self.foreign} + indonesian {self.indonesian}")
        if self.indonesian != self.formal + self.colloquial_local:
            problems.append(f"{self.city}: indonesian {self.indonesian} != formal {self.formal}"
                            f" + colloquial_local {self.colloquial_local}")
        return problems

    def add(self, label: CascadeLabel) -> None:
        self.raw += 1
        if label is CascadeLabel.FOREIGN:
            self.foreign += 1
            return
        self.indonesian += 1
        if label is CascadeLabel.FORMAL:
            self.formal += 1
        else:
            self.colloquial_local += 1


def check_tabulation(rows: Iterable[CityTabulation]) -> list[str]:
    return [p for row in rows for p in row.violations()]


def tabulate_by_city(labeled: Iterable[tuple[TweetRecord, CascadeLabel]],
                     registry: CityRegistry | None = None) -> list[CityTabulation]:
    """One row per observed city (alphabetical, UNASSIGNED last)."""
    return tabulate_counts(((rec.city, lab) for rec, lab in labeled), registry)


def tabulate_counts(city_labels: Iterable[tuple[str | None, CascadeLabel | str]],
                    registry: CityRegistry | None = None) -> list[CityTabulation]:
    registry = registry if registry is not None else CityRegistry.bundled()
    rows: dict[str, CityTabulation] = {}
    for city, label in city_labels:
        key = city or UNASSIGNED
        row = rows.get(key)
        if row is None:
            row = rows[key] = CityTabulation(key)
            region = registry.get(key)
            if region is not None:
                row.lat, row.lon = region.anchor.lat, region.anchor.lon
        row.add(CascadeLabel(label))
    return sorted(rows.values(), key=lambda r: (r.city == UNASSIGNED, r.city))


def total_row(rows: Sequence[CityTabulation]) -> CityTabulation:
    total = CityTabulation(TOTAL_ROW)
    for r in rows:
        total.raw += r.raw
        total.foreign += r.foreign
        total.indonesian += r.indonesian
        total.formal += r.formal
        total.colloquial_local += r.colloquial_local
    return total


def compare_totals(rows: Sequence[CityTabulation], reported: Mapping[str, int] = REPORTED_TOTALS) -> dict:
    """``{column: (summed, reported)}`` for every column that disagrees."""
    total = total_row(rows)
    return {k: (getattr(total, k), v) for k, v in reported.items() if getattr(total, k) != v}


def write_tabulation_csv(rows: Sequence[CityTabulation], out, with_total: bool = True) -> None:
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            return write_tabulation_csv(rows, fh, with_total)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TABULATION_COLUMNS)
    for r in list(rows) + ([total_row(rows)] if with_total else []):
        writer.writerow([r.city, "" if r.lat is None else r.lat, "" if r.lon is None else r.lon,
                         r.raw, r.foreign, r.indonesian, r.formal, r.colloquial_local])


def read_tabulation_csv(source) -> list[CityTabulation]:
    """Read a tabulation CSV; a TOTAL row, if present, is skipped."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_tabulation_csv(fh)
    reader = csv.DictReader(source)
    missing = set(TABULATION_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise KorpusError(f"tabulation CSV lacks columns {sorted(missing)}")
    rows = []
    for rec in reader:
        if rec["city"] == TOTAL_ROW:
            continue
        try:
            rows.append(CityTabulation(
                rec["city"], *(int(rec[k]) for k in TABULATION_COLUMNS[3:]),
                lat=float(rec["lat"]) if rec["lat"] else None,
                lon=float(rec["lon"]) if rec["lon"] else None))
        except ValueError as exc:
            raise KorpusError(f"bad tabulation row {rec['city']!r}: {exc}") from None
    return rows


def load_city_counts() -> list[CityTabulation]:
    """Bundled per-city tabulation, 33 rows as printed."""
    text = resources.files("korpus").joinpath("data/city_counts.csv").read_text("utf-8")
    return read_tabulation_csv(io.StringIO(text))


# -- statistics -------------------------------------------------------------

def _pct(part: int, total: int) -> float:
    exact = Decimal(100 * part) / Decimal(total)
    return float(exact.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class CorpusStatistics:
    total: int
    foreign: int
    formal: int
    informal: int
    foreign_pct: float
    formal_pct: float
    informal_pct: float
    filtered_pct: float

    @classmethod
    def from_counts(cls, total: int, foreign: int, formal: int, informal: int) -> "CorpusStatistics":
        """Percentages of ``total``, rounded half-up to one decimal.

        The parts are not required to sum to ``total``: printed corpus tables
        may disagree with themselves and the percentages are still defined.
        """
        if total <= 0:
            raise EmptyInputError("statistics need a positive total")
        f, fo, inf = _pct(foreign, total), _pct(formal, total), _pct(informal, total)
        return cls(total, foreign, formal, informal, f, fo, inf, round(f + fo, 1))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def summarize_statistics(tabulations: Sequence[CityTabulation]) -> CorpusStatistics:
    if not tabulations:
        raise EmptyInputError("no tabulation rows")
    t = total_row(tabulations)
    return CorpusStatistics.from_counts(t.raw, t.foreign, t.formal, t.colloquial_local)
