"""Lexical distance between locale wordlists.

Two locales agree on a gloss when their variant sets (case-folded, trimmed)
intersect; the distance is the fraction of shared glosses with no agreement.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exceptions import KorpusError, NoSharedGlossesError

BUNDLED_WORDLISTS = ("jambi_malay", "javanese", "balinese", "sasak")


def split_variants(cell: str) -> frozenset[str]:
    return frozenset(v.strip().casefold() for v in cell.split(",") if v.strip())


@dataclass(frozen=True)
class WordList:
    locale: str
    entries: Mapping[str, frozenset[str]]

    def __post_init__(self):
        for gloss, variants in self.entries.items():
            if not variants or any(not v for v in variants):
                raise KorpusError(f"{self.locale}: gloss {gloss!r} has no variants")


def lexical_distance(a: WordList, b: WordList) -> float:
    shared = a.entries.keys() & b.entries.keys()
    if not shared:
        raise NoSharedGlossesError(f"{a.locale!r} and {b.locale!r} share no glosses")
    disjoint = sum(1 for g in shared if a.entries[g].isdisjoint(b.entries[g]))
    return disjoint / len(shared)


@dataclass(frozen=True)
class DistanceMatrix:
    locales: tuple[str, ...]
    values: np.ndarray

    def __getitem__(self, pair: tuple[str, str]) -> float:
        i, j = (self.locales.index(name) for name in pair)
        return float(self.values[i, j])

    def to_csv(self, out) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["locale", *self.locales])
        for name, row in zip(self.locales, self.values):
            writer.writerow([name, *(f"{v:.4f}" for v in row)])


def pairwise_distance_matrix(lists: Sequence[WordList]) -> DistanceMatrix:
    if len(lists) < 2:
        raise KorpusError("need at least two wordlists")
    n = len(lists)
    values = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        values[i, j] = values[j, i] = lexical_distance(lists[i], lists[j])
    return DistanceMatrix(tuple(w.locale for w in lists), values)


def read_wordlists(source) -> list[WordList]:
    """Parse ``gloss,<locale1>,<locale2>,...``; empty cells mean not elicited."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_wordlists(fh)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise KorpusError("wordlist file is empty") from None
    if len(header) < 2 or header[0].strip().lower() != "gloss":
        raise KorpusError("wordlist header must be gloss,<locale>,...")
    locales = [h.strip() for h in header[1:]]
    entries: list[dict] = [{} for _ in locales]
    for row in reader:
        if not row or not row[0].strip():
            continue
        gloss = row[0].strip()
        for k, cell in enumerate(row[1 : len(locales) + 1]):
            variants = split_variants(cell)
            if variants:
                entries[k][gloss] = variants
    return [WordList(loc, ent) for loc, ent in zip(locales, entries)]


def load_bundled(name: str) -> list[WordList]:
    if name not in BUNDLED_WORDLISTS:
        raise KorpusError(f"unknown bundled wordlist {name!r}; choose from {BUNDLED_WORDLISTS}")
    text = resources.files("korpus").joinpath(f"data/wordlists/{name}.csv").read_text("utf-8")
    return read_wordlists(io.StringIO(text))
