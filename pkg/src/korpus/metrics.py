"""Confusion matrices, per-class precision/recall/F1, and stratified splitting."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

import numpy as np
from sklearn import metrics as skm

from .exceptions import BadFractionsError, ClassTooSmallError, EmptyMatrixError, UnknownLabelError


def round_half_up(x: float, places: int = 2) -> float:
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP))


def f1_from(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true labels, columns predicted labels."""

    labels: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (len(self.labels), len(self.labels)):
            raise ValueError(f"counts shape {counts.shape} does not match {len(self.labels)} labels")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def is_diagonal(self) -> bool:
        return not np.any(self.counts - np.diag(np.diag(self.counts)))

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "counts": self.counts.tolist()}


def confusion_matrix(pairs: Iterable[tuple[str, str]], labels: Sequence[str]) -> ConfusionMatrix:
    pairs = list(pairs)
    known = set(labels)
    for t, p in pairs:
        if t not in known or p not in known:
            raise UnknownLabelError(f"pair ({t!r}, {p!r}) uses a label outside {list(labels)}")
    y_true = [t for t, _ in pairs]
    y_pred = [p for _, p in pairs]
    counts = skm.confusion_matrix(y_true, y_pred, labels=list(labels))
    return ConfusionMatrix(tuple(labels), counts)


@dataclass(frozen=True)
class ClassMetrics:
    labels: tuple[str, ...]
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    support: dict[str, int]
    accuracy: float

    def to_dict(self, places: int | None = 2) -> dict:
        r = (lambda x: round_half_up(x, places)) if places is not None else float
        out = {lab: {"precision": r(self.precision[lab]), "recall": r(self.recall[lab]),
                     "f1": r(self.f1[lab]), "support": self.support[lab]}
               for lab in self.labels}
        out["accuracy"] = r(self.accuracy)
        return out

    def render_table(self) -> str:
        """Precision, Recall, F1-Score blocks (one column per label), then Accuracy."""
        groups = [("Precision", self.precision), ("Recall", self.recall), ("F1-Score", self.f1)]
        head1 = [""] + [g for g, _ in groups for _ in self.labels] + ["Accuracy"]
        head2 = [""] + [lab for _ in groups for lab in self.labels] + [""]
        row = ["model"] + [f"{round_half_up(d[lab]):.2f}" for _, d in groups for lab in self.labels]
        row.append(f"{round_half_up(self.accuracy):.2f}")
        widths = [max(len(a), len(b), len(c)) for a, b, c in zip(head1, head2, row)]
        return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(line, widths)).rstrip()
                         for line in (head1, head2, row))


def compute_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    counts = cm.counts
    total = cm.total
    if total == 0:
        raise EmptyMatrixError("confusion matrix has no entries")
    diag = np.diag(counts).astype(float)
    col = counts.sum(axis=0).astype(float)
    row = counts.sum(axis=1).astype(float)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    labels = cm.labels
    return ClassMetrics(
        labels=labels,
        precision=dict(zip(labels, precision.tolist())),
        recall=dict(zip(labels, recall.tolist())),
        f1={lab: f1_from(p, r) for lab, p, r in zip(labels, precision, recall)},
        support=dict(zip(labels, row.astype(int).tolist())),
        accuracy=float(diag.sum() / total),
    )


def stratified_split(items: Sequence, labels: Sequence, fractions=(0.70, 0.15, 0.15),
                     seed: int = 42) -> tuple[list, list, list]:
    """Per-class seeded shuffle, cut into (train, test, validation).

    Each class gets ``floor(fraction * size)`` items per part; leftover items
    go to the largest fraction first (train, by default).
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractionsError(f"fractions must be three non-negative values summing to 1, got {fractions}")
    if len(items) != len(labels):
        raise ValueError("items and labels differ in length")
    by_class: dict = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(i)
    small = {lab: len(ix) for lab, ix in by_class.items() if len(ix) < 3}
    if small:
        raise ClassTooSmallError(f"classes with fewer than 3 items: {small}")

    rng = np.random.default_rng(seed)
    priority = sorted(range(3), key=lambda k: (-fractions[k], k))
    parts: list[list[int]] = [[], [], []]
    for lab in sorted(by_class, key=str):
        ix = np.array(by_class[lab])
        rng.shuffle(ix)
        sizes = [int(np.floor(f * len(ix))) for f in fractions]
        for k in priority[: len(ix) - sum(sizes)]:
            sizes[k] += 1
        start = 0
        for k, size in enumerate(sizes):
            parts[k].extend(ix[start : start + size].tolist())
            start += size
    return tuple([items[i] for i in sorted(part)] for part in parts)
