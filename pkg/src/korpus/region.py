"""Region-of-origin classification for informal tweets, supervised by geotags."""

from __future__ import annotations

from collections import Counter
from typing import Iterable

import numpy as np

from ._validation import check_labels, check_texts
from .exceptions import InsufficientCitiesError, KorpusError, NonInformalInputError
from .geotag import CityRegistry
from .langid import NgramClassifier, NgramConfig
from .metrics import ConfusionMatrix, confusion_matrix
from .records import CascadeLabel, TweetRecord


class RegionClassifier(NgramClassifier):
    """:class:`NgramClassifier` whose labels are city names."""

    def fit(self, X, y):
        texts = check_texts(X)
        cities = check_labels(y, len(texts))
        if len(set(cities.tolist())) < 2:
            raise InsufficientCitiesError("region training needs at least two distinct cities")
        return super().fit(texts, cities)


def class_balance(cities: Iterable[str]) -> dict[str, int]:
    """Per-city example counts, largest first. Reported, never rebalanced."""
    return dict(Counter(cities).most_common())


def train_region_model(labeled: Iterable[tuple[TweetRecord, CascadeLabel]],
                       cfg: NgramConfig = NgramConfig(), epochs: int = 5, lr: float = 0.5,
                       seed: int = 42, class_weight=None,
                       registry: CityRegistry | None = None) -> RegionClassifier:
    texts, cities = [], []
    for record, label in labeled:
        if CascadeLabel(label) is not CascadeLabel.INFORMAL:
            raise NonInformalInputError(f"record {record.id} is labeled {label}, expected Informal")
        if record.city is None:
            raise KorpusError(f"record {record.id} has no city")
        if registry is not None and record.city not in registry:
            raise KorpusError(f"record {record.id}: city {record.city!r} is not in the registry")
        texts.append(record.text_norm)
        cities.append(record.city)
    model = RegionClassifier(cfg.n_min, cfg.n_max, cfg.bucket_count, cfg.embedding_dim,
                             epochs=epochs, lr=lr, seed=seed, class_weight=class_weight)
    return model.fit(texts, cities)


def predict_region(model: NgramClassifier, text: str) -> tuple[str, np.ndarray]:
    proba = model.predict_proba([text])[0]
    return str(model.classes_[int(np.argmax(proba))]), proba


def confusion_by_city(model: NgramClassifier, records: Iterable[TweetRecord]) -> ConfusionMatrix:
    """Rows are true cities (model labels first, then unseen ones), columns predicted."""
    records = [r for r in records]
    if any(r.city is None for r in records):
        raise KorpusError("every evaluation record needs a city")
    preds = model.predict([r.text_norm for r in records]) if records else []
    labels = [str(c) for c in model.classes_]
    labels += sorted({r.city for r in records} - set(labels))
    return confusion_matrix(zip([r.city for r in records], [str(p) for p in preds]), labels)
