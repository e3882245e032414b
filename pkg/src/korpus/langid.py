"""Hashed character n-gram linear classifier (fastText-style, plain softmax).

Used for foreign-language filtering and reused for region classification.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._container import read_container, write_container
from ._validation import check_labels, check_texts
from .exceptions import (
    EmptyCorpusError,
    LabelSetMismatchError,
    ModelFormatError,
    SingleLabelCorpusError,
)
from .records import FOREIGN_LANGUAGES

MAGIC = "KORPUS-NGLM v1"
BOW, EOW = "⟨", "⟩"


def fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class NgramConfig:
    n_min: int = 2
    n_max: int = 5
    bucket_count: int = 2**18
    embedding_dim: int = 16

    def __post_init__(self):
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ValueError(f"invalid n-gram range {self.n_min}..{self.n_max}")
        b = self.bucket_count
        if b < 1 or b & (b - 1):
            raise ValueError(f"bucket_count must be a power of two, got {b}")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be positive")


def encode_batch(texts: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate boundary-marked UTF-8 documents into one buffer."""
    chunks = [(BOW + t + EOW).encode("utf-8") for t in texts]
    offsets = np.zeros(len(chunks) + 1, dtype=np.int64)
    np.cumsum([len(c) for c in chunks], out=offsets[1:])
    buf = np.frombuffer(b"".join(chunks), dtype=np.uint8)
    return buf, offsets


def extract_char_ngrams(text: str, cfg: NgramConfig = NgramConfig()) -> Counter:
    """Multiset of hashed bucket indices over every n-gram window of ``⟨text⟩``."""
    buf, offsets = encode_batch([text])
    idx, _ = _kernels.ngram_buckets(buf, offsets, cfg.n_min, cfg.n_max,
                                    np.uint64(cfg.bucket_count - 1))
    return Counter(idx.tolist())


def softmax(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    z = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


class NgramClassifier(ClassifierMixin, BaseEstimator):
    """Mean of hashed character n-gram embeddings fed to a linear softmax.

    ``X`` is a sequence of (already normalized) strings. Training is plain
    per-example SGD, single-threaded and bit-reproducible for a given ``seed``.

    Parameters
    ----------
    n_min, n_max : int
        Character n-gram length range, inclusive.
    bucket_count : int
        Number of hash buckets; must be a power of two.
    embedding_dim : int
    epochs : int
    lr : float
        Constant SGD step size.
    seed : int
    class_weight : None or "balanced"
        "balanced" scales each example's gradient by inverse class frequency.
    batch_size : int
        Documents featurized per kernel call at prediction time.
    """

    def __init__(self, n_min=2, n_max=5, bucket_count=2**18, embedding_dim=16,
                 epochs=5, lr=0.5, seed=42, class_weight=None, batch_size=8192):
        self.n_min = n_min
        self.n_max = n_max
        self.bucket_count = bucket_count
        self.embedding_dim = embedding_dim
        self.epochs = epochs
        self.lr = lr
        self.seed = seed
        self.class_weight = class_weight
        self.batch_size = batch_size

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.two_d_array = False
        tags.input_tags.string = True
        return tags

    @property
    def config(self) -> NgramConfig:
        return NgramConfig(self.n_min, self.n_max, self.bucket_count, self.embedding_dim)

    def fit(self, X, y):
        texts = check_texts(X)
        labels = check_labels(y, len(texts))
        if not texts:
            raise EmptyCorpusError("training corpus is empty")
        classes, y_idx = np.unique(labels, return_inverse=True)
        if len(classes) < 2:
            raise SingleLabelCorpusError(f"only one label present: {classes[0]!r}")
        if self.class_weight not in (None, "balanced"):
            raise ValueError(f"class_weight must be None or 'balanced', got {self.class_weight!r}")
        cfg = self.config

        rng = np.random.default_rng(self.seed)
        bound = 1.0 / cfg.embedding_dim
        emb = rng.uniform(-bound, bound, (cfg.bucket_count, cfg.embedding_dim)).astype(np.float32)
        W = np.zeros((cfg.embedding_dim, len(classes)), dtype=np.float32)

        weights = np.ones(len(texts))
        if self.class_weight == "balanced":
            counts = np.bincount(y_idx)
            weights = (len(texts) / (len(classes) * counts))[y_idx]

        buf, offsets = encode_batch(texts)
        idx, doc_off = _kernels.ngram_buckets(buf, offsets, cfg.n_min, cfg.n_max,
                                              np.uint64(cfg.bucket_count - 1))
        y_idx = y_idx.astype(np.int64)
        self.loss_curve_ = []
        for _ in range(self.epochs):
            order = rng.permutation(len(texts)).astype(np.int64)
            total = _kernels.sgd_epoch(idx, doc_off, y_idx, weights, order, emb, W, float(self.lr))
            self.loss_curve_.append(total / len(texts))

        self.classes_ = classes
        self.input_embeddings_ = emb
        self.output_weights_ = W
        return self

    def _hidden(self, texts: Sequence[str]) -> np.ndarray:
        cfg = self.config
        mask = np.uint64(cfg.bucket_count - 1)
        parts = []
        for start in range(0, len(texts), self.batch_size):
            buf, offsets = encode_batch(texts[start : start + self.batch_size])
            parts.append(_kernels.doc_vectors(buf, offsets, cfg.n_min, cfg.n_max,
                                              mask, self.input_embeddings_))
        if not parts:
            return np.zeros((0, cfg.embedding_dim), dtype=np.float32)
        return np.concatenate(parts)

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "output_weights_")
        texts = check_texts(X)
        return self._hidden(texts).astype(np.float64) @ self.output_weights_.astype(np.float64)

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "output_weights_")
        meta = {
            "config": asdict(self.config),
            "labels": [str(c) for c in self.classes_],
            "training": {"epochs": self.epochs, "lr": self.lr, "seed": self.seed,
                         "class_weight": self.class_weight},
        }
        write_container(path, MAGIC, meta, {"input_embeddings": self.input_embeddings_,
                                            "output_weights": self.output_weights_})

    @classmethod
    def load(cls, path: str | Path) -> "NgramClassifier":
        meta, arrays = read_container(path, MAGIC)
        cfg = NgramConfig(**meta["config"])
        training = meta.get("training", {})
        model = cls(cfg.n_min, cfg.n_max, cfg.bucket_count, cfg.embedding_dim, **training)
        emb, W = arrays["input_embeddings"], arrays["output_weights"]
        labels = meta["labels"]
        if emb.shape != (cfg.bucket_count, cfg.embedding_dim) or W.shape != (cfg.embedding_dim, len(labels)):
            raise ModelFormatError(f"{path}: matrix shapes disagree with config")
        model.classes_ = np.array(labels)
        model.input_embeddings_ = np.ascontiguousarray(emb, dtype=np.float32)
        model.output_weights_ = np.ascontiguousarray(W, dtype=np.float32)
        return model


def train_ngram_model(corpus: Iterable[tuple[str, str]], cfg: NgramConfig = NgramConfig(),
                      epochs: int = 5, lr: float = 0.5, seed: int = 42,
                      class_weight=None) -> NgramClassifier:
    pairs = list(corpus)
    texts = [t for t, _ in pairs]
    labels = [lab for _, lab in pairs]
    model = NgramClassifier(cfg.n_min, cfg.n_max, cfg.bucket_count, cfg.embedding_dim,
                            epochs=epochs, lr=lr, seed=seed, class_weight=class_weight)
    return model.fit(texts, labels)


def predict_language(model, text: str) -> tuple[str, np.ndarray]:
    """Argmax label (ties to the lowest index) and the full distribution."""
    proba = model.predict_proba([text])[0]
    return str(model.classes_[int(np.argmax(proba))]), proba


def foreign_mask(model, texts: Sequence[str], threshold: float = 0.5) -> np.ndarray:
    """Boolean mask: argmax is a filtered foreign language with probability >= threshold.

    Works with any classifier exposing ``classes_`` and ``predict_proba``.
    """
    classes = [str(c) for c in model.classes_]
    missing = FOREIGN_LANGUAGES.difference(classes)
    if missing:
        raise LabelSetMismatchError(f"model lacks foreign labels {sorted(missing)}")
    if len(texts) == 0:
        return np.zeros(0, dtype=bool)
    proba = np.asarray(model.predict_proba(texts))
    best = np.argmax(proba, axis=1)
    is_foreign_label = np.array([c in FOREIGN_LANGUAGES for c in classes])
    return is_foreign_label[best] & (proba[np.arange(len(best)), best] >= threshold)


def is_foreign(model, text: str, threshold: float = 0.5) -> bool:
    return bool(foreign_mask(model, [text], threshold)[0])
