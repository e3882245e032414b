"""Two-layer MLP head over precomputed sentence embeddings (formal vs informal).

Architecture: Linear(768, 512) -> ReLU -> Dropout(0.1) -> Linear(512, 2) -> softmax,
trained with mini-batch SGD on mean cross-entropy.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._container import read_container, write_container
from ._validation import check_embeddings
from .exceptions import (
    DimensionMismatchError,
    EmptyDatasetError,
    ModelFormatError,
    SingleLabelDatasetError,
    UnknownLabelError,
)
from .langid import softmax

HEAD_MAGIC = "KORPUS-HEAD v1"
EMB_MAGIC = b"KORPUS-EMB v1\n"
FORMAL, INFORMAL = "Formal", "Informal"
CLASSES = (FORMAL, INFORMAL)


@dataclass(frozen=True)
class FormalityHeadConfig:
    input_dim: int = 768
    hidden_dim: int = 512
    output_dim: int = 2
    dropout_rate: float = 0.1
    epochs: int = 50
    activation: str = "relu"

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.output_dim) < 1:
            raise ValueError("layer dimensions must be positive")
        if self.output_dim != len(CLASSES):
            raise ValueError("the head is a two-class classifier")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.activation != "relu":
            raise ValueError("only ReLU is supported")


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class FormalityHead(ClassifierMixin, BaseEstimator):
    """MLP classification head. ``X`` is an ``(n, input_dim)`` embedding array.

    Fitted attributes: ``W1_`` (input_dim x hidden), ``b1_``, ``W2_``
    (hidden x 2), ``b2_``, ``classes_`` and the per-epoch ``loss_curve_``.
    """

    def __init__(self, input_dim=768, hidden_dim=512, dropout_rate=0.1, epochs=50,
                 batch_size=32, lr=0.05, seed=42):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.dropout_rate = dropout_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.seed = seed

    @property
    def config(self) -> FormalityHeadConfig:
        return FormalityHeadConfig(self.input_dim, self.hidden_dim, 2, self.dropout_rate, self.epochs)

    @classmethod
    def from_config(cls, cfg: FormalityHeadConfig, **kwargs) -> "FormalityHead":
        return cls(cfg.input_dim, cfg.hidden_dim, cfg.dropout_rate, cfg.epochs, **kwargs)

    @property
    def n_parameters(self) -> int:
        h, d = self.hidden_dim, self.input_dim
        return d * h + h + h * 2 + 2

    def init_params(self, rng) -> "FormalityHead":
        """He-uniform first layer, zero biases and zero output layer."""
        cfg = self.config
        bound = np.sqrt(6.0 / cfg.input_dim)
        self.W1_ = rng.uniform(-bound, bound, (cfg.input_dim, cfg.hidden_dim))
        self.b1_ = np.zeros(cfg.hidden_dim)
        self.W2_ = np.zeros((cfg.hidden_dim, 2))
        self.b2_ = np.zeros(2)
        self.classes_ = np.array(CLASSES)
        return self

    def _pre_activation(self, X):
        return X @ self.W1_ + self.b1_

    def hidden(self, X, train_mode=False, seed=None) -> np.ndarray:
        """Post-ReLU (and, in train mode, post-dropout) hidden layer."""
        check_is_fitted(self, "W1_")
        X = check_embeddings(X, self.input_dim)
        h = np.maximum(self._pre_activation(X), 0.0)
        if train_mode and self.dropout_rate > 0:
            keep = _as_rng(seed).random(h.shape) >= self.dropout_rate
            h = h * keep / (1.0 - self.dropout_rate)
        return h

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.hidden(X) @ self.W2_ + self.b2_)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        # exact 0.5/0.5 ties resolve to Informal
        return np.where(proba[:, 0] > proba[:, 1], FORMAL, INFORMAL)

    def loss_and_gradients(self, X, y_idx, keep=None) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy and its analytic gradients.

        ``keep`` is an optional boolean dropout mask over the hidden layer;
        ``None`` disables dropout.
        """
        n = X.shape[0]
        pre = self._pre_activation(X)
        h = np.maximum(pre, 0.0)
        if keep is not None:
            h = h * keep / (1.0 - self.dropout_rate)
        proba = softmax(h @ self.W2_ + self.b2_)
        rows = np.arange(n)
        loss = float(-np.mean(np.log(np.maximum(proba[rows, y_idx], 1e-300))))
        dlogits = proba.copy()
        dlogits[rows, y_idx] -= 1.0
        dlogits /= n
        dh = dlogits @ self.W2_.T
        if keep is not None:
            dh = dh * keep / (1.0 - self.dropout_rate)
        dpre = dh * (pre > 0)
        grads = {
            "W1_": X.T @ dpre,
            "b1_": dpre.sum(axis=0),
            "W2_": h.T @ dlogits,
            "b2_": dlogits.sum(axis=0),
        }
        return loss, grads

    def fit(self, X, y):
        X = check_embeddings(X, self.input_dim)
        y_idx = encode_formality_labels(y, len(X))
        if len(X) == 0:
            raise EmptyDatasetError("no training embeddings")
        if len(np.unique(y_idx)) < 2:
            raise SingleLabelDatasetError("both Formal and Informal examples are required")
        rng = np.random.default_rng(self.seed)
        self.init_params(rng)
        self.loss_curve_ = []
        for _ in range(self.epochs):
            order = rng.permutation(len(X))
            total = 0.0
            for start in range(0, len(X), self.batch_size):
                batch = order[start : start + self.batch_size]
                keep = None
                if self.dropout_rate > 0:
                    keep = rng.random((len(batch), self.hidden_dim)) >= self.dropout_rate
                loss, grads = self.loss_and_gradients(X[batch], y_idx[batch], keep)
                total += loss * len(batch)
                for name, g in grads.items():
                    getattr(self, name).__isub__(self.lr * g)
            self.loss_curve_.append(total / len(X))
        return self

    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "W1_")
        meta = {"config": asdict(self.config),
                "training": {"batch_size": self.batch_size, "lr": self.lr, "seed": self.seed}}
        write_container(path, HEAD_MAGIC, meta,
                        {"W1": self.W1_, "b1": self.b1_, "W2": self.W2_, "b2": self.b2_}, dtype="<f8")

    @classmethod
    def load(cls, path: str | Path) -> "FormalityHead":
        meta, arrays = read_container(path, HEAD_MAGIC)
        cfg = FormalityHeadConfig(**meta["config"])
        head = cls.from_config(cfg, **meta.get("training", {}))
        expected = {"W1": (cfg.input_dim, cfg.hidden_dim), "b1": (cfg.hidden_dim,),
                    "W2": (cfg.hidden_dim, 2), "b2": (2,)}
        for name, shape in expected.items():
            if arrays[name].shape != shape:
                raise ModelFormatError(f"{path}: {name} has shape {arrays[name].shape}, expected {shape}")
            setattr(head, name + "_", np.array(arrays[name], dtype=np.float64))
        head.classes_ = np.array(CLASSES)
        return head


def encode_formality_labels(y, n: int) -> np.ndarray:
    labels = list(y)
    if len(labels) != n:
        raise ValueError(f"got {len(labels)} labels for {n} samples")
    lookup = {FORMAL: 0, INFORMAL: 1}
    try:
        return np.array([lookup[str(lab)] for lab in labels], dtype=np.int64)
    except KeyError as exc:
        raise UnknownLabelError(f"formality label must be Formal or Informal, got {exc.args[0]!r}") from None


def head_forward(head: FormalityHead, x, train_mode: bool = False, seed=None) -> np.ndarray:
    """Class probabilities for one vector (shape (2,)) or a batch (shape (n, 2))."""
    single = np.ndim(x) == 1
    h = head.hidden(x, train_mode=train_mode, seed=seed)
    proba = softmax(h @ head.W2_ + head.b2_)
    return proba[0] if single else proba


def train_head(data: "EmbeddingDataset", cfg: FormalityHeadConfig = FormalityHeadConfig(),
               lr: float = 0.05, seed: int = 42, batch_size: int = 32) -> tuple[FormalityHead, list[float]]:
    if len(data) == 0:
        raise EmptyDatasetError("no training embeddings")
    head = FormalityHead.from_config(cfg, batch_size=batch_size, lr=lr, seed=seed)
    head.fit(data.vectors, data.labels)
    return head, list(head.loss_curve_)


def classify_formality(head: FormalityHead, x) -> tuple[str, float]:
    """Label and its probability for one embedding vector."""
    if np.ndim(x) != 1:
        raise DimensionMismatchError("classify_formality takes a single vector")
    proba = head_forward(head, x)
    if proba[0] > proba[1]:
        return FORMAL, float(proba[0])
    return INFORMAL, float(proba[1])


# -- embedding files --------------------------------------------------------

@dataclass
class EmbeddingDataset:
    ids: list[str]
    vectors: np.ndarray
    labels: list[str | None]

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            vectors = vectors.reshape(len(self.ids), -1 if len(self.ids) else 0)
        self.vectors = vectors
        if not (len(self.ids) == len(self.vectors) == len(self.labels)):
            raise ValueError("ids, vectors and labels must have equal length")

    def __len__(self):
        return len(self.ids)

    def check_dim(self, dim: int = 768) -> "EmbeddingDataset":
        if len(self) and self.vectors.shape[1] != dim:
            raise DimensionMismatchError(f"embeddings have dim {self.vectors.shape[1]}, expected {dim}")
        return self

    def labeled(self) -> "EmbeddingDataset":
        keep = [i for i, lab in enumerate(self.labels) if lab is not None]
        return EmbeddingDataset([self.ids[i] for i in keep], self.vectors[keep],
                                [self.labels[i] for i in keep])

    def as_mapping(self) -> dict[str, np.ndarray]:
        return dict(zip(self.ids, self.vectors))


def _ids_path(path: Path) -> Path:
    return path.with_name(path.name + ".ids")


def write_embeddings(path: str | Path, data: EmbeddingDataset) -> None:
    """Binary ``KORPUS-EMB v1``: count (u64), dim (u32), LE float32 rows.

    Ids go to a ``<path>.ids`` sidecar, one per line, ``id<TAB>label`` when labeled.
    """
    path = Path(path)
    dim = data.vectors.shape[1] if len(data) else 768
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<QI", len(data), dim))
        fh.write(np.ascontiguousarray(data.vectors, dtype="<f4").tobytes())
    with open(_ids_path(path), "w", encoding="utf-8") as fh:
        for rid, lab in zip(data.ids, data.labels):
            fh.write(rid if lab is None else f"{rid}\t{lab}")
            fh.write("\n")


def write_embeddings_jsonl(path: str | Path, data: EmbeddingDataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rid, vec, lab in zip(data.ids, data.vectors, data.labels):
            obj = {"id": rid, "vector": [float(v) for v in vec]}
            if lab is not None:
                obj["label"] = lab
            fh.write(json.dumps(obj) + "\n")


def read_embeddings(path: str | Path) -> EmbeddingDataset:
    """Read either embedding format, sniffed from the magic header."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(EMB_MAGIC))
    if head == EMB_MAGIC:
        return _read_binary(path)
    return _read_jsonl(path)


def _read_binary(path: Path) -> EmbeddingDataset:
    data = path.read_bytes()
    pos = len(EMB_MAGIC)
    try:
        count, dim = struct.unpack_from("<QI", data, pos)
    except struct.error:
        raise ModelFormatError(f"{path}: truncated header") from None
    pos += struct.calcsize("<QI")
    if len(data) - pos != count * dim * 4:
        raise ModelFormatError(f"{path}: expected {count}x{dim} float32 payload")
    vectors = np.frombuffer(data, dtype="<f4", offset=pos).reshape(count, dim).astype(np.float64)
    ids, labels = [], []
    with open(_ids_path(path), encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            rid, _, lab = line.partition("\t")
            ids.append(rid)
            labels.append(lab or None)
    if len(ids) != count:
        raise ModelFormatError(f"{path}: sidecar lists {len(ids)} ids for {count} vectors")
    return EmbeddingDataset(ids, vectors, labels)


def _read_jsonl(path: Path) -> EmbeddingDataset:
    ids, vectors, labels = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ids.append(str(obj["id"]))
                vectors.append(np.asarray(obj["vector"], dtype=np.float64))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ModelFormatError(f"{path}:{lineno}: bad embedding line ({exc})") from None
            labels.append(obj.get("label"))
    dims = {len(v) for v in vectors}
    if len(dims) > 1:
        raise DimensionMismatchError(f"{path}: mixed vector lengths {sorted(dims)}")
    return EmbeddingDataset(ids, np.array(vectors).reshape(len(ids), -1) if ids else np.zeros((0, 768)), labels)
