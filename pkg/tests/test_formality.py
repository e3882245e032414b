import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.linear_model import LogisticRegression

from korpus.exceptions import (
    DimensionMismatchError,
    EmptyDatasetError,
    ModelFormatError,
    SingleLabelDatasetError,
    UnknownLabelError,
)
from korpus.formality import (
    EmbeddingDataset,
    FormalityHead,
    FormalityHeadConfig,
    classify_formality,
    head_forward,
    read_embeddings,
    train_head,
    write_embeddings,
    write_embeddings_jsonl,
)

from conftest import gaussian_clusters


def small_head(d=6, h=5, seed=0, dropout=0.1):
    head = FormalityHead(input_dim=d, hidden_dim=h, dropout_rate=dropout)
    head.init_params(np.random.default_rng(seed))
    rng = np.random.default_rng(seed + 100)
    head.b1_ = rng.normal(scale=0.1, size=h)
    head.W2_ = rng.normal(size=(h, 2))
    head.b2_ = rng.normal(size=2)
    return head


def test_parameter_count():
    assert FormalityHead().n_parameters == 768 * 512 + 512 + 512 * 2 + 2 == 394_754


def test_config_validation():
    with pytest.raises(ValueError):
        FormalityHeadConfig(output_dim=3)
    with pytest.raises(ValueError):
        FormalityHeadConfig(dropout_rate=1.0)


def test_zero_output_layer_is_uniform():
    head = FormalityHead().init_params(np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=768)
    assert np.array_equal(head_forward(head, x), np.array([0.5, 0.5]))
    # an exact tie resolves to Informal
    assert classify_formality(head, x) == ("Informal", 0.5)
    assert head.predict(x[None, :])[0] == "Informal"


def test_eval_mode_is_deterministic():
    head = small_head()
    x = np.random.default_rng(2).normal(size=(4, 6))
    assert np.array_equal(head_forward(head, x), head_forward(head, x))
    a = head_forward(head, x, train_mode=True, seed=5)
    assert np.array_equal(a, head_forward(head, x, train_mode=True, seed=5))


def test_toy_forward_by_hand():
    head = FormalityHead(input_dim=2, hidden_dim=2)
    head.W1_ = np.array([[1.0, -1.0], [2.0, 0.5]])
    head.b1_ = np.array([0.0, -1.0])
    head.W2_ = np.array([[1.0, 0.0], [0.0, 1.0]])
    head.b2_ = np.array([0.0, 0.5])
    head.classes_ = np.array(["Formal", "Informal"])
    # pre = [1*1 + 1*2, -1 + 0.5 - 1] = [3, -1.5]; relu -> [3, 0]; logits [3, 0.5]
    p_formal = 1.0 / (1.0 + math.exp(0.5 - 3.0))
    proba = head_forward(head, np.array([1.0, 1.0]))
    assert proba[0] == pytest.approx(p_formal, abs=1e-12)
    assert classify_formality(head, np.array([1.0, 1.0])) == ("Formal", pytest.approx(p_formal))


def numeric_grad(head, X, y, keep, name, index, eps=1e-6):
    arr = getattr(head, name)
    old = arr[index]
    arr[index] = old + eps
    lp, _ = head.loss_and_gradients(X, y, keep)
    arr[index] = old - eps
    lm, _ = head.loss_and_gradients(X, y, keep)
    arr[index] = old
    return (lp - lm) / (2 * eps)


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


@pytest.mark.parametrize("use_dropout", [False, True])
def test_gradients_match_finite_differences_toy(use_dropout):
    head = small_head(seed=3)
    rng = np.random.default_rng(4)
    X = rng.normal(size=(7, 6))
    y = rng.integers(0, 2, 7)
    keep = rng.random((7, 5)) >= 0.1 if use_dropout else None
    _, grads = head.loss_and_gradients(X, y, keep)
    for name in ("W1_", "b1_", "W2_", "b2_"):
        for index in np.ndindex(getattr(head, name).shape):
            num = numeric_grad(head, X, y, keep, name, index)
            assert rel_err(grads[name][index], num) <= 1e-4 or abs(grads[name][index] - num) < 1e-9


def test_gradients_match_finite_differences_full_size():
    rng = np.random.default_rng(5)
    head = FormalityHead().init_params(rng)
    head.W2_ = rng.normal(scale=0.1, size=(512, 2))
    X = rng.normal(size=(4, 768))
    y = np.array([0, 1, 1, 0])
    _, grads = head.loss_and_gradients(X, y)
    for name in ("W1_", "b1_", "W2_", "b2_"):
        shape = getattr(head, name).shape
        for _ in range(8):
            index = tuple(int(rng.integers(s)) for s in shape)
            num = numeric_grad(head, X, y, None, name, index)
            if abs(num) > 1e-7:
                assert rel_err(grads[name][index], num) <= 1e-4


def test_dropout_preserves_expectation():
    head = small_head(d=6, h=5, dropout=0.1)
    x = np.random.default_rng(6).normal(size=(1, 6))
    clean = head.hidden(x)[0]
    rng = np.random.default_rng(7)
    draws = np.stack([head.hidden(x, train_mode=True, seed=rng)[0] for _ in range(10_000)])
    active = clean > 0
    assert active.any()
    assert np.allclose(draws.mean(axis=0)[active], clean[active], rtol=0.02)
    zero_frac = (draws[:, active] == 0).mean()
    assert zero_frac == pytest.approx(0.1, abs=0.01)


@pytest.fixture(scope="module")
def trained():
    X, y = gaussian_clusters(n=200, seed=0)
    head = FormalityHead(seed=1).fit(X, y)
    return head, X, y


def test_training_separates_clusters(trained):
    head, X, y = trained
    Xte, yte = gaussian_clusters(n=200, seed=9)
    probe = LogisticRegression(max_iter=2000).fit(X, y)
    assert probe.score(Xte, yte) >= 0.99
    assert (head.predict(X) == y).mean() >= 0.99
    # fresh draws near the two centroids carry the cluster label
    rng = np.random.default_rng(9)
    near = rng.normal(scale=0.1, size=(100, 768))
    near[:50, 0] += 3.0
    near[50:, 0] -= 3.0
    assert (head.predict(near) == np.array(["Formal"] * 50 + ["Informal"] * 50)).mean() >= 0.99
    # full-variance draws: 200 points in 768 dims leave the head short of the linear probe
    assert (head.predict(Xte) == yte).mean() >= 0.9
    assert head.loss_curve_[-1] < head.loss_curve_[0]


def test_training_is_reproducible(trained):
    head, X, y = trained
    again = FormalityHead(seed=1).fit(X, y)
    assert np.array_equal(head.W1_, again.W1_) and np.array_equal(head.W2_, again.W2_)


def test_train_head_wrapper():
    X, y = gaussian_clusters(n=64, dim=16, seed=2)
    data = EmbeddingDataset([str(i) for i in range(64)], X, list(y))
    head, trace = train_head(data, FormalityHeadConfig(input_dim=16, hidden_dim=8, epochs=5), seed=3)
    assert len(trace) == 5
    assert head.get_params()["seed"] == 3


def test_degenerate_training_sets():
    X, _ = gaussian_clusters(n=10, dim=4)
    with pytest.raises(SingleLabelDatasetError):
        FormalityHead(input_dim=4, hidden_dim=3).fit(X, ["Formal"] * 10)
    with pytest.raises(EmptyDatasetError):
        FormalityHead(input_dim=4, hidden_dim=3).fit(np.zeros((0, 4)), [])
    with pytest.raises(UnknownLabelError):
        FormalityHead(input_dim=4, hidden_dim=3).fit(X, ["Formal", "Casual"] * 5)
    with pytest.raises(EmptyDatasetError):
        train_head(EmbeddingDataset([], np.zeros((0, 768)), []))


def test_dimension_mismatch():
    head = FormalityHead().init_params(np.random.default_rng(0))
    with pytest.raises(DimensionMismatchError):
        head.predict_proba(np.zeros((2, 767)))
    with pytest.raises(DimensionMismatchError):
        classify_formality(head, np.zeros((2, 768)))
    with pytest.raises(DimensionMismatchError):
        EmbeddingDataset(["a"], np.zeros((1, 10)), [None]).check_dim(768)


def test_clone_round_trip():
    est = FormalityHead(hidden_dim=64, lr=0.1)
    assert clone(est).get_params() == est.get_params()


def test_head_save_load(tmp_path, trained):
    head, X, _ = trained
    path = tmp_path / "head.bin"
    head.save(path)
    loaded = FormalityHead.load(path)
    assert np.array_equal(loaded.predict_proba(X), head.predict_proba(X))
    assert loaded.config == head.config
    path.write_bytes(path.read_bytes()[:100])
    with pytest.raises(ModelFormatError):
        FormalityHead.load(path)


@pytest.mark.parametrize("writer", [write_embeddings, write_embeddings_jsonl])
def test_embedding_files_round_trip(tmp_path, writer):
    rng = np.random.default_rng(8)
    vecs = rng.normal(size=(5, 12)).astype(np.float32).astype(np.float64)
    data = EmbeddingDataset(list("abcde"), vecs, ["Formal", None, "Informal", None, "Formal"])
    path = tmp_path / "emb"
    writer(path, data)
    back = read_embeddings(path)
    assert back.ids == data.ids and back.labels == data.labels
    assert np.array_equal(back.vectors, vecs)
    assert back.labeled().ids == ["a", "c", "e"]
    assert set(back.as_mapping()) == set("abcde")


@pytest.mark.parametrize("writer", [write_embeddings, write_embeddings_jsonl])
def test_empty_embedding_file(tmp_path, writer):
    path = tmp_path / "emb"
    writer(path, EmbeddingDataset([], np.zeros((0, 768)), []))
    assert len(read_embeddings(path)) == 0


def test_truncated_binary_embeddings(tmp_path):
    path = tmp_path / "emb"
    write_embeddings(path, EmbeddingDataset(["a"], np.ones((1, 768)), [None]))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ModelFormatError):
        read_embeddings(path)
