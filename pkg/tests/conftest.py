from __future__ import annotations

import numpy as np
import pytest

# Five disjoint character inventories.
ALPHABETS = {
    "ara": "ابتثجحخدذرزسشصض",
    "eng": "abcdefghijklmno",
    "jpn": "あいうえおかきくけこさしすせそ",
    "kor": "가나다라마바사아자차카타파하거",
    "ind": "абвгдежзийклмно",
}


def synthetic_sentences(alphabet: str, n: int, rng: np.random.Generator) -> list[str]:
    chars = list(alphabet)
    out = []
    for _ in range(n):
        words = ["".join(rng.choice(chars, rng.integers(2, 8))) for _ in range(rng.integers(3, 10))]
        out.append(" ".join(words))
    return out


def disjoint_corpus(n_per_class=200, seed=0, labels=tuple(ALPHABETS)):
    """Shuffled (texts, labels) with one disjoint alphabet per label."""
    rng = np.random.default_rng(seed)
    texts, y = [], []
    for lab in labels:
        texts += synthetic_sentences(ALPHABETS[lab], n_per_class, rng)
        y += [lab] * n_per_class
    order = rng.permutation(len(texts))
    return [texts[i] for i in order], [y[i] for i in order]


def gaussian_clusters(n=200, dim=768, seed=0, offset=3.0):
    """Two unit-variance clusters centered at +/- offset on axis 0."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim))
    y = np.array(["Formal"] * (n // 2) + ["Informal"] * (n - n // 2))
    X[y == "Formal", 0] += offset
    X[y == "Informal", 0] -= offset
    return X, y


class StubLangid:
    """Foreign iff the text starts with 'en:'; exposes the sklearn surface."""

    classes_ = np.array(["ara", "eng", "ind", "jpn", "kor"])

    def __init__(self):
        self.seen = []

    def predict_proba(self, texts):
        self.seen.extend(texts)
        out = np.zeros((len(texts), len(self.classes_)))
        for i, t in enumerate(texts):
            out[i, 1 if t.startswith("en:") else 2] = 1.0
        return out


class StubHead:
    """Formal iff the first embedding component is positive; records each call."""

    def __init__(self):
        self.calls = 0
        self.rows = 0

    def predict(self, X):
        X = np.asarray(X)
        self.calls += 1
        self.rows += len(X)
        return np.where(X[:, 0] > 0, "Formal", "Informal")


@pytest.fixture
def stub_langid():
    return StubLangid()


@pytest.fixture
def stub_head():
    return StubHead()


@pytest.fixture(scope="session")
def separable_corpus():
    return disjoint_corpus()


# (number, title, passed, seconds, detail) for each acceptance criterion run
ACCEPTANCE_RESULTS: list[tuple[int, str, bool, float, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, ok, secs, detail in sorted(ACCEPTANCE_RESULTS):
        line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title} ({secs:.2f} s)"
        terminalreporter.write_line(line + (f" -- {detail}" if detail else ""))
