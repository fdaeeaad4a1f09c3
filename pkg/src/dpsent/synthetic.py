"""Deterministic synthetic data: a tweet-like corpus and separable point clouds."""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

from .ingest import Document, Label
from .model import Dataset

__all__ = ["vocabulary", "generate_corpus", "write_corpus_csv", "bundled_corpus_path", "separable_clusters"]

BUNDLED_SIZE = 20_000
BUNDLED_SEED = 140

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh", "tr", "pl"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]
_DECOR = ["", "", "", "!", "!!", "?", ".", "...", " :)", " :(", " #tbt", " lol"]


def vocabulary(size: int = 1000, seed: int = 0) -> list[str]:
    """``size`` distinct pronounceable pseudo-words, 2-3 syllables each."""
    rng = np.random.default_rng(seed)
    words: list[str] = []
    seen = set()
    while len(words) < size:
        n_syl = 2 + int(rng.integers(2))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(n_syl))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def generate_corpus(
    n: int,
    seed: int = BUNDLED_SEED,
    vocab_size: int = 300,
    centers: tuple[float, float] = (0.25, 0.75),
    spread: float = 0.09,
    length: tuple[int, int] = (6, 20),
) -> list[Document]:
    """Tweets from two Gaussian token-frequency regimes over a shared vocabulary.

    A negative tweet draws word ranks from a normal centred at
    ``centers[0] * vocab_size``, a positive one from ``centers[1]``; both
    have standard deviation ``spread * vocab_size``. Labels alternate in a
    seeded shuffle so the classes are balanced. Mentions, casing and
    punctuation are sprinkled in for the normalizer to strip.
    """
    rng = np.random.default_rng(seed)
    vocab = vocabulary(vocab_size, seed)
    labels = np.array([i % 2 for i in range(n)])
    rng.shuffle(labels)
    docs = []
    for i, lab in enumerate(labels):
        m = int(rng.integers(length[0], length[1] + 1))
        ranks = rng.normal(centers[lab] * vocab_size, spread * vocab_size, size=m)
        ranks = np.clip(np.rint(ranks), 0, vocab_size - 1).astype(int)
        words = [vocab[r] for r in ranks]
        if rng.random() < 0.3:
            words.insert(0, f"@user{int(rng.integers(1000))}")
        if rng.random() < 0.2:
            j = int(rng.integers(len(words)))
            words[j] = words[j].upper()
        text = " ".join(words) + _DECOR[rng.integers(len(_DECOR))]
        docs.append(Document(id=i, label=Label(int(lab)), raw_text=text))
    return docs


def write_corpus_csv(docs, path: str | Path) -> None:
    """Six quoted fields in Sentiment140 order: polarity, id, date, query, user, text."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_ALL, lineterminator="\n")
        for doc in docs:
            polarity = "4" if doc.label == Label.POSITIVE else "0"
            writer.writerow([polarity, str(1_000_000 + doc.id), "Mon Apr 06 22:19:45 PDT 2009",
                             "NO_QUERY", f"user{doc.id % 997}", doc.raw_text])


def bundled_corpus_path() -> Path:
    return Path(str(resources.files("dpsent") / "data" / "synthetic_20k.csv"))


def separable_clusters(n: int, dim: int, seed: int = 0, separation: float = 1.0, noise: float = 0.25) -> Dataset:
    """Two Gaussian blobs at ``+/- separation/2`` along a random unit direction.

    Points whose margin would fall below ``separation/4`` are pushed out so
    the set is linearly separable through the origin by construction.
    """
    rng = np.random.default_rng(seed)
    u = rng.normal(size=dim)
    u /= np.linalg.norm(u)
    y = rng.permutation(np.arange(n) % 2).astype(np.float64)
    sign = 2.0 * y - 1.0
    X = rng.normal(scale=noise, size=(n, dim))
    along = X @ u
    X -= np.outer(along, u)
    along = sign * np.maximum(separation / 2 + along * sign, separation / 4)
    X += np.outer(along, u)
    return Dataset(X, y)
