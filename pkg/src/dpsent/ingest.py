"""Reading labeled tweet CSVs, text normalization and hashed n-gram embeddings."""

from __future__ import annotations

import csv
import enum
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "Label",
    "Document",
    "CsvSchema",
    "ReadStats",
    "EmbedderConfig",
    "LabeledExample",
    "EmbeddingFormatError",
    "read_csv",
    "preprocess",
    "embed",
    "embed_texts",
    "load_embeddings",
    "save_embeddings",
]

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class Label(enum.IntEnum):
    NEGATIVE = 0
    POSITIVE = 1


class EmbeddingFormatError(ValueError):
    """An embedding file does not follow the ``dim=<d>`` / ``label,v1..vd`` layout."""


@dataclass(frozen=True)
class Document:
    id: int
    label: Label
    raw_text: str


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a labeled CSV. Defaults follow the six-field Sentiment140 files.

    ``label_map`` maps the raw label string to a :class:`Label`, or to ``None``
    for rows that are dropped as neutral.
    """

    label_column: int = 0
    text_column: int = 5
    label_map: dict = field(
        default_factory=lambda: {"0": Label.NEGATIVE, "4": Label.POSITIVE, "2": None}
    )
    delimiter: str = ","
    quotechar: str = '"'
    encoding: str = "utf-8"
    errors: str = "replace"


@dataclass
class ReadStats:
    retained: int = 0
    dropped_neutral: int = 0
    malformed: int = 0

    @property
    def total(self) -> int:
        return self.retained + self.dropped_neutral + self.malformed


def read_csv(
    path: str | Path, schema: CsvSchema | None = None, stats: ReadStats | None = None
) -> Iterator[Document]:
    """Stream the retained rows of a labeled CSV file as :class:`Document` objects.

    The file is opened eagerly, so a missing or unreadable path raises
    ``OSError`` here rather than on first iteration. Row tallies are written
    into ``stats`` as the stream is consumed. Malformed rows (too few
    fields, unknown label) are counted and skipped. Document ids are the
    0-based row number in the file.
    """
    schema = schema or CsvSchema()
    stats = stats if stats is not None else ReadStats()
    fh = open(path, encoding=schema.encoding, errors=schema.errors, newline="")
    return _iter_rows(fh, schema, stats)


def _iter_rows(fh, schema: CsvSchema, stats: ReadStats) -> Iterator[Document]:
    need = max(schema.label_column, schema.text_column) + 1
    with fh:
        reader = csv.reader(fh, delimiter=schema.delimiter, quotechar=schema.quotechar)
        row_no = 0
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error:
                stats.malformed += 1
                row_no += 1
                continue
            idx = row_no
            row_no += 1
            if not row:
                # blank line: csv yields [] for it
                stats.malformed += 1
                continue
            if len(row) < need:
                stats.malformed += 1
                continue
            key = row[schema.label_column].strip()
            if key not in schema.label_map:
                stats.malformed += 1
                continue
            label = schema.label_map[key]
            if label is None:
                stats.dropped_neutral += 1
                continue
            stats.retained += 1
            yield Document(id=idx, label=Label(label), raw_text=row[schema.text_column])


def preprocess(raw_text: str) -> list[str]:
    """Lowercase, blank out everything outside ``[a-z0-9]``, split on whitespace.

    >>> preprocess("Hello, World!!!")
    ['hello', 'world']
    """
    return _TOKEN_RE.findall(raw_text.lower())


@dataclass(frozen=True)
class EmbedderConfig:
    dimension: int = 256
    ngram_orders: tuple[int, ...] = (1, 2)
    hash_seed: int = 0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        orders = tuple(sorted(set(int(o) for o in self.ngram_orders)))
        if not orders or orders[0] < 1:
            raise ValueError(f"ngram_orders must be nonempty and >= 1, got {self.ngram_orders}")
        if not 0 <= self.hash_seed < 2**64:
            raise ValueError("hash_seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "ngram_orders", orders)


def _ngrams(tokens: Sequence[str], orders: Iterable[int]) -> Iterator[str]:
    for n in orders:
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i : i + n])


def embed(tokens: Sequence[str], config: EmbedderConfig) -> np.ndarray:
    """Signed feature hashing of the configured n-gram orders, L2-normalized.

    Each n-gram (tokens joined by a single space) is hashed with keyed
    BLAKE2b-64 using ``hash_seed`` as the key. The hash modulo ``dimension``
    picks the bucket and its top bit picks the sign.
    """
    d = config.dimension
    key = config.hash_seed.to_bytes(8, "little")
    signed = np.zeros(d)
    unsigned = np.zeros(d)
    for gram in _ngrams(tokens, config.ngram_orders):
        h = int.from_bytes(
            hashlib.blake2b(gram.encode(), digest_size=8, key=key).digest(), "little"
        )
        i = h % d
        signed[i] += -1.0 if h >> 63 else 1.0
        unsigned[i] += 1.0
    norm = math.sqrt(float(signed @ signed))
    if norm == 0.0:
        # signs can cancel exactly; unsigned counts keep nonempty input nonzero
        norm = math.sqrt(float(unsigned @ unsigned))
        if norm == 0.0:
            return signed
        signed = unsigned
    return signed / norm


def embed_texts(texts: Iterable[str], config: EmbedderConfig) -> np.ndarray:
    """Preprocess and embed each text; returns an ``(n, d)`` float64 matrix."""
    rows = [embed(preprocess(t), config) for t in texts]
    if not rows:
        return np.zeros((0, config.dimension))
    return np.vstack(rows)


@dataclass(frozen=True)
class LabeledExample:
    embedding: np.ndarray
    label: int

    def __eq__(self, other):
        if not isinstance(other, LabeledExample):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.embedding, other.embedding)

    __hash__ = None


def save_embeddings(path: str | Path, examples: Iterable[LabeledExample], dim: int) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"dim={dim}\n")
        for ex in examples:
            if len(ex.embedding) != dim:
                raise EmbeddingFormatError(f"example has {len(ex.embedding)} values, expected {dim}")
            fh.write(",".join([str(int(ex.label))] + [repr(float(v)) for v in ex.embedding]))
            fh.write("\n")


def load_embeddings(path: str | Path, expected_dim: int) -> Iterator[LabeledExample]:
    """Stream precomputed embeddings written by :func:`save_embeddings`.

    Raises :class:`EmbeddingFormatError` naming the offending record index on
    a dimension mismatch, a bad label or unparseable values.
    """
    fh = open(path, encoding="ascii")
    return _iter_embeddings(fh, expected_dim)


def _iter_embeddings(fh, expected_dim: int) -> Iterator[LabeledExample]:
    with fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise EmbeddingFormatError(f"missing 'dim=<d>' header, got {header!r}")
        try:
            header_dim = int(header[4:])
        except ValueError:
            raise EmbeddingFormatError(f"bad header {header!r}") from None
        for idx, line in enumerate(fh):
            parts = line.strip().split(",")
            if len(parts) - 1 != expected_dim:
                raise EmbeddingFormatError(
                    f"record {idx}: {len(parts) - 1} values, expected {expected_dim}"
                )
            if header_dim != expected_dim:
                raise EmbeddingFormatError(
                    f"record {idx}: header declares dim={header_dim}, expected {expected_dim}"
                )
            try:
                label = int(parts[0])
                values = np.array([float(v) for v in parts[1:]])
            except ValueError:
                raise EmbeddingFormatError(f"record {idx}: unparseable values") from None
            if label not in (0, 1):
                raise EmbeddingFormatError(f"record {idx}: label {label} not in {{0, 1}}")
            if not np.all(np.isfinite(values)):
                raise EmbeddingFormatError(f"record {idx}: non-finite value")
            yield LabeledExample(values, label)
