import hashlib
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsent.ingest import (
    CsvSchema,
    EmbedderConfig,
    EmbeddingFormatError,
    Label,
    LabeledExample,
    ReadStats,
    embed,
    embed_texts,
    load_embeddings,
    preprocess,
    read_csv,
    save_embeddings,
)

# Frozen output of reference_embed(["good", "movie"], d=8, orders {1, 2}, seed 42).
GOOD_MOVIE_D8_SEED42 = [-1 / math.sqrt(3), 0.0, 0.0, 0.0, 0.0, -1 / math.sqrt(3), -1 / math.sqrt(3), 0.0]


def reference_embed(tokens, d, orders, seed):
    """Scalar re-implementation of the hashing pipeline, used as an oracle."""
    v = [0.0] * d
    for n in sorted(set(orders)):
        for i in range(len(tokens) - n + 1):
            gram = " ".join(tokens[i : i + n])
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")).digest()
            x = int.from_bytes(digest, "little")
            v[x % d] += -1.0 if x >= 2**63 else 1.0
    norm = math.sqrt(sum(a * a for a in v))
    return [a / norm for a in v] if norm else v


def write(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# read_csv

def test_read_negative_row(tmp_path):
    p = write(tmp_path, '"0","1","Mon","NO_QUERY","bob","bad day"\n')
    stats = ReadStats()
    docs = list(read_csv(p, stats=stats))
    assert len(docs) == 1
    assert docs[0].label == Label.NEGATIVE
    assert docs[0].raw_text == "bad day"
    assert (stats.retained, stats.dropped_neutral, stats.malformed) == (1, 0, 0)


def test_read_neutral_dropped(tmp_path):
    p = write(tmp_path, '"2","1","Mon","NO_QUERY","bob","meh"\n"4","2","Mon","NO_QUERY","amy","yay"\n')
    stats = ReadStats()
    docs = list(read_csv(p, stats=stats))
    assert [d.label for d in docs] == [Label.POSITIVE]
    assert stats.dropped_neutral == 1
    assert docs[0].id == 1


def test_read_empty_file(tmp_path):
    stats = ReadStats()
    assert list(read_csv(write(tmp_path, ""), stats=stats)) == []
    assert stats.total == 0


def test_read_malformed_rows_counted_not_fatal(tmp_path):
    text = (
        '"0","1","Mon","NO_QUERY","bob","ok"\n'
        '"0","short"\n'
        '"7","1","Mon","NO_QUERY","bob","unknown label"\n'
        "\n"
        '"4","1","Mon","NO_QUERY","bob","fine"\n'
    )
    stats = ReadStats()
    docs = list(read_csv(write(tmp_path, text), stats=stats))
    assert [d.raw_text for d in docs] == ["ok", "fine"]
    assert stats.malformed == 3
    assert stats.retained == 2


def test_read_missing_file_raises_immediately(tmp_path):
    with pytest.raises(OSError):
        read_csv(tmp_path / "nope.csv")


def test_read_custom_schema(tmp_path):
    schema = CsvSchema(label_column=1, text_column=0, label_map={"neg": Label.NEGATIVE, "pos": Label.POSITIVE},
                       delimiter=";")
    docs = list(read_csv(write(tmp_path, "nice one;pos\nawful;neg\n"), schema))
    assert [(d.label, d.raw_text) for d in docs] == [(Label.POSITIVE, "nice one"), (Label.NEGATIVE, "awful")]


def test_read_undecodable_bytes_replaced(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_bytes(b'"0","1","d","q","u","caf\xe9 time"\n')
    docs = list(read_csv(p))
    assert docs[0].raw_text.startswith("caf")


# preprocess

@pytest.mark.parametrize(
    "raw, tokens",
    [
        ("Hello, World!!!", ["hello", "world"]),
        ("", []),
        ("@user :) I LOVE it 100%", ["user", "i", "love", "it", "100"]),
        ("  tabs\tand\nnewlines  ", ["tabs", "and", "newlines"]),
        ("naïve café", ["na", "ve", "caf"]),
    ],
)
def test_preprocess_examples(raw, tokens):
    assert preprocess(raw) == tokens


@given(st.text())
def test_preprocess_tokens_are_ascii_alnum(raw):
    toks = preprocess(raw)
    assert all(t and all(c in "abcdefghijklmnopqrstuvwxyz0123456789" for c in t) for t in toks)
    assert preprocess(" ".join(toks)) == toks


# embed

def test_embed_golden_vector():
    cfg = EmbedderConfig(dimension=8, ngram_orders=(1, 2), hash_seed=42)
    got = embed(["good", "movie"], cfg)
    assert got.tolist() == pytest.approx(reference_embed(["good", "movie"], 8, (1, 2), 42), abs=1e-15)
    assert got.tolist() == pytest.approx(GOOD_MOVIE_D8_SEED42, abs=1e-15)
    assert np.linalg.norm(got) == pytest.approx(1.0, abs=1e-15)


def test_embed_empty_is_zero():
    v = embed([], EmbedderConfig(dimension=16))
    assert v.shape == (16,) and not v.any()


def test_embed_deterministic():
    cfg = EmbedderConfig(dimension=32, hash_seed=7)
    assert np.array_equal(embed(["good"], cfg), embed(["good"], cfg))


def test_embed_seed_changes_vector():
    toks = "the quick brown fox jumps".split()
    a = embed(toks, EmbedderConfig(dimension=64, hash_seed=1))
    b = embed(toks, EmbedderConfig(dimension=64, hash_seed=2))
    assert not np.array_equal(a, b)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.from_regex(r"[a-z0-9]{1,6}", fullmatch=True), max_size=12),
    st.integers(1, 40),
    st.sets(st.integers(1, 3), min_size=1),
    st.integers(0, 2**64 - 1),
)
def test_embed_matches_reference_and_is_unit(tokens, d, orders, seed):
    cfg = EmbedderConfig(dimension=d, ngram_orders=tuple(orders), hash_seed=seed)
    got = embed(tokens, cfg)
    assert got.shape == (d,)
    assert np.all(np.isfinite(got))
    has_grams = len(tokens) >= min(orders)
    if not has_grams:
        assert not got.any()
        return
    assert np.linalg.norm(got) == pytest.approx(1.0, abs=1e-12)
    ref = reference_embed(tokens, d, orders, seed)
    if any(ref):
        assert got.tolist() == pytest.approx(ref, abs=1e-12)


def test_embed_sign_cancellation_falls_back_to_counts():
    # find two unigrams sharing a bucket with opposite signs
    cfg = EmbedderConfig(dimension=1, ngram_orders=(1,), hash_seed=0)
    words = [f"w{i}" for i in range(64)]
    signs = {w: reference_embed([w], 1, (1,), 0)[0] for w in words}
    pos = next(w for w in words if signs[w] > 0)
    neg = next(w for w in words if signs[w] < 0)
    v = embed([pos, neg], cfg)
    assert v.tolist() == [1.0]


def test_embedder_config_validation():
    with pytest.raises(ValueError):
        EmbedderConfig(dimension=0)
    with pytest.raises(ValueError):
        EmbedderConfig(ngram_orders=())
    with pytest.raises(ValueError):
        EmbedderConfig(ngram_orders=(0, 1))
    assert EmbedderConfig(ngram_orders=(2, 1, 2)).ngram_orders == (1, 2)


def test_embed_texts_shape():
    X = embed_texts(["a b", "", "c"], EmbedderConfig(dimension=4))
    assert X.shape == (3, 4)
    assert not X[1].any()


# embedding files

def test_load_single_zero_record(tmp_path):
    p = write(tmp_path, "dim=4\n1,0.0,0.0,0.0,0.0\n", "e.txt")
    out = list(load_embeddings(p, 4))
    assert out == [LabeledExample(np.zeros(4), 1)]


def test_load_dimension_mismatch_names_record(tmp_path):
    p = write(tmp_path, "dim=8\n" + "0," + ",".join(["0.5"] * 8) + "\n", "e.txt")
    with pytest.raises(EmbeddingFormatError, match="record 0"):
        list(load_embeddings(p, 4))


def test_load_mismatch_later_record(tmp_path):
    p = write(tmp_path, "dim=2\n0,1.0,2.0\n1,1.0\n", "e.txt")
    it = load_embeddings(p, 2)
    assert next(it).label == 0
    with pytest.raises(EmbeddingFormatError, match="record 1"):
        next(it)


@pytest.mark.parametrize("body", ["2,0.1,0.2\n", "0,abc,0.2\n", "0,nan,0.2\n"])
def test_load_rejects_bad_records(tmp_path, body):
    p = write(tmp_path, "dim=2\n" + body, "e.txt")
    with pytest.raises(EmbeddingFormatError, match="record 0"):
        list(load_embeddings(p, 2))


def test_load_missing_header(tmp_path):
    with pytest.raises(EmbeddingFormatError):
        list(load_embeddings(write(tmp_path, "0,1.0\n", "e.txt"), 1))


def test_embeddings_round_trip_1000(tmp_path):
    rng = np.random.default_rng(3)
    examples = [LabeledExample(rng.normal(size=16) * 10.0 ** rng.integers(-8, 8), int(rng.integers(2)))
                for _ in range(1000)]
    p = tmp_path / "e.txt"
    save_embeddings(p, examples, 16)
    assert list(load_embeddings(p, 16)) == examples


def test_save_rejects_wrong_length(tmp_path):
    with pytest.raises(EmbeddingFormatError):
        save_embeddings(tmp_path / "e.txt", [LabeledExample(np.zeros(3), 0)], 4)
