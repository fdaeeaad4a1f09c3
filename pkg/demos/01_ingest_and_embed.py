"""From raw tweet rows to hashed n-gram vectors.

Writes a few Sentiment140-style rows, reads them back (the neutral row is
dropped and counted), normalizes the text and embeds it.
"""

import tempfile
from pathlib import Path

import numpy as np

from dpsent.ingest import EmbedderConfig, ReadStats, embed, preprocess, read_csv

rows = [
    '"0","1","Mon Apr 06","NO_QUERY","ann","@bob ugh, WORST day ever :("',
    '"2","2","Mon Apr 06","NO_QUERY","cat","going to the shops"',
    '"4","3","Mon Apr 06","NO_QUERY","dan","LOVE this song!!! #tbt"',
    '"4","4"',
]

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "tweets.csv"
    path.write_text("\n".join(rows) + "\n")
    stats = ReadStats()
    docs = list(read_csv(path, stats=stats))

print(f"retained {stats.retained}, neutral dropped {stats.dropped_neutral}, malformed {stats.malformed}")

cfg = EmbedderConfig(dimension=16, ngram_orders=(1, 2), hash_seed=0)
for doc in docs:
    tokens = preprocess(doc.raw_text)
    v = embed(tokens, cfg)
    print(f"\n{doc.label.name:<8} {doc.raw_text!r}")
    print(f"tokens   {tokens}")
    print(f"vector   {np.array2string(v, precision=2, suppress_small=True)}  |v| = {np.linalg.norm(v):.3f}")

# Same tokens and seed always give the same vector; another seed reshuffles buckets.
a = embed(["good", "movie"], cfg)
b = embed(["good", "movie"], EmbedderConfig(dimension=16, hash_seed=1))
print(f"\nsame seed identical: {np.array_equal(a, embed(['good', 'movie'], cfg))}, "
      f"different seed identical: {np.array_equal(a, b)}")
