"""Single-node versus data-parallel training of a hashed-embedding sentiment classifier."""

__version__ = "0.1.0"
