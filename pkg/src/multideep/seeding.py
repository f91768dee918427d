"""Deterministic seed derivation.

Benchmark cells, training episodes, and instance draws all need their own
RNG streams that are reproducible across runs and platforms.  Python's
built-in ``hash`` is salted per process, so seeds are derived from a
SHA-256 digest of the stringified key parts instead.
"""

from __future__ import annotations

import hashlib

__all__ = ["mix_seed"]


def mix_seed(*parts: object) -> int:
    """Mix arbitrary key parts into a 64-bit unsigned seed.

    Parts are joined by their ``str`` form, so values must have a stable
    string representation (ints, floats, short strings).
    """
    key = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
