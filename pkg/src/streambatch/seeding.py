"""Stable seed derivation.

Every random decision in the toolkit draws from a generator seeded through
:func:`derive_seed`, so child streams (per shard, per pass, per component)
are independent and a run is a pure function of its top-level seeds. The
derivation hashes the parts with SHA-256, which is stable across platforms
and Python versions, unlike ``hash()``.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def derive_seed(*parts: int | str) -> int:
    """Derive a 64-bit seed from a sequence of integer/string parts."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        tag = "i" if isinstance(part, int) else "s"
        token = f"{tag}:{part}"
        h.update(len(token).to_bytes(4, "big"))
        h.update(token.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big") & _MASK64
