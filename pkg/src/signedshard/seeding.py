"""Deterministic seed derivation.

All randomness in the pipeline flows from one global seed.  Component seeds
are derived by hashing the global seed together with string/int labels, so
that e.g. shard 3 always trains with the same seed regardless of what other
components consumed randomness before it.
"""

import hashlib


def derive_seed(global_seed: int, *labels) -> int:
    """Derive a 64-bit child seed from a global seed and a label path."""
    key = ":".join([str(global_seed)] + [str(x) for x in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
