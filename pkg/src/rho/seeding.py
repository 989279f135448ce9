"""Deterministic seed derivation.

Every stochastic component (parameter init, split sampling, batch order,
synthetic generation, contamination) draws its own 32-bit seed from a single
root seed plus a short component tag, so whole runs replay exactly while the
components stay decorrelated.
"""

import hashlib


def derive_seed(root: int, tag: str) -> int:
    """Return sha256(f"{root}/{tag}") truncated to 4 little-endian bytes."""
    digest = hashlib.sha256(f"{int(root)}/{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")
