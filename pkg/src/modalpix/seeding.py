"""Derive independent per-purpose seeds from one global seed."""
import hashlib


def derive_seed(seed: int, label: str) -> int:
    """Stable 63-bit seed for ``label`` under the global ``seed``."""
    digest = hashlib.sha256(f"{int(seed)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1
