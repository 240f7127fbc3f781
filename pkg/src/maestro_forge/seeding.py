"""Stable 64-bit seed derivation.

Every random decision in the engine draws from a seed derived here, so a
run is a pure function of its master seed: parallel evaluation order can
never perturb the random streams.
"""

import hashlib

_MASK = (1 << 64) - 1


def derive_seed(*parts: int | str) -> int:
    """Hash a tuple of ints/strings into a 64-bit seed, stably across runs."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"cannot derive a seed from {part!r}")
        tag = b"i" if isinstance(part, int) else b"s"
        data = str(part).encode("utf-8")
        h.update(tag + len(data).to_bytes(4, "big") + data)
    return int.from_bytes(h.digest(), "big") & _MASK
