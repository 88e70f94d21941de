"""Internet checksum (RFC 1071)."""

from __future__ import annotations


def ones_sum(data) -> int:
    """One's-complement sum of ``data`` as big-endian 16-bit words, odd tail zero-padded.

    Uses 2**16 == 1 (mod 0xFFFF): the folded sum equals the whole buffer read
    as one big integer, mod 0xFFFF, except that a nonzero multiple of 0xFFFF
    folds to 0xFFFF (negative zero) rather than 0.
    """
    b = bytes(data)
    if len(b) & 1:
        b += b"\0"
    n = int.from_bytes(b, "big")
    if n == 0:
        return 0
    return n % 0xFFFF or 0xFFFF


def internet_checksum(data) -> int:
    return ~ones_sum(data) & 0xFFFF


def verify(data) -> bool:
    """True when ``data`` (checksum field included) sums to all ones."""
    return ones_sum(data) == 0xFFFF
