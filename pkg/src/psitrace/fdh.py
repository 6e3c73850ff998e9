"""Identifier hashing and full-domain hashes into the protocol groups.

Application user IDs are reduced to fixed 16-byte elements before they touch
either protocol. Two distinct full-domain oracles map those elements into the
prime-order subgroup (discrete-log protocol) and into the units mod N (RSA
protocol); a third, plain SHA-256, produces the comparison tags.
"""

from __future__ import annotations

import hashlib
import math

from .arith import KIND_FDH, ModexpCounter, mod_pow
from .errors import InternalError

ELEMENT_LEN = 16
TAG_BITS = 256

# Domain-separation prefixes for the two group-mapping oracles.
_DOMAIN_SUBGROUP = b"fdh-subgroup:"
_DOMAIN_ZN = b"fdh-zn:"

_MAX_RETRIES = 256


def uid_to_element(uid: str, algorithm: str = "sha256") -> bytes:
    """Reduce an application user ID to its 16-byte protocol element.

    sha256 (truncated) is the default; md5 exists only for benchmarking
    against systems that used it and must not be picked for anything else.
    """
    data = uid.encode("utf-8")
    if algorithm == "sha256":
        return hashlib.sha256(data).digest()[:ELEMENT_LEN]
    if algorithm == "md5":
        return hashlib.md5(data).digest()
    raise ValueError(f"unknown element hash algorithm: {algorithm!r}")


def check_element(value: bytes) -> bytes:
    """Validate the fixed element length; returns the value for chaining."""
    if not isinstance(value, bytes) or len(value) != ELEMENT_LEN:
        raise ValueError(f"element must be exactly {ELEMENT_LEN} bytes")
    return value


def _expand(domain: bytes, x: bytes, attempt: int, nbytes: int) -> bytes:
    """Counter-mode SHA-256 expansion of (domain, attempt, x) to nbytes."""
    out = bytearray()
    block = 0
    prefix = domain + attempt.to_bytes(2, "big") + x
    while len(out) < nbytes:
        out += hashlib.sha256(prefix + block.to_bytes(4, "big")).digest()
        block += 1
    return bytes(out[:nbytes])


def hash_to_subgroup(x: bytes, p: int, q: int, counter: ModexpCounter | None = None) -> int:
    """Deterministically map x into the order-q subgroup mod p, excluding 1.

    Expands x to |p| + 128 bits, reduces mod p, and raises to the cofactor
    (p-1)/q. Re-expands with a bumped attempt counter in the rare case the
    result degenerates to 0 or 1.
    """
    check_element(x)
    cofactor = (p - 1) // q
    nbytes = (p.bit_length() + 7) // 8 + 16
    for attempt in range(_MAX_RETRIES):
        u = int.from_bytes(_expand(_DOMAIN_SUBGROUP, x, attempt, nbytes), "big") % p
        if u == 0:
            continue
        h = mod_pow(u, cofactor, p, counter, KIND_FDH)
        if h != 1:
            return h
    raise InternalError("subgroup hash retry cap exceeded")


def hash_to_zn(x: bytes, n: int, counter: ModexpCounter | None = None) -> int:
    """Deterministically map x to a unit mod n in [2, n-1]."""
    check_element(x)
    if n < 2:
        raise ValueError("modulus must be at least 2")
    nbytes = (n.bit_length() + 7) // 8 + 16
    for attempt in range(_MAX_RETRIES):
        u = int.from_bytes(_expand(_DOMAIN_ZN, x, attempt, nbytes), "big") % n
        if u >= 2 and math.gcd(u, n) == 1:
            return u
    raise InternalError("unit hash retry cap exceeded")


def tag_hash(data: bytes) -> bytes:
    """The 256-bit tag hash: plain SHA-256 over the input bytes."""
    return hashlib.sha256(data).digest()


def int_to_fixed(value: int, modulus: int) -> bytes:
    """Canonical fixed-width big-endian encoding of a residue mod `modulus`.

    Both sides must feed identical bytes to the tag hash, so the width is
    pinned to the modulus size rather than the value's own length.
    """
    width = (modulus.bit_length() + 7) // 8
    return value.to_bytes(width, "big")


def element_tag(value: int, modulus: int) -> bytes:
    """Tag for a group element: tag hash over its canonical encoding."""
    return tag_hash(int_to_fixed(value, modulus))
