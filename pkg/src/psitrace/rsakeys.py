"""Authority RSA keys over safe-prime moduli, and their public common input."""

from __future__ import annotations

import json
import math
import secrets
from dataclasses import dataclass
from pathlib import Path

from .arith import is_probable_prime, mod_inv, sample_unit
from .errors import ConfigError, GenerationError

DEFAULT_N_BITS = 1024
DEFAULT_E = 65537

_MAX_ITERATIONS = 2_000_000


@dataclass(frozen=True)
class ApsiCommon:
    """Public common input for the authorized protocol: modulus, exponent, base."""

    n: int
    e: int
    g: int

    def validate(self) -> None:
        if self.n < 6:
            raise ConfigError("modulus too small")
        if self.e < 3 or self.e % 2 == 0:
            raise ConfigError("public exponent must be odd and >= 3")
        if not 1 <= self.g < self.n or math.gcd(self.g, self.n) != 1:
            raise ConfigError("base g must be a unit mod n")


@dataclass(frozen=True)
class RsaAuthorityKey:
    """The certification authority's RSA key. Factors are safe primes.

    The private exponent d stays with the CA; everything the protocol peers
    need is in :meth:`common`.
    """

    n: int
    e: int
    d: int
    g: int
    # Factors kept for validation; None when loaded from a file without them.
    p: int | None = None
    q: int | None = None

    def common(self) -> ApsiCommon:
        return ApsiCommon(n=self.n, e=self.e, g=self.g)

    def validate(self) -> None:
        self.common().validate()
        if self.p is not None and self.q is not None:
            if self.p * self.q != self.n:
                raise ConfigError("factors do not multiply to n")
            for f in (self.p, self.q):
                if not is_probable_prime(f) or not is_probable_prime((f - 1) // 2):
                    raise ConfigError("factors must be safe primes")
            phi = (self.p - 1) * (self.q - 1)
            if (self.e * self.d) % phi != 1:
                raise ConfigError("e*d != 1 mod phi(n)")


def _random_safe_prime(bits: int) -> int:
    """Random `bits`-bit safe prime with the top two bits set."""
    top = (1 << (bits - 2)) | (1 << (bits - 3))
    for _ in range(_MAX_ITERATIONS):
        m = secrets.randbits(bits - 1) | top | 1
        # Cheap pre-filter: 2m+1 mod 3 == 0 can be rejected without a test.
        if m % 3 == 1:
            continue
        if is_probable_prime(m) and is_probable_prime(2 * m + 1):
            return 2 * m + 1
    raise GenerationError(f"no {bits}-bit safe prime found within the iteration cap")


def generate_rsa_authority_key(
    n_bits: int = DEFAULT_N_BITS,
    e: int = DEFAULT_E,
    profile: str = "production",
) -> RsaAuthorityKey:
    """Generate an authority key with an n_bits modulus from two safe primes.

    The production profile enforces n_bits >= 1024; the test profile allows
    down to 512 for fast fixtures.
    """
    floor = 1024 if profile == "production" else 512
    if profile not in ("production", "test"):
        raise ConfigError(f"unknown key profile: {profile!r}")
    if n_bits < floor:
        raise ConfigError(f"{profile} profile requires n_bits >= {floor}")
    if e < 3 or e % 2 == 0:
        raise ConfigError("public exponent must be odd and >= 3")

    half = n_bits // 2
    while True:
        p = _random_safe_prime(half)
        q = _random_safe_prime(n_bits - half)
        if p == q:
            continue
        phi = (p - 1) * (q - 1)
        if math.gcd(e, phi) != 1:
            continue
        n = p * q
        if n.bit_length() != n_bits:
            continue
        key = RsaAuthorityKey(n=n, e=e, d=mod_inv(e, phi), g=sample_unit(n), p=p, q=q)
        key.validate()
        return key


def key_to_json(key: RsaAuthorityKey, include_private: bool = True) -> str:
    obj = {
        "n": format(key.n, "x"),
        "e": format(key.e, "x"),
        "g": format(key.g, "x"),
    }
    if include_private:
        obj["d"] = format(key.d, "x")
        if key.p is not None and key.q is not None:
            obj["p"] = format(key.p, "x")
            obj["q"] = format(key.q, "x")
    return json.dumps(obj, indent=2) + "\n"


def save_key(key: RsaAuthorityKey, path: str | Path, include_private: bool = True) -> None:
    Path(path).write_text(key_to_json(key, include_private), encoding="utf-8")


def common_from_json(text: str) -> ApsiCommon:
    """Parse the public (n, e, g) triple; ignores private fields if present."""
    try:
        obj = json.loads(text)
        common = ApsiCommon(n=int(obj["n"], 16), e=int(obj["e"], 16), g=int(obj["g"], 16))
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed RSA parameter file: {exc}") from exc
    common.validate()
    return common


def key_from_json(text: str) -> RsaAuthorityKey:
    """Parse a CA-held key; requires the private field d, factors optional."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed RSA key file: {exc}") from exc
    if "d" not in obj:
        raise ConfigError("RSA file lacks the private exponent; not a CA-held key")
    try:
        key = RsaAuthorityKey(
            n=int(obj["n"], 16),
            e=int(obj["e"], 16),
            d=int(obj["d"], 16),
            g=int(obj["g"], 16),
            p=int(obj["p"], 16) if "p" in obj else None,
            q=int(obj["q"], 16) if "q" in obj else None,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed RSA key file: {exc}") from exc
    key.validate()
    return key


def load_common(path: str | Path) -> ApsiCommon:
    return common_from_json(Path(path).read_text(encoding="utf-8"))


def load_key(path: str | Path) -> RsaAuthorityKey:
    return key_from_json(Path(path).read_text(encoding="utf-8"))
