"""Modular arithmetic, primality testing, and secure randomness.

All protocol big-integer work funnels through :func:`mod_pow` so callers can
attach a :class:`ModexpCounter` and get exact per-phase exponentiation tallies.
gmpy2 backs the hot path; a pure-Python fallback keeps the module importable
without it.
"""

from __future__ import annotations

import math
import random
import secrets
from dataclasses import dataclass, field

try:
    import gmpy2

    _HAVE_GMPY2 = True
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _HAVE_GMPY2 = False

# Fisher-Yates over os.urandom; used for every protocol-level shuffle.
_sysrand = random.SystemRandom()

# Exponentiation kinds tracked by ModexpCounter.
KIND_ELEMENT = "element"
KIND_PUBLIC = "public"
KIND_FDH = "fdh"
KIND_VALIDATE = "validate"


@dataclass
class ModexpCounter:
    """Tallies modular exponentiations by kind.

    element:  one exponentiation per input-set element (blind, re-blind,
              unblind, tag).
    public:   constant-per-run exponentiations producing or consuming the
              public key-like values exchanged on the wire.
    fdh:      exponentiations internal to full-domain hashing (cofactor
              powers); part of hashing cost, not protocol accounting.
    validate: subgroup-membership checks on received elements; hardening
              on top of the base protocol, tallied separately so the
              per-element accounting stays comparable.
    """

    element: int = 0
    public: int = 0
    fdh: int = 0
    validate: int = 0
    extra: dict = field(default_factory=dict)

    def add(self, kind: str, n: int = 1) -> None:
        if kind == KIND_ELEMENT:
            self.element += n
        elif kind == KIND_PUBLIC:
            self.public += n
        elif kind == KIND_FDH:
            self.fdh += n
        elif kind == KIND_VALIDATE:
            self.validate += n
        else:
            self.extra[kind] = self.extra.get(kind, 0) + n

    @property
    def total(self) -> int:
        return self.element + self.public + self.fdh + self.validate + sum(self.extra.values())


if _HAVE_GMPY2:

    def mod_pow(base: int, exp: int, mod: int, counter: ModexpCounter | None = None, kind: str = KIND_ELEMENT) -> int:
        """base**exp mod `mod`, tallied against `counter` when given."""
        if counter is not None:
            counter.add(kind)
        return int(gmpy2.powmod(base, exp, mod))

    def mod_inv(a: int, m: int) -> int:
        """Inverse of a modulo m; raises ValueError when gcd(a, m) != 1."""
        try:
            return int(gmpy2.invert(a, m))
        except ZeroDivisionError:
            raise ValueError(f"{a} is not invertible modulo {m}") from None

else:  # pragma: no cover

    def mod_pow(base: int, exp: int, mod: int, counter: ModexpCounter | None = None, kind: str = KIND_ELEMENT) -> int:
        if counter is not None:
            counter.add(kind)
        return pow(base, exp, mod)

    def mod_inv(a: int, m: int) -> int:
        try:
            return pow(a, -1, m)
        except ValueError:
            raise ValueError(f"{a} is not invertible modulo {m}") from None


# 64 Miller-Rabin rounds bound the error by 4^-64 = 2^-128.
_MR_ROUNDS = 64

_SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97]


def miller_rabin(n: int, rounds: int = _MR_ROUNDS, rng: random.Random | None = None) -> bool:
    """Plain Miller-Rabin with random bases; the independent primality oracle."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    rand = rng if rng is not None else _sysrand
    for _ in range(rounds):
        a = rand.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = (x * x) % n
            if x == n - 1:
                break
        else:
            return False
    return True


def is_probable_prime(n: int) -> bool:
    """Primality at a >=128-bit error bound (gmpy2-backed when available)."""
    if n < 2:
        return False
    if _HAVE_GMPY2:
        return gmpy2.is_prime(gmpy2.mpz(n), _MR_ROUNDS) != 0
    return miller_rabin(n)


def sample_exponent(q: int) -> int:
    """Uniform exponent in [1, q-1] from a CSPRNG; nonzero so inverses exist."""
    if q < 3:
        raise ValueError("modulus too small to sample a nonzero exponent")
    return secrets.randbelow(q - 1) + 1


def sample_unit(n: int) -> int:
    """Uniform element of the multiplicative group mod n, in [2, n-1]."""
    while True:
        r = secrets.randbelow(n - 2) + 2
        if math.gcd(r, n) == 1:
            return r


def secure_shuffle(items: list) -> None:
    """In-place Fisher-Yates shuffle driven by the system CSPRNG."""
    _sysrand.shuffle(items)


def secure_permutation(n: int) -> list[int]:
    """Uniformly random permutation of range(n) from the system CSPRNG."""
    perm = list(range(n))
    _sysrand.shuffle(perm)
    return perm
