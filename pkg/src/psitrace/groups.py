"""Discrete-log group parameters: generation, validation, and file format."""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass
from pathlib import Path

from .arith import is_probable_prime, mod_pow
from .errors import ConfigError, GenerationError

DEFAULT_P_BITS = 1024
DEFAULT_Q_BITS = 160
DEFAULT_KAPPA = 256

# Candidate budget for the prime searches before giving up.
_MAX_ITERATIONS = 500_000


@dataclass(frozen=True)
class GroupParams:
    """A prime-order subgroup of the integers mod p.

    p is prime, q is a prime divisor of p-1, and g generates the order-q
    subgroup. kappa is the tag-hash output size in bits (fixed at 256).
    """

    p: int
    q: int
    g: int
    kappa: int = DEFAULT_KAPPA

    def validate(self) -> None:
        if not is_probable_prime(self.p):
            raise ConfigError("p is not prime")
        if not is_probable_prime(self.q):
            raise ConfigError("q is not prime")
        if (self.p - 1) % self.q != 0:
            raise ConfigError("q does not divide p-1")
        if not 1 < self.g < self.p:
            raise ConfigError("generator out of range")
        if mod_pow(self.g, self.q, self.p) != 1:
            raise ConfigError("generator does not have order q")
        if self.kappa != DEFAULT_KAPPA:
            raise ConfigError("tag hash is fixed at 256-bit output")

    @property
    def cofactor(self) -> int:
        return (self.p - 1) // self.q

    def is_subgroup_element(self, z: int, counter=None) -> bool:
        """Membership test for the order-q subgroup (z^q == 1 mod p)."""
        from .arith import KIND_VALIDATE

        return 1 <= z < self.p and mod_pow(z, self.q, self.p, counter, KIND_VALIDATE) == 1


def _random_prime(bits: int) -> int:
    for _ in range(_MAX_ITERATIONS):
        cand = secrets.randbits(bits) | (1 << (bits - 1)) | 1
        if is_probable_prime(cand):
            return cand
    raise GenerationError(f"no {bits}-bit prime found within the iteration cap")


def generate_group_params(
    p_bits: int = DEFAULT_P_BITS,
    q_bits: int = DEFAULT_Q_BITS,
    max_iterations: int = _MAX_ITERATIONS,
) -> GroupParams:
    """Generate fresh (p, q, g) with |p| = p_bits and |q| = q_bits.

    Searches for p = q*m + 1 prime, then derives a generator by raising a
    random base to the cofactor.
    """
    if p_bits < 512:
        raise ConfigError("p_bits must be at least 512")
    if q_bits < 160:
        raise ConfigError("q_bits must be at least 160")
    if q_bits >= p_bits:
        raise ConfigError("q_bits must be smaller than p_bits")

    q = _random_prime(q_bits)
    m_bits = p_bits - q_bits
    for _ in range(max_iterations):
        m = secrets.randbits(m_bits) | (1 << (m_bits - 1))
        p = q * m + 1
        if p.bit_length() != p_bits:
            continue
        if is_probable_prime(p):
            break
    else:
        raise GenerationError("no suitable p found within the iteration cap")

    cofactor = (p - 1) // q
    while True:
        h = secrets.randbelow(p - 3) + 2
        g = mod_pow(h, cofactor, p)
        if g != 1:
            break

    params = GroupParams(p=p, q=q, g=g)
    params.validate()
    return params


def params_to_json(params: GroupParams) -> str:
    obj = {
        "p": format(params.p, "x"),
        "q": format(params.q, "x"),
        "g": format(params.g, "x"),
        "kappa": format(params.kappa, "x"),
    }
    return json.dumps(obj, indent=2) + "\n"


def params_from_json(text: str) -> GroupParams:
    try:
        obj = json.loads(text)
        params = GroupParams(
            p=int(obj["p"], 16),
            q=int(obj["q"], 16),
            g=int(obj["g"], 16),
            kappa=int(obj["kappa"], 16) if "kappa" in obj else DEFAULT_KAPPA,
        )
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed group parameter file: {exc}") from exc
    params.validate()
    return params


def save_params(params: GroupParams, path: str | Path) -> None:
    Path(path).write_text(params_to_json(params), encoding="utf-8")


def load_params(path: str | Path) -> GroupParams:
    return params_from_json(Path(path).read_text(encoding="utf-8"))
