"""Modular arithmetic against independent oracles, plus counter accounting."""

import math
import random

import pytest

from psitrace.arith import (
    KIND_ELEMENT,
    KIND_FDH,
    KIND_PUBLIC,
    KIND_VALIDATE,
    ModexpCounter,
    is_probable_prime,
    miller_rabin,
    mod_inv,
    mod_pow,
    sample_exponent,
    sample_unit,
    secure_permutation,
)

# chi-square critical value, df=9, p=0.001
_CHI2_DF9 = 27.877


def _pow_oracle(base: int, exp: int, mod: int) -> int:
    """Independent square-and-multiply, no library calls."""
    result = 1 % mod
    base %= mod
    while exp:
        if exp & 1:
            result = result * base % mod
        base = base * base % mod
        exp >>= 1
    return result


def test_mod_pow_matches_square_and_multiply():
    rng = random.Random(1)
    for _ in range(1000):
        mod = rng.getrandbits(64) | 1
        base = rng.getrandbits(64)
        exp = rng.getrandbits(64)
        assert mod_pow(base, exp, mod) == _pow_oracle(base, exp, mod)


def test_mod_pow_edge_cases():
    assert mod_pow(5, 0, 7) == 1
    assert mod_pow(0, 5, 7) == 0
    assert mod_pow(3, 1, 2) == 1
    assert mod_pow(10, 10, 1) == 0


def test_mod_inv_roundtrip():
    rng = random.Random(2)
    for _ in range(1000):
        m = rng.getrandbits(48) | 1
        a = rng.randrange(1, m)
        if math.gcd(a, m) != 1:
            continue
        inv = mod_inv(a, m)
        assert 0 < inv < m
        assert a * inv % m == 1


def test_mod_inv_rejects_non_units():
    with pytest.raises(ValueError):
        mod_inv(6, 9)
    with pytest.raises(ValueError):
        mod_inv(0, 7)


def test_miller_rabin_known_values():
    primes = [2, 3, 5, 17, 97, 7919, 2**61 - 1]
    composites = [0, 1, 4, 9, 561, 1105, 2**67 - 1]  # includes Carmichael numbers
    for n in primes:
        assert miller_rabin(n)
        assert is_probable_prime(n)
    for n in composites:
        assert not miller_rabin(n)
        assert not is_probable_prime(n)


def test_miller_rabin_agrees_with_library_backend():
    rng = random.Random(3)
    for _ in range(300):
        n = rng.getrandbits(48) | 1
        assert miller_rabin(n, rng=rng) == is_probable_prime(n)


def _chi2_uniform(counts: list[int], expected: float) -> float:
    return sum((c - expected) ** 2 / expected for c in counts)


def test_sample_exponent_range_and_uniformity():
    q = 11
    # p=0.001 per attempt; one retry bounds the false-failure rate at 1e-6
    for attempt in range(2):
        counts = [0] * (q - 1)
        for _ in range(10_000):
            r = sample_exponent(q)
            assert 1 <= r <= q - 1
            counts[r - 1] += 1
        if _chi2_uniform(counts, 10_000 / (q - 1)) < _CHI2_DF9:
            return
    pytest.fail("exponent sampling failed the uniformity check twice")


def test_sample_exponent_no_repeats_at_full_width(group1024):
    draws = {sample_exponent(group1024.q) for _ in range(100)}
    assert len(draws) == 100
    assert all(1 <= r < group1024.q for r in draws)


def test_sample_exponent_rejects_tiny_modulus():
    with pytest.raises(ValueError):
        sample_exponent(2)


def test_sample_unit_is_coprime():
    n = 1081  # 23 * 47
    for _ in range(200):
        u = sample_unit(n)
        assert 2 <= u < n
        assert math.gcd(u, n) == 1


def test_secure_permutation_is_a_permutation():
    for n in (1, 2, 7, 50):
        assert sorted(secure_permutation(n)) == list(range(n))


def test_counter_buckets_by_kind():
    counter = ModexpCounter()
    mod_pow(2, 3, 5, counter, KIND_ELEMENT)
    mod_pow(2, 3, 5, counter, KIND_ELEMENT)
    mod_pow(2, 3, 5, counter, KIND_PUBLIC)
    mod_pow(2, 3, 5, counter, KIND_FDH)
    mod_pow(2, 3, 5, counter, KIND_VALIDATE)
    mod_pow(2, 3, 5, counter, "sign")
    assert counter.element == 2
    assert counter.public == 1
    assert counter.fdh == 1
    assert counter.validate == 1
    assert counter.extra == {"sign": 1}
    assert counter.total == 6


def test_counter_untouched_without_instance():
    assert mod_pow(2, 10, 1000) == 24
