"""Shared fixtures: bundled production parameters and tiny toy parameters."""

import random

import pytest

from psitrace.presets import default_group_params, default_rsa_key, toy_group_params, toy_rsa_key


@pytest.fixture(scope="session")
def group1024():
    return default_group_params()


@pytest.fixture(scope="session")
def rsa1024():
    return default_rsa_key()


@pytest.fixture(scope="session")
def toy_group():
    return toy_group_params()


@pytest.fixture(scope="session")
def toy_rsa():
    return toy_rsa_key()


def make_elements(n: int, seed: int = 0) -> list[bytes]:
    """Distinct deterministic 16-byte elements for test inputs."""
    rng = random.Random(seed)
    out: set[bytes] = set()
    while len(out) < n:
        out.add(rng.getrandbits(128).to_bytes(16, "big"))
    return sorted(out)
