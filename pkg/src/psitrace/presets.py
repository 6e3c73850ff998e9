"""Bundled parameter sets.

Group/key generation is slow and nondeterministic, so fixed files ship with
the package: production-sized parameters for real timing behavior and toy
parameters small enough to verify the algebra by hand. The bundled RSA key
includes its private exponent and is for demos and tests only; a deployment
generates its own and keeps d at the certification authority.
"""

from __future__ import annotations

from importlib import resources

from .groups import GroupParams, params_from_json
from .rsakeys import RsaAuthorityKey, key_from_json

_TOY_GROUP = GroupParams(p=23, q=11, g=4)
_TOY_RSA = RsaAuthorityKey(n=1081, e=17, d=893, g=3, p=23, q=47)


def _read(name: str) -> str:
    return resources.files("psitrace.params").joinpath(name).read_text(encoding="utf-8")


def default_group_params() -> GroupParams:
    """Bundled 1024-bit modulus, 160-bit subgroup order."""
    return params_from_json(_read("group_1024_160.json"))


def toy_group_params() -> GroupParams:
    """p=23, q=11, g=4: small enough to enumerate the whole subgroup."""
    _TOY_GROUP.validate()
    return _TOY_GROUP


def default_rsa_key() -> RsaAuthorityKey:
    """Bundled 1024-bit safe-prime demo key (includes d; not for deployment)."""
    return key_from_json(_read("rsa_1024.json"))


def toy_rsa_key() -> RsaAuthorityKey:
    """N = 23*47 = 1081, e = 17: hand-checkable signing arithmetic."""
    _TOY_RSA.validate()
    return _TOY_RSA
