"""Authorized intersection-cardinality protocol over an RSA modulus.

Client elements only count toward the intersection when they carry a
certification-authority signature sigma = H(c)^d mod N. The client blinds
each sigma with g^R and sends the products; the server answers with both
lists raised to 2*e*R_s, which strips d via e*d = 1 mod phi(N) once the
client divides out its own blinding. The server's per-epoch digest of tag
values is published once and shared by every client in that epoch.

All exponents on the server side carry the factor 2, which confines values
to the squares mod N and in particular kills the sign ambiguity of RSA
signatures (-sigma verifies whenever sigma does).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .arith import (
    KIND_ELEMENT,
    KIND_PUBLIC,
    ModexpCounter,
    mod_inv,
    mod_pow,
    sample_exponent,
    secure_shuffle,
)
from .errors import (
    LimitExceededError,
    ProtocolViolationError,
    UnauthorizedElementError,
)
from .fdh import check_element, element_tag, hash_to_zn
from .rsakeys import ApsiCommon, RsaAuthorityKey

DEFAULT_V_MAX = 100_000

KIND_SIGN = "sign"


@dataclass
class ApsiClientState:
    """Ordered distinct elements with their signatures and blinding exponents.

    blind_exps and epoch_id are filled in when the request is built; every
    request draws fresh blinding.
    """

    common: ApsiCommon
    elements: list[bytes]
    sigmas: list[int]
    blind_exps: list[int] = field(default_factory=list)
    epoch_id: str | None = None


@dataclass
class ApsiDigest:
    epoch_id: str
    ts: list[bytes]


@dataclass
class ApsiRequest:
    epoch_id: str
    a: list[int]


@dataclass
class ApsiResponse:
    y: int
    a_prime: list[int]


def ca_sign(element: bytes, key: RsaAuthorityKey, counter: ModexpCounter | None = None) -> int:
    """Authority signature over an element: H(element)^d mod N."""
    check_element(element)
    return mod_pow(hash_to_zn(element, key.n, counter), key.d, key.n, counter, KIND_SIGN)


def verify_signature(element: bytes, sigma: int, common: ApsiCommon, counter: ModexpCounter | None = None) -> bool:
    """Check sigma^e == H(element) mod N."""
    check_element(element)
    if not 1 <= sigma < common.n or math.gcd(sigma, common.n) != 1:
        return False
    return mod_pow(sigma, common.e, common.n, counter, KIND_SIGN) == hash_to_zn(element, common.n, counter)


def sample_epoch_secret(common: ApsiCommon) -> int:
    """Server-side epoch exponent, uniform in [1, N-1]."""
    return sample_exponent(common.n)


def client_prepare(signed_elements, common: ApsiCommon) -> ApsiClientState:
    """Build client state from (element, sigma) pairs, deduplicating elements.

    The first occurrence of an element wins; its signature is kept. A missing
    signature (None) fails here so an unauthorized request is never built.
    """
    seen = set()
    elements: list[bytes] = []
    sigmas: list[int] = []
    for element, sigma in signed_elements:
        check_element(element)
        if element in seen:
            continue
        seen.add(element)
        if sigma is None:
            raise UnauthorizedElementError("element has no authority signature")
        elements.append(element)
        sigmas.append(sigma)
    return ApsiClientState(common=common, elements=elements, sigmas=sigmas)


def client_request(
    state: ApsiClientState,
    epoch_id: str,
    counter: ModexpCounter | None = None,
) -> ApsiRequest:
    """Blind each signature with fresh g^R and build the request.

    Order matches state.elements; the response must preserve it so the
    client can pair a_prime values with blinding exponents.
    """
    if len(state.sigmas) != len(state.elements):
        raise UnauthorizedElementError("signature list does not cover all elements")
    n = state.common.n
    state.blind_exps = [sample_exponent(n) for _ in state.elements]
    state.epoch_id = epoch_id
    a = [
        sigma * mod_pow(state.common.g, r, n, counter, KIND_ELEMENT) % n
        for sigma, r in zip(state.sigmas, state.blind_exps)
    ]
    return ApsiRequest(epoch_id=epoch_id, a=a)


def server_publish_digest(
    elements,
    epoch_id: str,
    r_s: int,
    common: ApsiCommon,
    counter: ModexpCounter | None = None,
) -> ApsiDigest:
    """Tag the server set under the epoch exponent and shuffle (offline step)."""
    n = common.n
    exp = 2 * r_s
    seen = set()
    ts = []
    for element in elements:
        check_element(element)
        if element in seen:
            continue
        seen.add(element)
        ts.append(element_tag(mod_pow(hash_to_zn(element, n, counter), exp, n, counter, KIND_ELEMENT), n))
    secure_shuffle(ts)
    return ApsiDigest(epoch_id=epoch_id, ts=ts)


def server_respond(
    request: ApsiRequest,
    r_s: int,
    common: ApsiCommon,
    v_max: int = DEFAULT_V_MAX,
    counter: ModexpCounter | None = None,
) -> ApsiResponse:
    """Raise every received value (and g) to 2*e*R_s, preserving order.

    An empty request still gets Y. Values outside [1, N-1] or sharing a
    factor with N are rejected whole; a shared factor would break the
    inverse the client computes later and never happens for honest input.
    """
    if len(request.a) > v_max:
        raise LimitExceededError(f"request carries {len(request.a)} elements, limit is {v_max}")
    n = common.n
    for z in request.a:
        if not 1 <= z < n or math.gcd(z, n) != 1:
            raise ProtocolViolationError("blinded value is not a unit mod N")
    exp = 2 * common.e * r_s
    y = mod_pow(common.g, exp, n, counter, KIND_PUBLIC)
    a_prime = [mod_pow(z, exp, n, counter, KIND_ELEMENT) for z in request.a]
    return ApsiResponse(y=y, a_prime=a_prime)


def client_finish(
    state: ApsiClientState,
    digest: ApsiDigest,
    response: ApsiResponse,
    counter: ModexpCounter | None = None,
) -> int:
    """Strip the blinding from each a_prime, tag, and count digest matches.

    For a validly signed element the stripped value is H(c)^{2R_s}, exactly
    what the digest tagged; a forged signature leaves a factor that cannot
    match any tag except by hash collision. Each digest tag is consumed at
    most once.
    """
    v = len(state.elements)
    if len(response.a_prime) != v:
        raise ProtocolViolationError(f"expected {v} response elements, got {len(response.a_prime)}")
    if len(state.blind_exps) != v or state.epoch_id is None:
        raise ProtocolViolationError("client state has no in-flight request")
    if digest.epoch_id != state.epoch_id:
        raise ProtocolViolationError("digest epoch does not match the request epoch")
    n = state.common.n
    if not 1 <= response.y < n:
        raise ProtocolViolationError("server public value out of range")
    try:
        y_inv = mod_inv(response.y, n)
    except ValueError:
        raise ProtocolViolationError("server public value is not a unit mod N") from None

    pool = Counter(digest.ts)
    matches = 0
    for z, r in zip(response.a_prime, state.blind_exps):
        if not 1 <= z < n or math.gcd(z, n) != 1:
            raise ProtocolViolationError("response value is not a unit mod N")
        tag = element_tag(z * mod_pow(y_inv, r, n, counter, KIND_ELEMENT) % n, n)
        if pool[tag] > 0:
            pool[tag] -= 1
            matches += 1
    return matches
