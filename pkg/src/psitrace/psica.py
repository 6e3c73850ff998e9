"""Two-message intersection-cardinality protocol over a prime-order subgroup.

Flow: the client blinds the hashes of its elements with a private exponent
and sends them with its public value X. The server re-blinds and shuffles the
received list, and tags every element of its own set by combining X with the
server-side blinding. The client strips its own blinding, rebuilds the tags
for its elements, and counts matches. Only the count survives; the shuffle
hides which elements matched.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .arith import KIND_ELEMENT, KIND_PUBLIC, ModexpCounter, mod_inv, mod_pow, sample_exponent, secure_shuffle
from .errors import EmptyInputError, LimitExceededError, ProtocolViolationError
from .fdh import check_element, element_tag, hash_to_subgroup
from .groups import GroupParams

DEFAULT_V_MAX = 100_000


@dataclass
class PsiCaClientState:
    """Per-run client secrets: key exponent, blinding exponent, input order."""

    params: GroupParams
    elements: list[bytes]
    secret_exp: int
    blind_exp: int


@dataclass
class PsiCaRequest:
    x: int
    a: list[int]


@dataclass
class PsiCaResponse:
    y: int
    a_prime: list[int]
    ts: list[bytes]


@dataclass
class PsiCaServerEphemeral:
    """Fresh per request, never reused, never serialized."""

    secret_exp: int
    blind_exp: int


def dedupe(elements) -> list[bytes]:
    """Distinct elements in first-seen order."""
    seen = set()
    out = []
    for el in elements:
        check_element(el)
        if el not in seen:
            seen.add(el)
            out.append(el)
    return out


def build_hs_cache(elements, params: GroupParams, counter: ModexpCounter | None = None) -> list[int]:
    """Hash the server set into the subgroup and shuffle it (offline step).

    The permutation is drawn fresh per cache build; requests served from one
    cache share it, which is safe because every response re-randomizes the
    tags with fresh exponents.
    """
    hs = [hash_to_subgroup(el, params.p, params.q, counter) for el in dedupe(elements)]
    secure_shuffle(hs)
    return hs


def client_prepare(
    elements,
    params: GroupParams,
    counter: ModexpCounter | None = None,
) -> tuple[PsiCaClientState, PsiCaRequest]:
    """Blind the client set and build the first message."""
    distinct = dedupe(elements)
    if not distinct:
        raise EmptyInputError("no elements to query after deduplication")
    secret_exp = sample_exponent(params.q)
    blind_exp = sample_exponent(params.q)
    a = [
        mod_pow(hash_to_subgroup(el, params.p, params.q, counter), blind_exp, params.p, counter, KIND_ELEMENT)
        for el in distinct
    ]
    x = mod_pow(params.g, secret_exp, params.p, counter, KIND_PUBLIC)
    state = PsiCaClientState(params=params, elements=distinct, secret_exp=secret_exp, blind_exp=blind_exp)
    return state, PsiCaRequest(x=x, a=a)


def server_respond(
    request: PsiCaRequest,
    hs_cache: list[int],
    params: GroupParams,
    v_max: int = DEFAULT_V_MAX,
    counter: ModexpCounter | None = None,
    validate: bool = True,
) -> tuple[PsiCaResponse, PsiCaServerEphemeral]:
    """Re-blind, shuffle, and tag; one fresh ephemeral pair per request.

    Rejects the whole request if any received value is outside the subgroup
    (small-subgroup confinement defense) or the list exceeds v_max. The
    subgroup checks cost one short exponentiation per element on top of the
    base protocol; validate=False skips them for benchmarks that measure the
    base protocol's own scaling against known-honest input.
    """
    if not request.a:
        raise ProtocolViolationError("request carries no elements")
    if len(request.a) > v_max:
        raise LimitExceededError(f"request carries {len(request.a)} elements, limit is {v_max}")
    if validate:
        if not params.is_subgroup_element(request.x, counter):
            raise ProtocolViolationError("public value X is not in the subgroup")
        for z in request.a:
            if not params.is_subgroup_element(z, counter):
                raise ProtocolViolationError("blinded element outside the subgroup")

    eph = PsiCaServerEphemeral(secret_exp=sample_exponent(params.q), blind_exp=sample_exponent(params.q))
    p = params.p

    a_prime = [mod_pow(z, eph.blind_exp, p, counter, KIND_ELEMENT) for z in request.a]
    secure_shuffle(a_prime)

    y = mod_pow(params.g, eph.secret_exp, p, counter, KIND_PUBLIC)
    shared = mod_pow(request.x, eph.secret_exp, p, counter, KIND_PUBLIC)
    ts = [
        element_tag(shared * mod_pow(hs, eph.blind_exp, p, counter, KIND_ELEMENT) % p, p)
        for hs in hs_cache
    ]
    return PsiCaResponse(y=y, a_prime=a_prime, ts=ts), eph


def client_finish(
    state: PsiCaClientState,
    response: PsiCaResponse,
    counter: ModexpCounter | None = None,
) -> int:
    """Strip the client blinding, rebuild tags, and count matches.

    Each server tag is consumed at most once, so duplicate tags can never
    inflate the count. Result is in [0, min(v, len(ts))].
    """
    v = len(state.elements)
    if len(response.a_prime) != v:
        raise ProtocolViolationError(f"expected {v} re-blinded elements, got {len(response.a_prime)}")
    p = state.params.p
    unblind = mod_inv(state.blind_exp, state.params.q)
    shared = mod_pow(response.y, state.secret_exp, p, counter, KIND_PUBLIC)

    pool = Counter(response.ts)
    matches = 0
    for z in response.a_prime:
        tag = element_tag(shared * mod_pow(z, unblind, p, counter, KIND_ELEMENT) % p, p)
        if pool[tag] > 0:
            pool[tag] -= 1
            matches += 1
    return matches
