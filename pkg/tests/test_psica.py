"""Cardinality protocol: oracle equality, accounting, hardening, white-box algebra."""

import itertools

import pytest

from psitrace import psica
from psitrace.arith import ModexpCounter, mod_inv, mod_pow
from psitrace.errors import EmptyInputError, LimitExceededError, ProtocolViolationError
from psitrace.fdh import element_tag, hash_to_subgroup
from psitrace.simbench import gen_inputs, oracle_intersection

from conftest import make_elements

# chi-square critical value, df=23, p=0.001
_CHI2_DF23 = 49.728


def _run_round(client, server, params, validate=True):
    hs_cache = psica.build_hs_cache(server, params)
    state, request = psica.client_prepare(client, params)
    response, _ = psica.server_respond(request, hs_cache, params, validate=validate)
    return psica.client_finish(state, response)


@pytest.mark.parametrize("v,w,overlap", [(1, 0, 0), (1, 1, 1), (5, 8, 3), (10, 10, 10), (40, 60, 0), (30, 50, 17)])
def test_round_matches_oracle(group1024, v, w, overlap):
    client, server, planted = gen_inputs(v, w, seed=v * 1000 + w, overlap=overlap)
    assert planted == oracle_intersection(client, server) == overlap
    assert _run_round(client, server, group1024) == overlap


def test_duplicate_client_elements_collapse(group1024):
    els = make_elements(6, seed=21)
    client = els[:4] + els[:2]  # two repeats
    server = els[2:]
    assert _run_round(client, server, group1024) == 2


def test_duplicate_server_elements_collapse(group1024):
    els = make_elements(4, seed=22)
    hs_cache = psica.build_hs_cache(els[:2] + els[:2] + els[2:], group1024)
    assert len(hs_cache) == 4
    state, request = psica.client_prepare(els[:1], group1024)
    response, _ = psica.server_respond(request, hs_cache, group1024)
    assert psica.client_finish(state, response) == 1


def test_exponentiation_accounting(group1024):
    v, w = 25, 40
    client, server, overlap = gen_inputs(v, w, seed=23)
    hs_counter = ModexpCounter()
    hs_cache = psica.build_hs_cache(server, group1024, hs_counter)
    assert hs_counter.fdh == w and hs_counter.element == 0

    client_counter = ModexpCounter()
    server_counter = ModexpCounter()
    state, request = psica.client_prepare(client, group1024, client_counter)
    response, _ = psica.server_respond(request, hs_cache, group1024, counter=server_counter)
    assert psica.client_finish(state, response, client_counter) == overlap

    assert client_counter.element + client_counter.public == 2 * (v + 1)
    assert (client_counter.element, client_counter.public) == (2 * v, 2)
    assert client_counter.fdh == v
    assert server_counter.element == v + w
    assert server_counter.public == 2
    assert server_counter.validate == v + 1  # hardening checks, tallied apart


def test_validation_skip_drops_the_validate_bucket(group1024):
    client, server, _ = gen_inputs(3, 4, seed=24)
    hs_cache = psica.build_hs_cache(server, group1024)
    _, request = psica.client_prepare(client, group1024)
    counter = ModexpCounter()
    psica.server_respond(request, hs_cache, group1024, counter=counter, validate=False)
    assert counter.validate == 0
    assert counter.element == 3 + 4


def test_empty_inputs(group1024):
    with pytest.raises(EmptyInputError):
        psica.client_prepare([], group1024)
    with pytest.raises(ProtocolViolationError):
        psica.server_respond(psica.PsiCaRequest(x=group1024.g, a=[]), [], group1024)


def test_empty_server_set_yields_zero(group1024):
    client = make_elements(3, seed=25)
    assert _run_round(client, [], group1024) == 0


def test_v_max_enforced(group1024):
    client, server, _ = gen_inputs(4, 2, seed=26)
    hs_cache = psica.build_hs_cache(server, group1024)
    _, request = psica.client_prepare(client, group1024)
    with pytest.raises(LimitExceededError):
        psica.server_respond(request, hs_cache, group1024, v_max=3)


def test_non_subgroup_values_rejected(group1024):
    client, server, _ = gen_inputs(2, 2, seed=27)
    hs_cache = psica.build_hs_cache(server, group1024)
    _, request = psica.client_prepare(client, group1024)
    # p-1 has order 2, which is outside the odd-order subgroup
    bad_a = psica.PsiCaRequest(x=request.x, a=[request.a[0], group1024.p - 1])
    with pytest.raises(ProtocolViolationError):
        psica.server_respond(bad_a, hs_cache, group1024)
    bad_x = psica.PsiCaRequest(x=group1024.p - 1, a=request.a)
    with pytest.raises(ProtocolViolationError):
        psica.server_respond(bad_x, hs_cache, group1024)
    # the same values pass when validation is explicitly skipped
    psica.server_respond(bad_a, hs_cache, group1024, validate=False)


def test_fresh_randomness_every_round(group1024):
    client, server, _ = gen_inputs(1, 2, seed=28, overlap=1)
    hs_cache = psica.build_hs_cache(server, group1024)
    xs, ys = set(), set()
    for _ in range(100):
        state, request = psica.client_prepare(client, group1024)
        response, _ = psica.server_respond(request, hs_cache, group1024)
        xs.add(request.x)
        ys.add(response.y)
        assert psica.client_finish(state, response) == 1
    assert len(xs) == 100 and len(ys) == 100


def test_response_length_mismatch_rejected(group1024):
    client, server, _ = gen_inputs(3, 3, seed=29)
    hs_cache = psica.build_hs_cache(server, group1024)
    state, request = psica.client_prepare(client, group1024)
    response, _ = psica.server_respond(request, hs_cache, group1024)
    truncated = psica.PsiCaResponse(y=response.y, a_prime=response.a_prime[:-1], ts=response.ts)
    with pytest.raises(ProtocolViolationError):
        psica.client_finish(state, truncated)


def test_count_never_exceeds_client_size(group1024):
    # a forged response replaying one re-blinded value cannot inflate the count
    client, server, _ = gen_inputs(2, 3, seed=30, overlap=2)
    hs_cache = psica.build_hs_cache(server, group1024)
    state, request = psica.client_prepare(client, group1024)
    response, _ = psica.server_respond(request, hs_cache, group1024)
    forged = psica.PsiCaResponse(y=response.y, a_prime=[response.a_prime[0]] * 2, ts=response.ts * 3)
    assert psica.client_finish(state, forged) <= 2


def test_white_box_unblinding_identity(group1024, toy_group):
    for params in (toy_group, group1024):
        client, server, _ = gen_inputs(3, 4, seed=31)
        hs_cache = psica.build_hs_cache(server, params)
        state, request = psica.client_prepare(client, params)
        response, eph = psica.server_respond(request, hs_cache, params)
        p = params.p
        # what the client strips down to, recomputed from both sides' secrets
        shared = mod_pow(response.y, state.secret_exp, p)
        assert shared == mod_pow(request.x, eph.secret_exp, p)
        unblind = mod_inv(state.blind_exp, params.q)
        client_tags = sorted(element_tag(shared * mod_pow(z, unblind, p) % p, p) for z in response.a_prime)
        expected = sorted(
            element_tag(shared * mod_pow(hash_to_subgroup(el, p, params.q), eph.blind_exp, p) % p, p)
            for el in state.elements
        )
        assert client_tags == expected


def test_server_shuffle_is_uniform(group1024):
    """Chi-square over all 24 orderings of a 4-element response."""
    client, server, _ = gen_inputs(4, 1, seed=32)
    hs_cache = psica.build_hs_cache(server, group1024)
    _, request = psica.client_prepare(client, group1024)
    # p=0.001 per attempt; one retry bounds the false-failure rate at 1e-6
    for attempt in range(2):
        counts = {}
        for _ in range(1000):
            response, eph = psica.server_respond(request, hs_cache, group1024, validate=False)
            order = {mod_pow(z, eph.blind_exp, group1024.p): i for i, z in enumerate(request.a)}
            perm = tuple(order[z] for z in response.a_prime)
            counts[perm] = counts.get(perm, 0) + 1
        assert sum(counts.values()) == 1000 and len(counts) <= 24
        expected = 1000 / 24
        chi2 = sum(
            (counts.get(perm, 0) - expected) ** 2 / expected for perm in itertools.permutations(range(4))
        )
        if chi2 < _CHI2_DF23:
            return
    pytest.fail("response shuffle failed the uniformity check twice")


def test_tag_width_is_256_bits(group1024):
    client, server, _ = gen_inputs(2, 3, seed=33)
    hs_cache = psica.build_hs_cache(server, group1024)
    _, request = psica.client_prepare(client, group1024)
    response, _ = psica.server_respond(request, hs_cache, group1024)
    assert all(len(t) == 32 for t in response.ts)


def test_inputs_checked_for_element_shape(group1024):
    with pytest.raises(ValueError):
        psica.client_prepare([b"short"], group1024)
    with pytest.raises(ValueError):
        psica.build_hs_cache([b"x" * 17], group1024)


def test_seeded_inputs_are_reproducible():
    a = gen_inputs(10, 20, seed=99)
    b = gen_inputs(10, 20, seed=99)
    assert a == b
    rng_differs = gen_inputs(10, 20, seed=100)
    assert rng_differs != a
