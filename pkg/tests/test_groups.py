"""Group parameter validation, generation, and file round trips."""

import pytest

from psitrace.arith import ModexpCounter, miller_rabin
from psitrace.errors import ConfigError
from psitrace.groups import (
    GroupParams,
    generate_group_params,
    load_params,
    params_from_json,
    params_to_json,
    save_params,
)


def test_bundled_params_validate(group1024):
    group1024.validate()
    assert group1024.p.bit_length() == 1024
    assert group1024.q.bit_length() == 160
    assert (group1024.p - 1) % group1024.q == 0


def test_bundled_params_prime_by_independent_oracle(group1024):
    assert miller_rabin(group1024.p, rounds=16)
    assert miller_rabin(group1024.q, rounds=16)


def test_toy_params_validate(toy_group):
    toy_group.validate()
    assert (toy_group.p, toy_group.q) == (23, 11)
    assert pow(toy_group.g, toy_group.q, toy_group.p) == 1


def test_generator_has_order_q(group1024):
    assert group1024.g != 1
    assert pow(group1024.g, group1024.q, group1024.p) == 1


def test_subgroup_membership(toy_group):
    p, q, g = toy_group.p, toy_group.q, toy_group.g
    for k in range(1, q):
        assert toy_group.is_subgroup_element(pow(g, k, p))
    assert not toy_group.is_subgroup_element(p - 1)  # order 2, not in the odd-order subgroup
    assert not toy_group.is_subgroup_element(0)
    assert not toy_group.is_subgroup_element(p)


def test_subgroup_check_counts_as_validate(toy_group):
    counter = ModexpCounter()
    toy_group.is_subgroup_element(toy_group.g, counter)
    assert counter.validate == 1
    assert counter.element == 0


def test_validate_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        GroupParams(p=25, q=11, g=4).validate()  # composite p
    with pytest.raises(ConfigError):
        GroupParams(p=23, q=12, g=4).validate()  # composite q
    with pytest.raises(ConfigError):
        GroupParams(p=23, q=7, g=4).validate()  # q does not divide p-1
    with pytest.raises(ConfigError):
        GroupParams(p=23, q=11, g=1).validate()  # degenerate generator
    with pytest.raises(ConfigError):
        GroupParams(p=23, q=11, g=5).validate()  # order 22, not 11
    with pytest.raises(ConfigError):
        GroupParams(p=23, q=11, g=4, kappa=128).validate()  # tag width is fixed


def test_generate_small_params():
    params = generate_group_params(p_bits=512, q_bits=160)
    params.validate()
    assert params.p.bit_length() == 512
    assert params.q.bit_length() == 160


def test_generate_rejects_weak_sizes():
    with pytest.raises(ConfigError):
        generate_group_params(p_bits=256, q_bits=160)
    with pytest.raises(ConfigError):
        generate_group_params(p_bits=512, q_bits=128)
    with pytest.raises(ConfigError):
        generate_group_params(p_bits=512, q_bits=512)


def test_params_json_roundtrip(group1024):
    assert params_from_json(params_to_json(group1024)) == group1024


def test_params_file_roundtrip(tmp_path, toy_group):
    path = tmp_path / "group.json"
    save_params(toy_group, path)
    assert load_params(path) == toy_group


def test_malformed_params_rejected():
    for text in ("not json", "{}", '{"p": "17", "q": "zz", "g": "2"}', '{"p": "13", "q": "5", "g": "2"}'):
        with pytest.raises(ConfigError):
            params_from_json(text)
