"""Privacy codec tests: IP truncation, salted iterated hashing, and
user-agent coarsening."""

from __future__ import annotations

import hashlib
import ipaddress
import random
import re

import pytest
from hypothesis import given, strategies as st

from rbaprivacy.codecs import (
    CodecConfig,
    HashPolicy,
    coarse_user_agent,
    hash_value,
    parse_ipv4,
    truncate_ip,
)
from rbaprivacy.errors import ConfigError, DataFormatError


# -- parsing -------------------------------------------------------------


def test_parse_round_trips_dotted_quad():
    assert str(parse_ipv4("192.168.1.166")) == "192.168.1.166"
    assert str(parse_ipv4(" 10.0.0.1 ")) == "10.0.0.1"


@pytest.mark.parametrize("bad", ["", "1.2.3", "1.2.3.256", "::1", "2001:db8::1", "junk"])
def test_parse_rejects_non_ipv4(bad):
    with pytest.raises(DataFormatError):
        parse_ipv4(bad)


# -- truncation ----------------------------------------------------------


def test_truncate_unit_vector():
    assert str(truncate_ip(parse_ipv4("192.168.1.166"), 8)) == "192.168.1.0"


def test_truncate_identity_and_full():
    ip = parse_ipv4("192.168.1.166")
    assert str(truncate_ip(ip, 0)) == "192.168.1.166"
    assert str(truncate_ip(ip, 32)) == "0.0.0.0"


@pytest.mark.parametrize("bits", [-1, 33, 100])
def test_truncate_rejects_out_of_range_bits(bits):
    with pytest.raises(ConfigError):
        truncate_ip(parse_ipv4("1.2.3.4"), bits)


def test_truncate_properties_over_many_random_pairs():
    """Idempotence and monotone coarsening over 10^5 random (ip, bits) pairs."""
    rng = random.Random(20240817)
    for _ in range(100_000):
        addr = ipaddress.IPv4Address(rng.getrandbits(32))
        b1 = rng.randint(0, 32)
        t1 = truncate_ip(addr, b1)
        # idempotence
        assert truncate_ip(t1, b1) == t1
        # prefix preserved, suffix zeroed
        assert int(t1) >> b1 == int(addr) >> b1
        assert int(t1) & ((1 << b1) - 1) == 0
        # monotone coarsening: equal after b1 bits stays equal after b2 >= b1
        other = ipaddress.IPv4Address(rng.getrandbits(32))
        b2 = rng.randint(b1, 32)
        if truncate_ip(other, b1) == t1:
            assert truncate_ip(other, b2) == truncate_ip(addr, b2)


@given(st.integers(0, 2**32 - 1), st.integers(0, 32), st.integers(0, 32))
def test_truncate_composition_collapses_to_max(ip_int, b1, b2):
    addr = ipaddress.IPv4Address(ip_int)
    assert truncate_ip(truncate_ip(addr, b1), b2) == truncate_ip(addr, max(b1, b2))


# -- hashing -------------------------------------------------------------


def test_hash_deterministic():
    policy = HashPolicy(salt=b"0123456789abcdef")
    assert hash_value("192.168.1.166", policy) == hash_value("192.168.1.166", policy)


def test_hash_distinct_inputs_distinct_tokens():
    policy = HashPolicy(salt=b"0123456789abcdef")
    assert hash_value("192.168.1.166", policy) != hash_value("192.168.1.167", policy)


def test_hash_salt_changes_token():
    a = hash_value("x", HashPolicy(salt=b"salt-aaaaaaaaaaa"))
    b = hash_value("x", HashPolicy(salt=b"salt-bbbbbbbbbbb"))
    assert a != b


def test_hash_iteration_composition_oracle():
    """iterations=3 equals hashing (value || salt) once and then re-hashing
    the raw digest twice: the salt enters only in the innermost round."""
    salt = b"0123456789abcdef"
    policy3 = HashPolicy(salt=salt, iterations=3)
    digest = hashlib.sha256(b"192.168.1.0" + salt).digest()
    digest = hashlib.sha256(digest).digest()
    digest = hashlib.sha256(digest).digest()
    assert hash_value("192.168.1.0", policy3) == digest.hex()


def test_hash_output_is_lowercase_hex_of_fixed_length():
    token = hash_value("anything", HashPolicy(salt=b"0123456789abcdef"))
    assert re.fullmatch(r"[0-9a-f]{64}", token)


def test_hash_no_collisions_on_many_inputs():
    policy = HashPolicy(salt=b"0123456789abcdef")
    tokens = {hash_value(f"input-{i}", policy) for i in range(100_000)}
    assert len(tokens) == 100_000


def test_hash_policy_validation():
    with pytest.raises(ConfigError):
        HashPolicy(salt=b"x", iterations=0)
    with pytest.raises(ConfigError):
        HashPolicy(salt="not-bytes")  # type: ignore[arg-type]


# -- user-agent coarsening -----------------------------------------------

# independently written rule: take the text before the first '.' of every
# digits-dot-digits run
_ORACLE_RE = re.compile(r"\d+(?:\.\d+)+")


def _oracle_coarse(ua: str) -> str:
    return _ORACLE_RE.sub(lambda m: m.group(0).split(".", 1)[0], ua)


def test_coarse_user_agent_example():
    assert coarse_user_agent("Browser/87.0.4280.88 OS/10.0") == "Browser/87 OS/10"


def test_coarse_user_agent_empty_passthrough():
    assert coarse_user_agent("") == ""


def test_coarse_user_agent_idempotent_on_major_only():
    assert coarse_user_agent("Browser/87 OS/10") == "Browser/87 OS/10"


@given(st.text(alphabet="abcZ/(). 0123456789", max_size=40))
def test_coarse_user_agent_matches_oracle(ua):
    coarse = coarse_user_agent(ua)
    assert coarse == _oracle_coarse(ua)
    # idempotence
    assert coarse_user_agent(coarse) == coarse


# -- codec pipeline ------------------------------------------------------


def test_codec_order_truncate_then_hash():
    policy = HashPolicy(salt=b"0123456789abcdef")
    codec = CodecConfig(truncation_bits=8, hash_policy=policy)
    assert codec.encode_ip("192.168.1.166") == hash_value("192.168.1.0", policy)


def test_codec_hash_preserves_truncation_equivalence_classes():
    """Hashing after truncation merges exactly the values truncation merges."""
    policy = HashPolicy(salt=b"0123456789abcdef")
    plain = CodecConfig(truncation_bits=12)
    hashed = CodecConfig(truncation_bits=12, hash_policy=policy)
    rng = random.Random(3)
    ips = [str(ipaddress.IPv4Address(rng.getrandbits(32))) for _ in range(500)]
    for a in ips:
        for b in ips[:20]:
            same_plain = plain.encode_ip(a) == plain.encode_ip(b)
            same_hashed = hashed.encode_ip(a) == hashed.encode_ip(b)
            assert same_plain == same_hashed


def test_codec_ua_coarsen_then_hash():
    policy = HashPolicy(salt=b"0123456789abcdef")
    codec = CodecConfig(coarsen_ua=True, hash_policy=policy)
    assert codec.encode_ua("Browser/87.0.1 OS/10.0") == hash_value("Browser/87 OS/10", policy)


def test_codec_config_validates_bits():
    with pytest.raises(ConfigError):
        CodecConfig(truncation_bits=40)
