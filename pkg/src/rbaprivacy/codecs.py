"""Privacy codecs for login features.

Transforms raw feature values (IPv4 address, user-agent string) into the
categorical tokens the risk model consumes: bit truncation of addresses,
salted iterated hashing, and coarse-graining of browser version numbers.
All operations are pure; token text forms are dotted-quad for addresses
and lowercase hex for hashes.
"""

from __future__ import annotations

import hashlib
import ipaddress
import re
from dataclasses import dataclass

from .errors import ConfigError, DataFormatError

DIGEST_ID = "sha256"

_VERSION_RE = re.compile(r"(\d+)(?:\.\d+)+")


def parse_ipv4(text: str) -> ipaddress.IPv4Address:
    """Parse a dotted-quad IPv4 address. IPv6 input is rejected."""
    try:
        addr = ipaddress.ip_address(text.strip())
    except ValueError as exc:
        raise DataFormatError(f"invalid IPv4 address {text!r}") from exc
    if addr.version != 4:
        raise DataFormatError(f"IPv6 address not supported: {text!r}")
    return addr


def truncate_ip(ip: ipaddress.IPv4Address, bits: int) -> ipaddress.IPv4Address:
    """Zero the last `bits` bits of a 32-bit address, keeping the rest.

    Idempotent, and coarsening is monotone in `bits`: addresses equal
    after truncating b1 bits stay equal after truncating b2 >= b1 bits.
    """
    if not 0 <= bits <= 32:
        raise ConfigError(f"truncation bits must be in [0, 32], got {bits}")
    mask = (0xFFFFFFFF << bits) & 0xFFFFFFFF
    return ipaddress.IPv4Address(int(ip) & mask)


@dataclass(frozen=True)
class HashPolicy:
    """Salted iterated hashing of feature values.

    The salt is appended once, innermost; further iterations hash the raw
    digest of the previous round. A single global salt is required so that
    identical values map to identical tokens across users.
    """

    salt: bytes
    iterations: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("hash iterations must be >= 1")
        if not isinstance(self.salt, bytes):
            raise ConfigError("salt must be a byte string")


def hash_value(raw: bytes | str, policy: HashPolicy) -> str:
    """Hash `raw` with the policy's salt and iteration count.

    Returns the final digest as lowercase hex. Deterministic; distinct
    inputs collide only with negligible probability.
    """
    data = raw.encode("utf-8") if isinstance(raw, str) else raw
    digest = hashlib.sha256(data + policy.salt).digest()
    for _ in range(policy.iterations - 1):
        digest = hashlib.sha256(digest).digest()
    return digest.hex()


def coarse_user_agent(ua: str) -> str:
    """Reduce every dotted version number in a user-agent string to its
    major component. Strings without a dotted version (including the
    empty string) are opaque and pass through unchanged.
    """
    return _VERSION_RE.sub(lambda m: m.group(1), ua)


@dataclass(frozen=True)
class CodecConfig:
    """Per-feature transform pipeline applied before a value enters the
    history store. Order is fixed: truncate, then coarsen, then hash.
    """

    truncation_bits: int = 0
    coarsen_ua: bool = False
    hash_policy: HashPolicy | None = None

    def __post_init__(self):
        if not 0 <= self.truncation_bits <= 32:
            raise ConfigError(
                f"truncation bits must be in [0, 32], got {self.truncation_bits}"
            )

    def encode_ip(self, raw_ip: str) -> str:
        token = str(truncate_ip(parse_ipv4(raw_ip), self.truncation_bits))
        if self.hash_policy is not None:
            token = hash_value(token, self.hash_policy)
        return token

    def encode_ua(self, raw_ua: str) -> str:
        token = coarse_user_agent(raw_ua) if self.coarsen_ua else raw_ua
        if self.hash_policy is not None:
            token = hash_value(token, self.hash_policy)
        return token

    def encode(self, raw_ip: str, raw_ua: str) -> tuple[str, str]:
        return (self.encode_ip(raw_ip), self.encode_ua(raw_ua))
