"""Attacker attempt simulation.

Three attacker models of increasing knowledge about the victim:

* naive      — random IP from a worldwide blocklist pool;
* vpn        — random blocklist IP located in the victim's region;
* targeted   — a distinct (IP, user-agent) combination observed for some
               user other than the victim.

Attempts are sampled from raw (pre-codec) feature values; privacy codecs
are applied downstream by the replay, exactly as for legitimate logins.
All sampling goes through an injected random generator, so a fixed seed
yields a bit-reproducible attempt stream.
"""

from __future__ import annotations

import csv
import ipaddress
import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .codecs import parse_ipv4
from .errors import AttackMaterialError, ConfigError, DataFormatError

if TYPE_CHECKING:
    from .dataio import Dataset

ATTACKER_KINDS = ("naive", "vpn", "targeted")
DEFAULT_REGION = "other"


class GeoMap:
    """CIDR-prefix to region-label map with longest-prefix-wins lookup
    and a default region, making it a total function over IPv4.
    """

    def __init__(self, entries: list[tuple[str, str]], default_region: str = DEFAULT_REGION):
        self._networks: list[tuple[ipaddress.IPv4Network, str]] = []
        for cidr, region in entries:
            try:
                net = ipaddress.ip_network(cidr, strict=False)
            except ValueError as exc:
                raise DataFormatError(f"invalid CIDR {cidr!r}") from exc
            if net.version != 4:
                raise DataFormatError(f"IPv6 prefix not supported: {cidr!r}")
            self._networks.append((net, region))
        self._networks.sort(key=lambda item: item[0].prefixlen, reverse=True)
        self.default_region = default_region
        self._cache: dict[str, str] = {}

    @classmethod
    def from_csv(cls, path: str, default_region: str = DEFAULT_REGION) -> "GeoMap":
        entries = []
        with open(path, newline="") as fh:
            for row_no, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                if len(row) != 2:
                    raise DataFormatError("expected 'cidr,region'", row=row_no)
                entries.append((row[0].strip(), row[1].strip()))
        return cls(entries, default_region=default_region)

    def region_of(self, ip: str) -> str:
        cached = self._cache.get(ip)
        if cached is not None:
            return cached
        addr = parse_ipv4(ip)
        region = self.default_region
        for net, label in self._networks:
            if addr in net:
                region = label
                break
        self._cache[ip] = region
        return region


def load_blocklist(
    path: str, max_per_range: int = 256, rng: random.Random | None = None
) -> list[str]:
    """Read a blocklist of one IPv4 address or CIDR range per line.

    Lines starting with '#' and blank lines are ignored. Ranges no larger
    than `max_per_range` are expanded fully; larger ranges contribute
    `max_per_range` uniformly sampled distinct addresses. Duplicates are
    removed, preserving first-seen order.
    """
    rng = rng if rng is not None else random.Random(0)
    seen: dict[str, None] = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                if "/" in text:
                    net = ipaddress.ip_network(text, strict=False)
                    if net.version != 4:
                        raise ValueError("IPv6 range")
                    size = net.num_addresses
                    base = int(net.network_address)
                    if size <= max_per_range:
                        offsets = range(size)
                    else:
                        offsets = sorted(rng.sample(range(size), max_per_range))
                    for off in offsets:
                        seen.setdefault(str(ipaddress.IPv4Address(base + off)), None)
                else:
                    seen.setdefault(str(parse_ipv4(text)), None)
            except (ValueError, DataFormatError) as exc:
                raise DataFormatError(f"invalid blocklist entry {text!r}: {exc}", row=line_no) from exc
    return list(seen)


@dataclass
class AttackerModel:
    """Material for sampling one attacker kind against any victim."""

    kind: str
    ip_pool: list[str]
    ua_pool: list[str]
    ip_regions: dict[str, str] = field(default_factory=dict)
    ips_by_region: dict[str, list[str]] = field(default_factory=dict)
    user_regions: dict[str, str] = field(default_factory=dict)
    combos: list[tuple[str, str]] = field(default_factory=list)
    combo_users: dict[tuple[str, str], set[str]] = field(default_factory=dict)
    unique_combo_count: dict[str, int] = field(default_factory=dict)


def _modal_region(ips: list[str], geomap: GeoMap) -> str:
    counts: dict[str, int] = {}
    for ip in ips:
        region = geomap.region_of(ip)
        counts[region] = counts.get(region, 0) + 1
    return max(counts.items(), key=lambda item: item[1])[0]


def build_attacker_model(
    kind: str,
    dataset: Dataset,
    ip_feature: str = "ip",
    ua_feature: str = "user_agent",
    blocklist: list[str] | None = None,
    geomap: GeoMap | None = None,
) -> AttackerModel:
    if kind not in ATTACKER_KINDS:
        raise ConfigError(f"unknown attacker kind {kind!r}")
    try:
        ip_idx = dataset.feature_ids.index(ip_feature)
        ua_idx = dataset.feature_ids.index(ua_feature)
    except ValueError as exc:
        raise ConfigError(f"dataset lacks features {ip_feature!r}/{ua_feature!r}") from exc

    ua_pool = [ev.values[ua_idx] for ev in dataset.events]
    if not ua_pool:
        raise AttackMaterialError("dataset has no login events")
    model = AttackerModel(kind=kind, ip_pool=[], ua_pool=ua_pool)

    if kind in ("naive", "vpn"):
        if not blocklist:
            raise AttackMaterialError(f"{kind} attacker needs a non-empty blocklist")
        model.ip_pool = list(blocklist)
    if kind == "vpn":
        if geomap is None:
            raise ConfigError("vpn attacker needs a geo map")
        for ip in model.ip_pool:
            region = geomap.region_of(ip)
            model.ip_regions[ip] = region
            model.ips_by_region.setdefault(region, []).append(ip)
        per_user_ips: dict[str, list[str]] = {}
        for ev in dataset.events:
            per_user_ips.setdefault(ev.user_id, []).append(ev.values[ip_idx])
        model.user_regions = {
            user: _modal_region(ips, geomap) for user, ips in per_user_ips.items()
        }
    if kind == "targeted":
        for ev in dataset.events:
            combo = (ev.values[ip_idx], ev.values[ua_idx])
            users = model.combo_users.get(combo)
            if users is None:
                model.combos.append(combo)
                model.combo_users[combo] = {ev.user_id}
            else:
                users.add(ev.user_id)
        for combo, users in model.combo_users.items():
            if len(users) == 1:
                (owner,) = users
                model.unique_combo_count[owner] = model.unique_combo_count.get(owner, 0) + 1
    return model


def sample_attempt(
    model: AttackerModel, victim_id: str, rng: random.Random
) -> tuple[str, str]:
    """Draw one raw (ip, user_agent) attacker attempt against `victim_id`."""
    if model.kind == "naive":
        return rng.choice(model.ip_pool), rng.choice(model.ua_pool)
    if model.kind == "vpn":
        region = model.user_regions.get(victim_id, DEFAULT_REGION)
        pool = model.ips_by_region.get(region)
        if not pool:
            raise AttackMaterialError(
                f"no attacker material: no blocklist IPs in region {region!r}"
            )
        return rng.choice(pool), rng.choice(model.ua_pool)
    if model.kind == "targeted":
        eligible = len(model.combos) - model.unique_combo_count.get(victim_id, 0)
        if eligible <= 0:
            raise AttackMaterialError(
                "no attacker material: every feature combination is unique to the victim"
            )
        while True:
            combo = model.combos[rng.randrange(len(model.combos))]
            if model.combo_users[combo] != {victim_id}:
                return combo
    raise ConfigError(f"unknown attacker kind {model.kind!r}")


def presample_attempts(
    dataset: Dataset,
    models: dict[str, AttackerModel],
    attempts_per_victim: int,
    rng: random.Random,
) -> dict[str, list[tuple[str, str]]]:
    """Sample the full attacker attempt stream for a chronological replay.

    For each login event, each model contributes `attempts_per_victim`
    attempts against that event's user, in a fixed model order; the
    resulting per-model lists are event-major. Sampling only depends on
    the dataset and the generator, never on replay state.
    """
    out: dict[str, list[tuple[str, str]]] = {kind: [] for kind in models}
    for ev in dataset.events:
        for kind, model in models.items():
            samples = out[kind]
            for _ in range(attempts_per_victim):
                samples.append(sample_attempt(model, ev.user_id, rng))
    return out
