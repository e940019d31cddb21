"""Synthetic login dataset generation.

Produces chronologically ordered login events for a configurable user
population: a login-frequency mix (daily / several-per-week / other),
geographic concentration of most users in one "city" address block,
small per-user pools of stable IP addresses with occasional worldwide
outliers, and a handful of browser user-agent strings per user. Output
is deterministic for a fixed profile and seed.

Also provides synthetic blocklist and geo-map material matched to the
generated world, so attacker simulations never depend on external data.
"""

from __future__ import annotations

import ipaddress
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from .dataio import Dataset, LoginEvent
from .errors import ProfileError

CITY_REGION = "city"
WORLD_REGION = "world"

# first octets for addresses outside the concentrated city block
_OUTSIDE_OCTETS = (23, 37, 62, 77, 91, 141, 185, 203)

_USER_AGENTS = (
    "Chrome/87.0.4280.88 Windows/10.0",
    "Chrome/86.0.4240.198 Windows/10.0",
    "Chrome/87.0.4280.88 MacOS/10.15.7",
    "Firefox/83.0 Windows/10.0",
    "Firefox/82.0.3 Linux/5.9",
    "Safari/14.0.1 MacOS/11.0.1",
    "Safari/14.0 iOS/14.2",
    "Chrome/87.0.4280.66 Android/11",
    "Edge/87.0.664.55 Windows/10.0",
    "Opera/72.0.3815.186 Windows/10.0",
)

# mean daily login rates per frequency class
_CLASS_RATES = {"daily": 1.0, "several_weekly": 3.0 / 7.0, "other": 0.5 / 7.0}


@dataclass(frozen=True)
class DatasetProfile:
    n_users: int = 780
    total_logins: int = 9555
    frequency_mix: tuple[float, float, float] = (0.443, 0.392, 0.165)
    region_concentration: float = 0.9
    ip_pool_min: int = 1
    ip_pool_max: int = 4
    time_span_days: int = 660
    start: datetime = datetime(2018, 8, 1, tzinfo=timezone.utc)
    outlier_rate: float = 0.02
    city_cidr: str = "100.80.0.0/12"
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1:
            raise ProfileError("n_users must be >= 1")
        if self.total_logins < self.n_users:
            raise ProfileError("total_logins must be >= n_users (everyone logs in once)")
        if abs(sum(self.frequency_mix) - 1.0) > 1e-9:
            raise ProfileError("frequency_mix proportions must sum to 1")
        if not 0.0 <= self.region_concentration <= 1.0:
            raise ProfileError("region_concentration must be in [0, 1]")
        if not 1 <= self.ip_pool_min <= self.ip_pool_max:
            raise ProfileError("need 1 <= ip_pool_min <= ip_pool_max")
        if self.time_span_days < 1:
            raise ProfileError("time_span_days must be >= 1")
        if not 0.0 <= self.outlier_rate < 1.0:
            raise ProfileError("outlier_rate must be in [0, 1)")
        net = ipaddress.ip_network(self.city_cidr, strict=False)
        if net.version != 4 or net.prefixlen > 24:
            raise ProfileError("city_cidr must be an IPv4 block of /24 or wider")


def _largest_remainder(total: int, weights: list[float]) -> list[int]:
    """Apportion `total` into integer parts proportional to weights."""
    weight_sum = sum(weights)
    quotas = [total * w / weight_sum for w in weights]
    parts = [int(q) for q in quotas]
    remainder = total - sum(parts)
    order = sorted(range(len(weights)), key=lambda i: quotas[i] - parts[i], reverse=True)
    for i in order[:remainder]:
        parts[i] += 1
    return parts


def _allocate_logins(total: int, weights: list[float]) -> list[int]:
    counts = _largest_remainder(total, weights)
    # everyone logs in at least once; take the surplus from the busiest users
    poor = [i for i, c in enumerate(counts) if c == 0]
    for i in poor:
        counts[i] = 1
    deficit = sum(counts) - total
    while deficit > 0:
        busiest = max(range(len(counts)), key=counts.__getitem__)
        if counts[busiest] <= 1:
            break
        counts[busiest] -= 1
        deficit -= 1
    return counts


def _random_global_ip(rng: random.Random) -> str:
    octet = rng.choice(_OUTSIDE_OCTETS)
    rest = rng.randrange(1 << 24)
    return str(ipaddress.IPv4Address((octet << 24) | rest))


def generate(profile: DatasetProfile) -> Dataset:
    """Generate a login dataset matching the profile.

    Events are globally sorted by timestamp and strictly increasing per
    user; the overall mean logins per user is exactly
    total_logins / n_users.
    """
    rng = random.Random(profile.seed)
    n = profile.n_users

    class_names = list(_CLASS_RATES)
    class_counts = _largest_remainder(n, list(profile.frequency_mix))
    classes: list[str] = []
    for name, count in zip(class_names, class_counts):
        classes.extend([name] * count)
    rng.shuffle(classes)

    city_users = set(rng.sample(range(n), round(profile.region_concentration * n)))

    city_net = ipaddress.ip_network(profile.city_cidr, strict=False)
    city_base = int(city_net.network_address)
    n_city_prefixes = max(city_net.num_addresses // 256, 1)

    weights = [_CLASS_RATES[classes[i]] for i in range(n)]
    login_counts = _allocate_logins(profile.total_logins, weights)

    span_seconds = profile.time_span_days * 86400
    events: list[tuple[datetime, int, str, str, str]] = []
    for i in range(n):
        user_id = f"u{i:05d}"
        pool_size = rng.randint(profile.ip_pool_min, profile.ip_pool_max)
        pool: list[str] = []
        for _ in range(pool_size):
            if i in city_users:
                prefix = city_base + rng.randrange(n_city_prefixes) * 256
            else:
                octet = rng.choice(_OUTSIDE_OCTETS)
                prefix = (octet << 24) | (rng.randrange(1 << 16) << 8)
            host = rng.randrange(1, 255)
            pool.append(str(ipaddress.IPv4Address(prefix | host)))
        # favor the first (home) address
        pool_weights = [0.6, 0.25, 0.1, 0.05][:pool_size]

        ua_count = 1 if rng.random() < 0.7 else 2
        agents = rng.sample(_USER_AGENTS, ua_count)

        seconds = sorted(rng.randrange(span_seconds) for _ in range(login_counts[i]))
        previous = None
        for j, sec in enumerate(seconds):
            ts = profile.start + timedelta(seconds=sec)
            if previous is not None and ts <= previous:
                ts = previous + timedelta(seconds=1)
            previous = ts
            if rng.random() < profile.outlier_rate:
                ip = _random_global_ip(rng)
            else:
                ip = rng.choices(pool, weights=pool_weights)[0]
            ua = agents[0] if ua_count == 1 or rng.random() < 0.8 else agents[1]
            events.append((ts, i, user_id, ip, ua))

    events.sort(key=lambda item: (item[0], item[1]))
    return Dataset(
        feature_ids=("ip", "user_agent"),
        events=[LoginEvent(user_id, ts, (ip, ua)) for ts, _, user_id, ip, ua in events],
        codec_meta={"digest": "sha256", "truncation_bits": "0", "hashed": "false"},
    )


def synthetic_blocklist_lines(
    profile: DatasetProfile, n_ranges: int = 40, seed: int | None = None
) -> list[str]:
    """Blocklist material matched to the generated world: mostly
    worldwide ranges plus a few inside the city block, so VPN attackers
    (who need victim-region addresses) always have material.
    """
    rng = random.Random(profile.seed if seed is None else seed)
    lines = ["# synthetic blocklist"]
    city_net = ipaddress.ip_network(profile.city_cidr, strict=False)
    city_base = int(city_net.network_address)
    n_city_prefixes = max(city_net.num_addresses // 256, 1)
    n_city_ranges = max(n_ranges // 5, 1)
    for _ in range(n_city_ranges):
        prefix = city_base + rng.randrange(n_city_prefixes) * 256
        lines.append(f"{ipaddress.IPv4Address(prefix)}/24")
    for _ in range(n_ranges - n_city_ranges):
        octet = rng.choice(_OUTSIDE_OCTETS)
        prefix = (octet << 24) | (rng.randrange(1 << 16) << 8)
        lines.append(f"{ipaddress.IPv4Address(prefix)}/24")
    return lines


def synthetic_geomap_pairs(profile: DatasetProfile) -> list[tuple[str, str]]:
    """Geo map for the generated world: the city block maps to one
    region, everything else to a worldwide default region.
    """
    pairs = [(profile.city_cidr, CITY_REGION)]
    pairs.extend((f"{octet}.0.0.0/8", WORLD_REGION) for octet in _OUTSIDE_OCTETS)
    return pairs
