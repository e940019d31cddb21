"""Synthetic dataset generator tests: published-statistics targets,
determinism, and structural properties."""

from __future__ import annotations

import ipaddress
from collections import Counter

import pytest

from rbaprivacy.codecs import parse_ipv4
from rbaprivacy.datagen import (
    CITY_REGION,
    DatasetProfile,
    generate,
    synthetic_blocklist_lines,
    synthetic_geomap_pairs,
)
from rbaprivacy.errors import ProfileError


def test_headline_mean_logins_per_user():
    profile = DatasetProfile(n_users=780, total_logins=9555, seed=42)
    dataset = generate(profile)
    per_user = Counter(ev.user_id for ev in dataset.events)
    assert len(per_user) == 780
    mean = sum(per_user.values()) / len(per_user)
    assert mean == pytest.approx(12.25, abs=0.01)
    assert len(dataset.events) == 9555


def test_single_user_profile():
    dataset = generate(DatasetProfile(n_users=1, total_logins=40, seed=3))
    users = {ev.user_id for ev in dataset.events}
    assert len(users) == 1
    times = [ev.timestamp for ev in dataset.events]
    assert all(a < b for a, b in zip(times, times[1:]))


def test_fixed_seed_is_deterministic():
    profile = DatasetProfile(n_users=50, total_logins=700, seed=13)
    a = generate(profile)
    b = generate(profile)
    assert a.feature_ids == b.feature_ids
    assert a.events == b.events


def test_different_seeds_differ():
    a = generate(DatasetProfile(n_users=50, total_logins=700, seed=1))
    b = generate(DatasetProfile(n_users=50, total_logins=700, seed=2))
    assert a.events != b.events


def test_events_globally_sorted_and_per_user_strict():
    dataset = generate(DatasetProfile(n_users=40, total_logins=900, seed=5))
    times = [ev.timestamp for ev in dataset.events]
    assert times == sorted(times)
    per_user_last = {}
    for ev in dataset.events:
        last = per_user_last.get(ev.user_id)
        assert last is None or ev.timestamp > last
        per_user_last[ev.user_id] = ev.timestamp


def test_frequency_mix_within_tolerance():
    """Per-user login counts cluster into the configured frequency classes
    within +-5 percentage points."""
    profile = DatasetProfile(n_users=400, total_logins=40000, seed=21, time_span_days=365)
    dataset = generate(profile)
    per_user = Counter(ev.user_id for ev in dataset.events)
    # class rates are relative (1 : 3/7 : 1/14), scaled to total_logins,
    # so classify against the busiest users' count
    top = max(per_user.values())
    shares = Counter()
    for count in per_user.values():
        if count > 0.7 * top:
            shares["daily"] += 1
        elif count > 0.25 * top:
            shares["several_weekly"] += 1
        else:
            shares["other"] += 1
    for name, target in zip(("daily", "several_weekly", "other"), profile.frequency_mix):
        assert abs(shares[name] / profile.n_users - target) <= 0.05


def test_region_concentration():
    profile = DatasetProfile(n_users=200, total_logins=3000, seed=9)
    dataset = generate(profile)
    city = ipaddress.ip_network(profile.city_cidr)
    modal_in_city = 0
    per_user_ips: dict[str, list] = {}
    for ev in dataset.events:
        per_user_ips.setdefault(ev.user_id, []).append(ev.values[0])
    for ips in per_user_ips.values():
        modal_ip, _ = Counter(ips).most_common(1)[0]
        if parse_ipv4(modal_ip) in city:
            modal_in_city += 1
    share = modal_in_city / len(per_user_ips)
    assert abs(share - profile.region_concentration) <= 0.05


def test_ip_pool_bound_mostly_respected():
    """Outside the 2% outlier rate, each user's addresses come from a pool
    of at most ip_pool_max values."""
    profile = DatasetProfile(n_users=100, total_logins=4000, seed=17, outlier_rate=0.0)
    dataset = generate(profile)
    per_user_ips: dict[str, set] = {}
    for ev in dataset.events:
        per_user_ips.setdefault(ev.user_id, set()).add(ev.values[0])
    assert all(len(ips) <= profile.ip_pool_max for ips in per_user_ips.values())


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_users": 0},
        {"n_users": 10, "total_logins": 5},
        {"frequency_mix": (0.5, 0.5, 0.5)},
        {"region_concentration": 1.5},
        {"ip_pool_min": 0},
        {"ip_pool_min": 5, "ip_pool_max": 4},
        {"outlier_rate": 1.0},
        {"city_cidr": "2001:db8::/32"},
    ],
)
def test_profile_validation(kwargs):
    with pytest.raises(ProfileError):
        DatasetProfile(**kwargs)


def test_synthetic_attack_material_matches_world():
    profile = DatasetProfile(n_users=30, total_logins=300, seed=2)
    lines = synthetic_blocklist_lines(profile)
    assert lines[0].startswith("#")
    city = ipaddress.ip_network(profile.city_cidr)
    ranges = [ipaddress.ip_network(line) for line in lines[1:]]
    assert any(net.subnet_of(city) for net in ranges)  # vpn material exists
    pairs = synthetic_geomap_pairs(profile)
    assert (profile.city_cidr, CITY_REGION) in pairs
