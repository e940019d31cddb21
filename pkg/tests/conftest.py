"""Shared fixtures and independent oracles for the test suite.

The oracle implementations here deliberately avoid the package's own
count bookkeeping: probabilities are recomputed from a raw event list on
every query, so agreement with the library is a real cross-check rather
than the same code running twice.
"""

from __future__ import annotations

import random

import pytest

from rbaprivacy.datagen import (
    DatasetProfile,
    generate,
    synthetic_blocklist_lines,
    synthetic_geomap_pairs,
)


# -- brute-force risk-score oracle ---------------------------------------


def oracle_probability(
    count: int, total: int, vocab: int, alpha, floor: float, empty_floor: bool
) -> float:
    if total == 0 and (empty_floor or alpha is None):
        return floor
    if alpha is None:
        return count / total if count > 0 else floor
    return (count + alpha) / (total + alpha * (vocab + 1))


def oracle_score(events, user_id, values, alpha=1.0, floor=1e-4, prior_ratio=1.0):
    """Score one attempt by recounting the raw event log term by term.

    `events` is a list of (user_id, value-tuple) pairs; `values` is the
    queried feature vector. Every count, total, and vocabulary size is
    recomputed from scratch for every feature.
    """
    d = len(values)
    total = len(events)
    user_events = [ev for u, ev in events if u == user_id]
    score = prior_ratio
    for k in range(d):
        g_count = sum(1 for _, ev in events if ev[k] == values[k])
        g_vocab = len({ev[k] for _, ev in events})
        p_g = oracle_probability(g_count, total, g_vocab, alpha, floor, False)
        u_count = sum(1 for ev in user_events if ev[k] == values[k])
        u_vocab = len({ev[k] for ev in user_events})
        p_u = oracle_probability(u_count, len(user_events), u_vocab, alpha, floor, True)
        score *= p_g / p_u
    return score


def random_toy_instance(rng: random.Random, max_users=5, max_logins=20, max_vocab=6):
    """A small random event log plus a random query, for oracle checks."""
    n_users = rng.randint(1, max_users)
    users = [f"u{i}" for i in range(n_users)]
    d = rng.randint(1, 3)
    vocabs = [
        [f"f{k}v{j}" for j in range(rng.randint(1, max_vocab))] for k in range(d)
    ]
    n_events = rng.randint(0, max_logins)
    events = [
        (rng.choice(users), tuple(rng.choice(vocabs[k]) for k in range(d)))
        for _ in range(n_events)
    ]
    query_user = rng.choice(users + ["stranger"])
    query = tuple(rng.choice(vocabs[k] + [f"f{k}unseen"]) for k in range(d))
    return events, query_user, query, d


# -- dataset fixtures ----------------------------------------------------


@pytest.fixture(scope="session")
def small_profile():
    return DatasetProfile(n_users=30, total_logins=400, seed=7)


@pytest.fixture(scope="session")
def small_dataset(small_profile):
    return generate(small_profile)


@pytest.fixture(scope="session")
def small_blocklist_file(tmp_path_factory, small_profile):
    path = tmp_path_factory.mktemp("attack") / "blocklist.txt"
    path.write_text("\n".join(synthetic_blocklist_lines(small_profile)) + "\n")
    return str(path)


@pytest.fixture(scope="session")
def small_geomap_file(tmp_path_factory, small_profile):
    path = tmp_path_factory.mktemp("geo") / "geomap.csv"
    lines = [f"{cidr},{region}" for cidr, region in synthetic_geomap_pairs(small_profile)]
    path.write_text("\n".join(lines) + "\n")
    return str(path)
