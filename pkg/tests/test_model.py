"""Risk-model tests: probability estimation, scoring, classification,
and the core invariants (determinism, monotonicity, recoding invariance,
agreement with a brute-force recount oracle)."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from rbaprivacy.errors import ConfigError
from rbaprivacy.model import (
    Decision,
    FeatureVector,
    RiskConfig,
    RiskScore,
    classify,
    global_probability,
    risk_score,
    user_probability,
)
from rbaprivacy.store import HistoryStore

from conftest import oracle_score, random_toy_instance


def _store_from_events(events, feature_ids=("ip", "user_agent")):
    d = len(feature_ids)
    store = HistoryStore(feature_ids[:d])
    for user_id, values in events:
        store.record_login(user_id, FeatureVector(values))
    return store


def _ingest(store, user_id, values, times=1):
    for _ in range(times):
        store.record_login(user_id, FeatureVector(values))


# -- validation ----------------------------------------------------------


def test_feature_vector_rejects_empty():
    with pytest.raises(ConfigError):
        FeatureVector(())
    with pytest.raises(ConfigError):
        FeatureVector(("a", ""))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"attack_prior": 0.0},
        {"attack_prior": 1.5},
        {"legit_prior": -1.0},
        {"alpha": 0.0},
        {"alpha": -2.0},
        {"unseen_floor": 0.0},
    ],
)
def test_risk_config_validation(kwargs):
    with pytest.raises(ConfigError):
        RiskConfig(**kwargs)


# -- global probability --------------------------------------------------


def test_global_probability_single_value_history():
    store = HistoryStore(("ip",))
    _ingest(store, "u1", ("A",), times=4)
    config = RiskConfig(alpha=None)
    assert global_probability(store, config, "ip", "A") == 1.0


def test_global_probability_direct_frequency():
    store = HistoryStore(("ip",))
    _ingest(store, "u1", ("A",), times=3)
    _ingest(store, "u2", ("B",))
    config = RiskConfig(alpha=None)
    assert global_probability(store, config, "ip", "B") == 0.25


def test_global_probability_add_alpha_unseen():
    """Counts {A:3, B:1}, unseen query, alpha=1: (0+1)/(4+1*(2+1)) = 1/7."""
    store = HistoryStore(("ip",))
    _ingest(store, "u1", ("A",), times=3)
    _ingest(store, "u2", ("B",))
    config = RiskConfig(alpha=1.0)
    assert global_probability(store, config, "ip", "C") == pytest.approx(1 / 7, rel=1e-12)


def test_global_probability_unknown_feature():
    store = HistoryStore(("ip",))
    with pytest.raises(ConfigError):
        global_probability(store, RiskConfig(), "nope", "A")


def test_global_probability_never_zero():
    store = HistoryStore(("ip",))
    _ingest(store, "u1", ("A",), times=5)
    for config in (RiskConfig(alpha=None), RiskConfig(alpha=1.0)):
        assert 0.0 < global_probability(store, config, "ip", "unseen") <= 1.0


# -- user probability ----------------------------------------------------


def test_user_probability_pure_history():
    store = HistoryStore(("ip",))
    _ingest(store, "u1", ("A",), times=2)
    config = RiskConfig(alpha=None)
    assert user_probability(store, config, "u1", "ip", "A") == 1.0


def test_user_probability_even_split():
    store = HistoryStore(("ip",))
    _ingest(store, "u1", ("A",))
    _ingest(store, "u1", ("B",))
    config = RiskConfig(alpha=None)
    assert user_probability(store, config, "u1", "ip", "A") == 0.5


def test_user_probability_unknown_user_gets_floor():
    store = HistoryStore(("ip",))
    _ingest(store, "u1", ("A",))
    for config in (RiskConfig(alpha=None), RiskConfig(alpha=1.0)):
        assert user_probability(store, config, "ghost", "ip", "A") == config.unseen_floor


# -- risk score ----------------------------------------------------------


def test_risk_score_identity_case():
    """Single user: global and personal histories coincide, score 1."""
    store = HistoryStore(("ip", "user_agent"))
    _ingest(store, "u1", ("A", "X"), times=3)
    score = risk_score(store, RiskConfig(alpha=None), "u1", FeatureVector(("A", "X")))
    assert score.value == 1.0
    assert score.per_feature_ratios == (1.0, 1.0)


def test_risk_score_half():
    """d=1, global p=0.25, user p=0.5, priors 1 -> 0.5."""
    store = HistoryStore(("ip",))
    _ingest(store, "u1", ("A",))
    _ingest(store, "u1", ("B",))
    _ingest(store, "u2", ("C",), times=2)
    score = risk_score(store, RiskConfig(alpha=None), "u1", FeatureVector(("A",)))
    assert score.value == 0.5


def test_risk_score_attacker_vector_scores_higher():
    """In a small hand-built 3-user history, every vocabulary vector whose
    values the victim never used is riskier than the victim's own most
    frequent vector — brute force over the whole toy vocabulary."""
    events = [
        ("u1", ("A", "X")), ("u1", ("A", "X")), ("u1", ("B", "X")),
        ("u2", ("C", "Y")), ("u2", ("C", "Y")),
        ("u3", ("A", "Z")), ("u3", ("C", "Z")),
    ]
    store = _store_from_events(events)
    config = RiskConfig()
    ips = {"A", "B", "C"}
    uas = {"X", "Y", "Z"}
    own_best = {"u1": ("A", "X"), "u2": ("C", "Y"), "u3": ("A", "Z")}
    for user_id, best in own_best.items():
        own = risk_score(store, config, user_id, FeatureVector(best)).value
        used_ips = {v[0] for u, v in events if u == user_id}
        used_uas = {v[1] for u, v in events if u == user_id}
        for ip in ips - used_ips:
            for ua in uas - used_uas:
                attack = risk_score(store, config, user_id, FeatureVector((ip, ua))).value
                assert attack > own


def test_risk_score_prior_ratio_scales_score():
    store = HistoryStore(("ip",))
    _ingest(store, "u1", ("A",), times=2)
    base = risk_score(store, RiskConfig(), "u1", FeatureVector(("A",))).value
    scaled = risk_score(
        store, RiskConfig(attack_prior=0.5, legit_prior=1.0), "u1", FeatureVector(("A",))
    ).value
    assert scaled == pytest.approx(0.5 * base, rel=1e-12)


def test_risk_score_value_consistent_with_ratios():
    store = _store_from_events(
        [("u1", ("A", "X")), ("u2", ("B", "Y")), ("u1", ("B", "X"))]
    )
    config = RiskConfig(attack_prior=0.3, legit_prior=0.6)
    score = risk_score(store, config, "u1", FeatureVector(("B", "Y")))
    product = config.prior_ratio
    for ratio in score.per_feature_ratios:
        product *= ratio
    assert score.value == pytest.approx(product, rel=1e-9)


def test_risk_score_rejects_wrong_arity():
    store = HistoryStore(("ip", "user_agent"))
    with pytest.raises(ConfigError):
        risk_score(store, RiskConfig(), "u1", FeatureVector(("A",)))


# -- classification ------------------------------------------------------


def test_classify_rules():
    assert classify(RiskScore(0.5), 1.0) is Decision.GRANT
    assert classify(RiskScore(1.0), 1.0) is Decision.CHALLENGE  # tie fails closed
    assert classify(RiskScore(2.0), 1.0) is Decision.CHALLENGE


def test_classify_rejects_non_finite_threshold():
    with pytest.raises(ConfigError):
        classify(RiskScore(0.5), float("inf"))


# -- invariants ----------------------------------------------------------


def test_determinism():
    store = _store_from_events([("u1", ("A", "X")), ("u2", ("B", "Y"))])
    config = RiskConfig()
    fv = FeatureVector(("A", "Y"))
    first = risk_score(store, config, "u1", fv).value
    for _ in range(5):
        assert risk_score(store, config, "u1", fv).value == first


def test_monotonicity_in_user_count():
    """Recording more of a value in the user's history never raises the
    risk of that value (checked as the user's history grows)."""
    for config in (RiskConfig(alpha=1.0), RiskConfig(alpha=None)):
        store = HistoryStore(("ip",))
        # background traffic so global probabilities move little
        for i in range(50):
            _ingest(store, f"bg{i}", ("A",))
        fv = FeatureVector(("A",))
        previous = risk_score(store, config, "u1", fv).value
        for _ in range(10):
            _ingest(store, "u1", ("A",))
            current = risk_score(store, config, "u1", fv).value
            assert current <= previous
            previous = current


def test_smoothing_none_matches_exact_count_ratios():
    rng = random.Random(99)
    events, user, query, d = random_toy_instance(rng)
    # only query values present in both histories, so no floor applies
    events = [(u, v) for u, v in events] or [("u0", tuple(f"f{k}v0" for k in range(d)))]
    store = _store_from_events(events, feature_ids=("f0", "f1", "f2")[:d])
    config = RiskConfig(alpha=None)
    seen_user, seen_values = events[0]
    expected = oracle_score(events, seen_user, seen_values, alpha=None)
    got = risk_score(store, config, seen_user, FeatureVector(seen_values)).value
    assert got == pytest.approx(expected, rel=1e-12)


def test_recoding_invariance():
    """Any injective renaming of feature values leaves scores unchanged."""
    rng = random.Random(5)
    for trial in range(20):
        events, user, query, d = random_toy_instance(rng)
        feature_ids = ("f0", "f1", "f2")[:d]
        store = _store_from_events(events, feature_ids=feature_ids)
        config = RiskConfig()
        before = risk_score(store, config, user, FeatureVector(query)).value

        rename = {}

        def code(value: str) -> str:
            return rename.setdefault(value, f"tok{len(rename):04d}")

        recoded_events = [(u, tuple(code(v) for v in values)) for u, values in events]
        recoded_store = _store_from_events(recoded_events, feature_ids=feature_ids)
        recoded_query = tuple(code(v) for v in query)
        after = risk_score(
            recoded_store, config, user, FeatureVector(recoded_query)
        ).value
        assert after == pytest.approx(before, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.booleans())
def test_risk_score_matches_brute_force_oracle(seed, use_alpha):
    events, user, query, d = random_toy_instance(random.Random(seed))
    feature_ids = ("f0", "f1", "f2")[:d]
    store = _store_from_events(events, feature_ids=feature_ids)
    alpha = 1.0 if use_alpha else None
    config = RiskConfig(alpha=alpha)
    expected = oracle_score(events, user, query, alpha=alpha)
    got = risk_score(store, config, user, FeatureVector(query)).value
    assert got == pytest.approx(expected, rel=1e-12)
