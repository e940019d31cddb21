"""Risk-score computation over categorical login-feature histories.

The score for a user and feature vector is the product over features of
p(value in global history) / p(value in the user's own history), times a
configurable attack/legitimate prior ratio. Higher scores are more
suspicious; an access threshold turns the score into a grant/challenge
decision.

Probability estimation uses add-alpha smoothing over the observed
vocabulary plus one unseen pseudo-value, with an absolute floor for
degenerate (empty) histories, so scores stay finite for never-seen
values. Token identity is the only thing that matters: any injective
renaming of feature values leaves every score unchanged.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .errors import ConfigError

if TYPE_CHECKING:
    from .store import HistoryStore


@dataclass(frozen=True)
class FeatureVector:
    """Ordered categorical feature values of one login attempt."""

    values: tuple[str, ...]

    def __post_init__(self):
        if not self.values:
            raise ConfigError("feature vector must not be empty")
        if any(not v for v in self.values):
            raise ConfigError("feature values must be non-empty tokens")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class RiskConfig:
    """Model parameters.

    alpha=None disables smoothing (raw count ratios, floor for unseen);
    otherwise add-alpha smoothing with the given positive alpha is used.
    unseen_floor is the probability assigned when a history is empty, or
    when smoothing is off and the value was never seen.
    """

    attack_prior: float = 1.0
    legit_prior: float = 1.0
    alpha: float | None = 1.0
    unseen_floor: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.attack_prior <= 1.0:
            raise ConfigError("attack_prior must be in (0, 1]")
        if not 0.0 < self.legit_prior <= 1.0:
            raise ConfigError("legit_prior must be in (0, 1]")
        if self.alpha is not None and self.alpha <= 0.0:
            raise ConfigError("alpha must be positive")
        if self.unseen_floor <= 0.0:
            raise ConfigError("unseen_floor must be positive")
        ratio = self.attack_prior / self.legit_prior
        if not math.isfinite(ratio) or ratio <= 0.0:
            raise ConfigError("prior ratio must be finite and positive")

    @property
    def prior_ratio(self) -> float:
        return self.attack_prior / self.legit_prior


@dataclass(frozen=True)
class RiskScore:
    """Scalar risk score plus its per-feature probability ratios."""

    value: float
    per_feature_ratios: tuple[float, ...] = field(default=())


class Decision(enum.Enum):
    GRANT = "grant"
    CHALLENGE = "challenge"


def smoothed_probability(
    count: int, total: int, vocab: int, config: RiskConfig, empty_floor: bool = False
) -> float:
    """Probability of a value with `count` occurrences in a history of
    `total` entries over `vocab` distinct observed values.

    With empty_floor (the per-user side), an empty history yields the
    floor, so a new user's values all look unseen. Without it (the global
    side), the add-alpha formula applies even at total == 0, where it
    evaluates to 1: a cold-start system flags everything as risky.

    Kept as a single shared primitive: the replay kernels reimplement this
    exact expression and must stay bit-identical to it.
    """
    if total == 0 and (empty_floor or config.alpha is None):
        return config.unseen_floor
    if config.alpha is None:
        return count / total if count > 0 else config.unseen_floor
    return (count + config.alpha) / (total + config.alpha * (vocab + 1))


def global_probability(
    store: "HistoryStore", config: RiskConfig, feature_id: str, value: str
) -> float:
    """Smoothed relative frequency of `value` in the global login history."""
    counts = store.global_counts.get(feature_id)
    if counts is None:
        raise ConfigError(f"unknown feature id {feature_id!r}")
    return smoothed_probability(
        counts.get(value, 0), store.global_totals[feature_id], len(counts), config
    )


def user_probability(
    store: "HistoryStore", config: RiskConfig, user_id: str, feature_id: str, value: str
) -> float:
    """Smoothed relative frequency of `value` in one user's own history.

    Unknown users are treated as having an empty history (every value
    unseen), which is the cold-start policy for new users.
    """
    if feature_id not in store.global_counts:
        raise ConfigError(f"unknown feature id {feature_id!r}")
    user = store.user_counts.get(user_id)
    if user is None:
        return config.unseen_floor
    counts = user[feature_id]
    return smoothed_probability(
        counts.get(value, 0), store.user_totals[user_id], len(counts), config,
        empty_floor=True,
    )


def risk_score(
    store: "HistoryStore", config: RiskConfig, user_id: str, fv: FeatureVector
) -> RiskScore:
    """Score one login attempt for `user_id` against the current store."""
    if len(fv) != len(store.feature_ids):
        raise ConfigError(
            f"feature vector has {len(fv)} values, store expects {len(store.feature_ids)}"
        )
    ratios = []
    value = config.prior_ratio
    for feature_id, token in zip(store.feature_ids, fv.values):
        ratio = global_probability(store, config, feature_id, token) / user_probability(
            store, config, user_id, feature_id, token
        )
        ratios.append(ratio)
        value *= ratio
    return RiskScore(value=value, per_feature_ratios=tuple(ratios))


def classify(score: RiskScore, threshold: float) -> Decision:
    """Grant below the threshold; challenge at or above it (fail closed)."""
    if not math.isfinite(threshold):
        raise ConfigError("threshold must be finite")
    return Decision.GRANT if score.value < threshold else Decision.CHALLENGE
