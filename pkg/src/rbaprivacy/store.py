"""Login-history store with write-time privacy policies.

The store keeps order-free frequency tables (global and per-user) over
feature values. Three policies apply at write time:

* aggregation is implicit: only histograms are kept, so risk scores
  depend on value frequencies alone, never on event order;
* k-anonymity padding adds entries for under-represented target-feature
  values to dedicated synthetic users until at least k distinct users
  hold each value, tracking the overhead in a ledger;
* retention limits bound each user's effective history by entry count
  and age, with true forgetting (counts are decremented on eviction).

Counting conventions: `total_logins` is the number of retained real
entries; per-feature global counts additionally include padded entries,
so for every feature sum(global counts) == total_logins +
ledger.additional_entries.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Iterable, Sequence

from .errors import ConfigError
from .model import FeatureVector

SYNTHETIC_PREFIX = "synthetic:"


@dataclass(frozen=True)
class KAnonymityPolicy:
    """Require every target-feature value to be held by >= k users."""

    k: int
    target_features: tuple[str, ...] = ("ip",)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not self.target_features:
            raise ConfigError("k-anonymity needs at least one target feature")


@dataclass
class PaddingLedger:
    """Overhead accounting for k-anonymity padding."""

    additional_entries: int = 0
    baseline_entries: int = 0

    @property
    def increase_ratio(self) -> float:
        if self.baseline_entries == 0:
            return 0.0
        return self.additional_entries / self.baseline_entries


@dataclass(frozen=True)
class RetentionPolicy:
    """History minimization: bound per-user entries by count and/or age."""

    max_entries_per_user: int | None = None
    max_age: timedelta | None = None

    def __post_init__(self):
        if self.max_entries_per_user is not None and self.max_entries_per_user < 1:
            raise ConfigError("max_entries_per_user must be >= 1")
        if self.max_entries_per_user is None and self.max_age is None:
            raise ConfigError("retention policy needs a count or age bound")


class HistoryStore:
    """Frequency tables over login features, with privacy policies applied
    on every write. Single writer, any number of concurrent readers;
    writes (including padding) must not interleave a score computation.
    """

    def __init__(
        self,
        feature_ids: Sequence[str],
        k_policy: KAnonymityPolicy | None = None,
        retention: RetentionPolicy | None = None,
        rng: random.Random | None = None,
    ):
        if not feature_ids:
            raise ConfigError("store needs at least one feature id")
        self.feature_ids = tuple(feature_ids)
        if k_policy is not None:
            unknown = set(k_policy.target_features) - set(self.feature_ids)
            if unknown:
                raise ConfigError(f"k-anonymity targets unknown features {sorted(unknown)}")
        self.k_policy = k_policy
        self.retention = retention
        self.rng = rng if rng is not None else random.Random(0)

        self.global_counts: dict[str, dict[str, int]] = {f: {} for f in self.feature_ids}
        self.global_totals: dict[str, int] = {f: 0 for f in self.feature_ids}
        self.user_counts: dict[str, dict[str, dict[str, int]]] = {}
        self.user_totals: dict[str, int] = {}
        self.synthetic_users: set[str] = set()
        self.ledger = PaddingLedger()

        self._real_entries = 0
        self._real_users: set[str] = set()
        self._holders: dict[str, dict[str, set[str]]] = {f: {} for f in self.feature_ids}
        self._synthetic_order: list[str] = []
        self._user_events: dict[str, deque[tuple[datetime | None, tuple[str, ...]]]] = {}

    # -- basic accounting ------------------------------------------------

    @property
    def total_logins(self) -> int:
        """Retained real login entries (padding excluded)."""
        return self._real_entries

    @property
    def real_users(self) -> frozenset[str]:
        return frozenset(self._real_users)

    def _ensure_user(self, user_id: str):
        if user_id not in self.user_counts:
            self.user_counts[user_id] = {f: {} for f in self.feature_ids}
            self.user_totals[user_id] = 0

    def _increment(self, user_id: str, values: tuple[str, ...]):
        self._ensure_user(user_id)
        user = self.user_counts[user_id]
        for feature_id, value in zip(self.feature_ids, values):
            counts = self.global_counts[feature_id]
            counts[value] = counts.get(value, 0) + 1
            self.global_totals[feature_id] += 1
            ucounts = user[feature_id]
            ucounts[value] = ucounts.get(value, 0) + 1
            self._holders[feature_id].setdefault(value, set()).add(user_id)
        self.user_totals[user_id] += 1

    def _decrement(self, user_id: str, values: tuple[str, ...]):
        user = self.user_counts[user_id]
        for feature_id, value in zip(self.feature_ids, values):
            counts = self.global_counts[feature_id]
            counts[value] -= 1
            if counts[value] == 0:
                del counts[value]
            self.global_totals[feature_id] -= 1
            ucounts = user[feature_id]
            ucounts[value] -= 1
            if ucounts[value] == 0:
                del ucounts[value]
                holders = self._holders[feature_id][value]
                holders.discard(user_id)
                if not holders:
                    del self._holders[feature_id][value]
        self.user_totals[user_id] -= 1

    # -- writes ----------------------------------------------------------

    def record_login(
        self, user_id: str, fv: FeatureVector, timestamp: datetime | None = None
    ):
        """Record one successful login, enforcing retention and padding."""
        if len(fv) != len(self.feature_ids):
            raise ConfigError(
                f"feature vector has {len(fv)} values, store expects {len(self.feature_ids)}"
            )
        if user_id.startswith(SYNTHETIC_PREFIX):
            raise ConfigError("user id collides with the synthetic-user namespace")
        if self.retention is not None and self.retention.max_age is not None and timestamp is None:
            raise ConfigError("age-based retention requires event timestamps")

        self._real_users.add(user_id)
        self._increment(user_id, fv.values)
        self._real_entries += 1
        self.ledger.baseline_entries += 1

        evicted: list[tuple[str, ...]] = []
        if self.retention is not None:
            events = self._user_events.setdefault(user_id, deque())
            events.append((timestamp, fv.values))
            cap = self.retention.max_entries_per_user
            while cap is not None and len(events) > cap:
                evicted.append(events.popleft()[1])
            max_age = self.retention.max_age
            if max_age is not None and timestamp is not None:
                cutoff = timestamp - max_age
                while events and events[0][0] is not None and events[0][0] < cutoff:
                    evicted.append(events.popleft()[1])
            for values in evicted:
                self._decrement(user_id, values)
                self._real_entries -= 1

        if self.k_policy is not None:
            for feature_id in self.k_policy.target_features:
                idx = self.feature_ids.index(feature_id)
                self.pad_to_k(self.k_policy, fv.values[idx], feature_id)
                # eviction can drop a still-present value below k
                for values in evicted:
                    value = values[idx]
                    if value in self.global_counts[feature_id]:
                        self.pad_to_k(self.k_policy, value, feature_id)

    def pad_to_k(
        self, policy: KAnonymityPolicy, value: str, feature_id: str | None = None
    ) -> int:
        """Add padded entries until >= k distinct users hold `value`.

        Each padded entry goes to a synthetic user chosen uniformly among
        those not yet holding the value; new synthetic users are created
        whenever assigning to the existing ones would push the synthetic
        mean logins per user above the real-user mean, which keeps the
        overall mean close to the real one. Non-target features of a
        padded entry are drawn from the global distribution. Returns the
        number of entries added.
        """
        if feature_id is None:
            feature_id = policy.target_features[0]
        if feature_id not in self.global_counts:
            raise ConfigError(f"unknown feature id {feature_id!r}")
        added = 0
        while len(self._holders[feature_id].get(value, ())) < policy.k:
            user = self._pick_padding_user(feature_id, value)
            values = tuple(
                value if f == feature_id else self._draw_global(f)
                for f in self.feature_ids
            )
            self._increment(user, values)
            self.ledger.additional_entries += 1
            added += 1
        return added

    def _pick_padding_user(self, feature_id: str, value: str) -> str:
        holders = self._holders[feature_id].get(value, set())
        candidates = [u for u in self._synthetic_order if u not in holders]
        real_mean = self._real_entries / max(len(self._real_users), 1)
        synthetic_mean_next = (self.ledger.additional_entries + 1) / max(
            len(self._synthetic_order), 1
        )
        if not candidates or synthetic_mean_next > real_mean:
            user = f"{SYNTHETIC_PREFIX}{len(self._synthetic_order)}"
            self.synthetic_users.add(user)
            self._synthetic_order.append(user)
            return user
        return self.rng.choice(candidates)

    def _draw_global(self, feature_id: str) -> str:
        counts = self.global_counts[feature_id]
        total = self.global_totals[feature_id]
        if total == 0:
            raise ConfigError("cannot draw from an empty global history")
        pick = self.rng.randrange(total)
        acc = 0
        for value, count in counts.items():
            acc += count
            if pick < acc:
                return value
        raise AssertionError("global counts inconsistent with total")

    # -- audits ----------------------------------------------------------

    def audit_k(self, policy: KAnonymityPolicy) -> list[tuple[str, str]]:
        """Every (feature, value) held by fewer than k distinct users."""
        violations = []
        for feature_id in policy.target_features:
            if feature_id not in self.global_counts:
                raise ConfigError(f"unknown feature id {feature_id!r}")
            for value in self.global_counts[feature_id]:
                if len(self._holders[feature_id].get(value, ())) < policy.k:
                    violations.append((feature_id, value))
        return violations

    def aggregate_equivalence_check(
        self, event_log: Iterable[tuple[str, tuple[str, ...]]]
    ) -> bool:
        """True iff recounting the (possibly shuffled) event log exactly
        reproduces this store's real-user histograms. Requires a store
        built without k-anonymity padding.
        """
        global_counts: dict[str, dict[str, int]] = {f: {} for f in self.feature_ids}
        user_counts: dict[str, dict[str, dict[str, int]]] = {}
        user_totals: dict[str, int] = {}
        n = 0
        for user_id, values in event_log:
            if len(values) != len(self.feature_ids):
                return False
            n += 1
            user = user_counts.setdefault(user_id, {f: {} for f in self.feature_ids})
            user_totals[user_id] = user_totals.get(user_id, 0) + 1
            for feature_id, value in zip(self.feature_ids, values):
                counts = global_counts[feature_id]
                counts[value] = counts.get(value, 0) + 1
                ucounts = user[feature_id]
                ucounts[value] = ucounts.get(value, 0) + 1
        return (
            n == self._real_entries
            and global_counts == self.global_counts
            and user_counts == self.user_counts
            and user_totals == self.user_totals
        )
