"""Evaluation harness: chronological replay, threshold calibration,
TPR/RSR sweeps over privacy-enhancement steps, and limit extraction.

A sweep replays the dataset once per enhancement step (truncation bits,
or k for k-anonymity). The decision threshold is calibrated on the
baseline step (0 bits / k=1) to a target true-positive rate and then
frozen for every other step, so metric changes reflect the enhancement
alone. TPR is the blocked fraction of attacker attempts; RSR is the mean
attacker score over the mean legitimate score (each user's cold-start
first login excluded). Both are also reported relative to baseline.

Replays with no store policy (plain, truncation, hashing) run on the
interned-token scoring kernel; k-anonymity and retention replays go
through the full history store.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from ._kernel import replay_scores as kernel_replay_scores
from .attackers import AttackerModel, presample_attempts
from .codecs import CodecConfig
from .errors import ConfigError, EvaluationError
from .model import FeatureVector, RiskConfig, risk_score
from .store import HistoryStore, KAnonymityPolicy, PaddingLedger, RetentionPolicy

if TYPE_CHECKING:
    from .dataio import Dataset

TRUNCATION = "truncation"
K_ANONYMITY = "k_anonymity"

IP_FEATURE = "ip"
UA_FEATURE = "user_agent"


@dataclass(frozen=True)
class EvalConfig:
    target_tpr: float = 0.995
    attacker_models: tuple[str, ...] = ("naive", "vpn", "targeted")
    attempts_per_victim: int = 100
    truncation_bits: tuple[int, ...] = tuple(range(25))
    k_values: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    rsr_limit_delta: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.target_tpr < 1.0:
            raise ConfigError("target_tpr must be in (0, 1)")
        if not self.attacker_models:
            raise ConfigError("at least one attacker model required")
        if self.attempts_per_victim < 1:
            raise ConfigError("attempts_per_victim must be >= 1")
        if not self.truncation_bits or not self.k_values:
            raise ConfigError("sweep step lists must be non-empty")


@dataclass
class ReplayScores:
    """Scores produced by one chronological replay."""

    legit: np.ndarray
    first_login: np.ndarray
    attackers: dict[str, np.ndarray]
    ledger: PaddingLedger | None = None
    store: HistoryStore | None = None

    def established_legit(self) -> np.ndarray:
        """Legitimate scores excluding each user's first (cold-start) login."""
        return self.legit[~self.first_login]


@dataclass
class ModelMetrics:
    tpr: float
    rsr_basic: float
    tpr_relative: float
    rsr_relative: float
    threshold: float
    valid: bool = True


@dataclass
class SweepStep:
    step: int
    metrics: dict[str, ModelMetrics]
    additional_entries: int = 0
    baseline_entries: int = 0


@dataclass
class SweepResult:
    enhancement: str
    steps: list[SweepStep]
    seed: int
    target_tpr: float
    attempts_per_victim: int
    attacker_models: tuple[str, ...]
    rsr_limit_delta: float = 0.01


@dataclass(frozen=True)
class LimitValue:
    """Last acceptable sweep step; open_ended means no violation was seen
    through the swept range, so the true limit is at least this step.
    """

    step: int
    open_ended: bool = False


@dataclass(frozen=True)
class ModelLimits:
    tpr_limit: LimitValue
    rsr_limit: LimitValue
    combined: LimitValue


# -- replay --------------------------------------------------------------


def _encoders(dataset: "Dataset", codec: CodecConfig):
    """Per-feature raw->token encoders with memoization."""
    encoders = []
    for feature_id in dataset.feature_ids:
        cache: dict[str, str] = {}
        if feature_id == IP_FEATURE:
            fn = codec.encode_ip
        elif feature_id == UA_FEATURE:
            fn = codec.encode_ua
        else:
            fn = lambda raw: raw  # noqa: E731 - opaque pass-through feature

        def encode(raw: str, fn=fn, cache=cache) -> str:
            token = cache.get(raw)
            if token is None:
                token = fn(raw)
                cache[raw] = token
            return token

        encoders.append(encode)
    return encoders


def replay(
    dataset: "Dataset",
    codec: CodecConfig,
    risk: RiskConfig,
    models: dict[str, AttackerModel],
    attempts_per_victim: int,
    rng: random.Random,
    k_policy: KAnonymityPolicy | None = None,
    retention: RetentionPolicy | None = None,
    padding_rng: random.Random | None = None,
    use_kernel: bool | None = None,
) -> ReplayScores:
    """Replay the dataset chronologically.

    For every login event: score the legitimate attempt against the
    current history, score `attempts_per_victim` pre-sampled attacker
    attempts per model, then record the login (with codecs and store
    policies applied). Attacker attempts are pre-sampled from the raw
    dataset before the replay, so the stream is identical across codec
    settings for a fixed seed.
    """
    presampled = presample_attempts(dataset, models, attempts_per_victim, rng)
    encoders = _encoders(dataset, codec)
    d = len(dataset.feature_ids)
    ip_idx = dataset.feature_ids.index(IP_FEATURE) if IP_FEATURE in dataset.feature_ids else 0
    ua_idx = (
        dataset.feature_ids.index(UA_FEATURE) if UA_FEATURE in dataset.feature_ids else min(1, d - 1)
    )

    legit_tokens = [
        tuple(encoders[f](ev.values[f]) for f in range(d)) for ev in dataset.events
    ]
    attack_tokens = {
        kind: [
            (encoders[ip_idx](ip), encoders[ua_idx](ua)) for ip, ua in samples
        ]
        for kind, samples in presampled.items()
    }

    first_login = np.zeros(len(dataset.events), dtype=bool)
    seen: set[str] = set()
    for i, ev in enumerate(dataset.events):
        if ev.user_id not in seen:
            first_login[i] = True
            seen.add(ev.user_id)

    if use_kernel is None:
        use_kernel = k_policy is None and retention is None
    elif use_kernel and (k_policy is not None or retention is not None):
        raise ConfigError("kernel replay does not support store policies")

    if use_kernel:
        legit, attackers = _replay_kernel(
            dataset, legit_tokens, attack_tokens, attempts_per_victim, risk
        )
        return ReplayScores(legit=legit, first_login=first_login, attackers=attackers)
    return _replay_store(
        dataset, legit_tokens, attack_tokens, attempts_per_victim, risk,
        k_policy, retention, padding_rng,
    )


def _replay_kernel(dataset, legit_tokens, attack_tokens, attempts, risk):
    n_events = len(dataset.events)
    d = len(dataset.feature_ids)
    kinds = list(attack_tokens)
    n_kinds = len(kinds)

    interns: list[dict[str, int]] = [{} for _ in range(d)]

    def intern(f: int, token: str) -> int:
        table = interns[f]
        tid = table.get(token)
        if tid is None:
            tid = len(table)
            table[token] = tid
        return tid

    user_index: dict[str, int] = {}
    user_ids = np.empty(n_events, dtype=np.int64)
    legit_arr = np.empty((n_events, d), dtype=np.int64)
    for e, ev in enumerate(dataset.events):
        uid = user_index.setdefault(ev.user_id, len(user_index))
        user_ids[e] = uid
        for f in range(d):
            legit_arr[e, f] = intern(f, legit_tokens[e][f])

    att_arr = np.empty((n_events * n_kinds * attempts, d), dtype=np.int64)
    row = 0
    for e in range(n_events):
        for kind in kinds:
            samples = attack_tokens[kind]
            base = e * attempts
            for a in range(attempts):
                ip_tok, ua_tok = samples[base + a]
                # attacker vectors carry (ip, ua) in dataset feature order
                tokens = _attack_vector(dataset.feature_ids, ip_tok, ua_tok)
                for f in range(d):
                    att_arr[row, f] = intern(f, tokens[f])
                row += 1
    att_offsets = np.arange(n_events + 1, dtype=np.int64) * (n_kinds * attempts)

    vocab_sizes = [len(t) for t in interns]
    legit_out, att_out = kernel_replay_scores(
        len(user_index), vocab_sizes, user_ids, legit_arr, att_arr, att_offsets,
        risk.alpha, risk.unseen_floor, risk.prior_ratio,
    )
    att_out = att_out.reshape(n_events, n_kinds, attempts)
    attackers = {
        kind: np.ascontiguousarray(att_out[:, m, :]).reshape(-1)
        for m, kind in enumerate(kinds)
    }
    return legit_out, attackers


def _attack_vector(feature_ids: tuple[str, ...], ip_tok: str, ua_tok: str) -> tuple[str, ...]:
    values = []
    for feature_id in feature_ids:
        if feature_id == IP_FEATURE:
            values.append(ip_tok)
        elif feature_id == UA_FEATURE:
            values.append(ua_tok)
        else:
            raise ConfigError(f"attacker models cannot fill feature {feature_id!r}")
    return tuple(values)


def _replay_store(
    dataset, legit_tokens, attack_tokens, attempts, risk, k_policy, retention, padding_rng
):
    n_events = len(dataset.events)
    kinds = list(attack_tokens)
    store = HistoryStore(
        dataset.feature_ids,
        k_policy=k_policy,
        retention=retention,
        rng=padding_rng if padding_rng is not None else random.Random(0),
    )
    legit = np.empty(n_events, dtype=np.float64)
    attackers = {kind: np.empty(n_events * attempts, dtype=np.float64) for kind in kinds}
    first_login = np.zeros(n_events, dtype=bool)
    seen: set[str] = set()
    for e, ev in enumerate(dataset.events):
        if ev.user_id not in seen:
            first_login[e] = True
            seen.add(ev.user_id)
        fv = FeatureVector(legit_tokens[e])
        legit[e] = risk_score(store, risk, ev.user_id, fv).value
        base = e * attempts
        for kind in kinds:
            out = attackers[kind]
            samples = attack_tokens[kind]
            for a in range(attempts):
                ip_tok, ua_tok = samples[base + a]
                afv = FeatureVector(_attack_vector(dataset.feature_ids, ip_tok, ua_tok))
                out[base + a] = risk_score(store, risk, ev.user_id, afv).value
        store.record_login(ev.user_id, fv, ev.timestamp)
    return ReplayScores(
        legit=legit, first_login=first_login, attackers=attackers,
        ledger=store.ledger, store=store,
    )


# -- calibration ---------------------------------------------------------


def calibrate_threshold(attacker_scores: Sequence[float], target_tpr: float) -> float:
    """Largest threshold challenging at least `target_tpr` of the scores.

    Challenge means score >= threshold, so this is the (n - ceil(target*n))-th
    smallest attacker score (0-indexed).
    """
    scores = np.asarray(attacker_scores, dtype=np.float64)
    if scores.size == 0:
        raise EvaluationError("cannot calibrate a threshold on zero attacker scores")
    if not 0.0 < target_tpr < 1.0:
        raise ConfigError("target_tpr must be in (0, 1)")
    ordered = np.sort(scores)
    n = ordered.size
    blocked = math.ceil(target_tpr * n)
    return float(ordered[n - blocked])


# -- sweeps --------------------------------------------------------------


def run_sweep(
    dataset: "Dataset",
    config: EvalConfig,
    enhancement: str,
    models: dict[str, AttackerModel],
    codec_base: CodecConfig | None = None,
    risk: RiskConfig | None = None,
) -> SweepResult:
    """Run a full truncation or k-anonymity sweep.

    The first step must be the baseline (0 bits / k=1); its attacker
    scores calibrate one frozen threshold per attacker model.
    """
    if enhancement not in (TRUNCATION, K_ANONYMITY):
        raise ConfigError(f"unknown enhancement {enhancement!r}")
    codec_base = codec_base if codec_base is not None else CodecConfig()
    risk = risk if risk is not None else RiskConfig()
    if set(models) != set(config.attacker_models):
        raise ConfigError("built models do not match config.attacker_models")

    if enhancement == TRUNCATION:
        steps = list(config.truncation_bits)
        baseline_step = 0
        if codec_base.truncation_bits != 0:
            raise ConfigError("truncation sweep requires an un-truncated base codec")
    else:
        steps = list(config.k_values)
        baseline_step = 1
    if steps[0] != baseline_step:
        raise EvaluationError(
            f"sweep must start at the baseline step {baseline_step}, got {steps[0]}"
        )

    thresholds: dict[str, float] = {}
    baseline_metrics: dict[str, ModelMetrics] = {}
    result_steps: list[SweepStep] = []

    for step in steps:
        rng = random.Random(config.seed)
        if enhancement == TRUNCATION:
            codec = replace(codec_base, truncation_bits=step)
            k_policy = None
        else:
            codec = codec_base
            k_policy = KAnonymityPolicy(k=step)
        padding_rng = random.Random(f"{config.seed}:{enhancement}:{step}")
        scores = replay(
            dataset, codec, risk, models, config.attempts_per_victim, rng,
            k_policy=k_policy, padding_rng=padding_rng,
        )
        legit = scores.established_legit()
        legit_mean = float(legit.mean()) if legit.size else float("nan")
        legit_ok = legit.size > 0 and math.isfinite(legit_mean) and legit_mean > 0.0

        metrics: dict[str, ModelMetrics] = {}
        is_baseline = step == baseline_step
        for kind in config.attacker_models:
            att = scores.attackers[kind]
            valid = legit_ok and att.size > 0
            if is_baseline and valid:
                thresholds[kind] = calibrate_threshold(att, config.target_tpr)
            threshold = thresholds.get(kind, float("nan"))
            if valid and math.isfinite(threshold):
                tpr = float(np.count_nonzero(att >= threshold) / att.size)
                rsr = float(att.mean()) / legit_mean
            else:
                tpr = float("nan")
                rsr = float("nan")
                valid = False
            if is_baseline:
                tpr_rel = 0.0 if valid else float("nan")
                rsr_rel = 0.0 if valid else float("nan")
            else:
                base = baseline_metrics.get(kind)
                if base is None or not base.valid or not valid:
                    tpr_rel = float("nan")
                    rsr_rel = float("nan")
                    valid = False
                else:
                    tpr_rel = (tpr - base.tpr) / base.tpr
                    rsr_rel = (rsr - base.rsr_basic) / base.rsr_basic
            metrics[kind] = ModelMetrics(
                tpr=tpr, rsr_basic=rsr, tpr_relative=tpr_rel,
                rsr_relative=rsr_rel, threshold=threshold, valid=valid,
            )
        if is_baseline:
            baseline_metrics = metrics
        ledger = scores.ledger
        result_steps.append(
            SweepStep(
                step=step,
                metrics=metrics,
                additional_entries=ledger.additional_entries if ledger else 0,
                baseline_entries=ledger.baseline_entries if ledger else len(dataset.events),
            )
        )

    return SweepResult(
        enhancement=enhancement,
        steps=result_steps,
        seed=config.seed,
        target_tpr=config.target_tpr,
        attempts_per_victim=config.attempts_per_victim,
        attacker_models=tuple(config.attacker_models),
        rsr_limit_delta=config.rsr_limit_delta,
    )


# -- limit extraction ----------------------------------------------------


def limit_from_series(
    steps: Sequence[int],
    relatives: Sequence[float],
    bound: float,
    valid: Sequence[bool] | None = None,
) -> LimitValue:
    """Last step before the first step whose relative metric drops below
    `bound` (invalid steps count as violations); open-ended when the
    whole series stays acceptable.
    """
    if len(steps) != len(relatives):
        raise ConfigError("steps and relatives must have equal length")
    for i, (step, rel) in enumerate(zip(steps, relatives)):
        bad = (valid is not None and not valid[i]) or not math.isfinite(rel) or rel < bound
        if bad:
            return LimitValue(step=steps[max(i - 1, 0)], open_ended=False)
    return LimitValue(step=steps[-1], open_ended=True)


def _combine(a: LimitValue, b: LimitValue) -> LimitValue:
    if a.step != b.step:
        return a if a.step < b.step else b
    return LimitValue(step=a.step, open_ended=a.open_ended and b.open_ended)


def extract_limits(
    sweep: SweepResult, rsr_limit_delta: float | None = None
) -> dict[str, ModelLimits]:
    """Per attacker model: the TPR limit (last step before any relative
    TPR decrease), the RSR limit (last step before the relative RSR drops
    by more than the tolerance), and their minimum.
    """
    delta = rsr_limit_delta if rsr_limit_delta is not None else sweep.rsr_limit_delta
    steps = [s.step for s in sweep.steps]
    out: dict[str, ModelLimits] = {}
    for kind in sweep.attacker_models:
        tpr_rel = [s.metrics[kind].tpr_relative for s in sweep.steps]
        rsr_rel = [s.metrics[kind].rsr_relative for s in sweep.steps]
        valid = [s.metrics[kind].valid for s in sweep.steps]
        tpr_limit = limit_from_series(steps, tpr_rel, 0.0, valid)
        rsr_limit = limit_from_series(steps, rsr_rel, -delta, valid)
        out[kind] = ModelLimits(
            tpr_limit=tpr_limit,
            rsr_limit=rsr_limit,
            combined=_combine(tpr_limit, rsr_limit),
        )
    return out
