"""Risk-based authentication with privacy-preserving feature handling.

Core pieces: a categorical risk-score model over login histories, privacy
codecs (IP truncation, salted iterated hashing, user-agent coarsening), a
history store with k-anonymity padding and retention limits, attacker
simulators, a synthetic dataset generator, and a TPR/RSR sweep harness.
"""

from ._kernel import KERNEL_IMPL
from .codecs import CodecConfig, HashPolicy, coarse_user_agent, hash_value, parse_ipv4, truncate_ip
from .model import Decision, FeatureVector, RiskConfig, RiskScore, classify, risk_score
from .store import HistoryStore, KAnonymityPolicy, PaddingLedger, RetentionPolicy

__version__ = "0.1.0"

__all__ = [
    "KERNEL_IMPL",
    "CodecConfig",
    "HashPolicy",
    "coarse_user_agent",
    "hash_value",
    "parse_ipv4",
    "truncate_ip",
    "Decision",
    "FeatureVector",
    "RiskConfig",
    "RiskScore",
    "classify",
    "risk_score",
    "HistoryStore",
    "KAnonymityPolicy",
    "PaddingLedger",
    "RetentionPolicy",
    "__version__",
]
