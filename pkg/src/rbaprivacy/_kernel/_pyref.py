"""Pure-Python replay scoring kernel.

Scores every login of a chronological replay (legitimate attempt plus a
block of pre-sampled attacker attempts per event) against the history
accumulated so far, then ingests the legitimate login. Operates on
token ids interned per feature; no privacy store policies apply here,
so it is only used for plain/truncation/hashing replays.

The compiled kernel in ``_speed.pyx`` mirrors this function operation
for operation and must return bit-identical doubles.
"""

from __future__ import annotations

import numpy as np


def replay_scores(
    n_users: int,
    vocab_sizes: list[int],
    user_ids: np.ndarray,      # int64[n_events]
    legit_tokens: np.ndarray,  # int64[n_events, d]
    att_tokens: np.ndarray,    # int64[n_attempts, d]
    att_offsets: np.ndarray,   # int64[n_events + 1]
    alpha: float | None,
    floor: float,
    prior_ratio: float,
) -> tuple[np.ndarray, np.ndarray]:
    n_events, d = legit_tokens.shape
    g_counts = [[0] * vocab_sizes[f] for f in range(d)]
    g_vocab = [0] * d
    g_total = 0
    u_counts: list[dict[tuple[int, int], int]] = [dict() for _ in range(d)]
    u_vocab = [[0] * d for _ in range(n_users)]
    u_total = [0] * n_users

    legit_out = np.empty(n_events, dtype=np.float64)
    att_out = np.empty(att_tokens.shape[0], dtype=np.float64)

    use_alpha = alpha is not None
    a = alpha if use_alpha else 0.0

    def prob(count: int, total: int, vocab: int, empty_floor: bool) -> float:
        if total == 0 and (empty_floor or not use_alpha):
            return floor
        if not use_alpha:
            return count / total if count > 0 else floor
        return (count + a) / (total + a * (vocab + 1))

    def score(user: int, tokens) -> float:
        value = prior_ratio
        for f in range(d):
            tok = int(tokens[f])
            p_g = prob(g_counts[f][tok], g_total, g_vocab[f], False)
            p_u = prob(
                u_counts[f].get((user, tok), 0), u_total[user], u_vocab[user][f], True
            )
            value *= p_g / p_u
        return value

    for e in range(n_events):
        user = int(user_ids[e])
        row = legit_tokens[e]
        legit_out[e] = score(user, row)
        for j in range(int(att_offsets[e]), int(att_offsets[e + 1])):
            att_out[j] = score(user, att_tokens[j])
        # ingest the legitimate login
        for f in range(d):
            tok = int(row[f])
            if g_counts[f][tok] == 0:
                g_vocab[f] += 1
            g_counts[f][tok] += 1
            key = (user, tok)
            prev = u_counts[f].get(key, 0)
            if prev == 0:
                u_vocab[user][f] += 1
            u_counts[f][key] = prev + 1
        g_total += 1
        u_total[user] += 1

    return legit_out, att_out
