# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
# distutils: language = c++
"""Compiled replay scoring kernel.

Twin of ``_pyref.replay_scores``: same inputs, same arithmetic in the
same order, bit-identical double outputs. Per-user counts live in C++
hash maps keyed by (user << 32) | token.
"""

from cython.operator cimport dereference
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef long long i64


cdef inline double _prob(i64 count, i64 total, i64 vocab,
                         bint use_alpha, double a, double floor,
                         bint empty_floor) nogil:
    if total == 0 and (empty_floor or not use_alpha):
        return floor
    if not use_alpha:
        if count > 0:
            return <double>count / <double>total
        return floor
    return (<double>count + a) / (<double>total + a * <double>(vocab + 1))


def replay_scores(int n_users,
                  vocab_sizes,
                  cnp.ndarray[cnp.int64_t, ndim=1] user_ids,
                  cnp.ndarray[cnp.int64_t, ndim=2] legit_tokens,
                  cnp.ndarray[cnp.int64_t, ndim=2] att_tokens,
                  cnp.ndarray[cnp.int64_t, ndim=1] att_offsets,
                  alpha,
                  double floor,
                  double prior_ratio):
    cdef int n_events = legit_tokens.shape[0]
    cdef int d = legit_tokens.shape[1]
    cdef int n_attempts = att_tokens.shape[0]
    cdef bint use_alpha = alpha is not None
    cdef double a = float(alpha) if use_alpha else 0.0

    cdef int max_vocab = 1
    cdef int e, f
    for f in range(d):
        if int(vocab_sizes[f]) > max_vocab:
            max_vocab = int(vocab_sizes[f])
    cdef cnp.ndarray[cnp.int64_t, ndim=2] g_counts = np.zeros((d, max_vocab), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] g_vocab = np.zeros(d, dtype=np.int64)
    cdef i64 g_total = 0

    cdef vector[unordered_map[i64, i64]] u_counts
    u_counts.resize(d)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] u_vocab = np.zeros((n_users, d), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] u_total = np.zeros(n_users, dtype=np.int64)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] legit_out = np.empty(n_events, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] att_out = np.empty(n_attempts, dtype=np.float64)

    cdef i64 j, user, tok, key, c_u, prev
    cdef double value, p_g, p_u
    cdef unordered_map[i64, i64].iterator it

    for e in range(n_events):
        user = user_ids[e]
        value = prior_ratio
        for f in range(d):
            tok = legit_tokens[e, f]
            p_g = _prob(g_counts[f, tok], g_total, g_vocab[f], use_alpha, a, floor, False)
            key = (user << 32) | tok
            it = u_counts[f].find(key)
            c_u = dereference(it).second if it != u_counts[f].end() else 0
            p_u = _prob(c_u, u_total[user], u_vocab[user, f], use_alpha, a, floor, True)
            value *= p_g / p_u
        legit_out[e] = value

        for j in range(att_offsets[e], att_offsets[e + 1]):
            value = prior_ratio
            for f in range(d):
                tok = att_tokens[j, f]
                p_g = _prob(g_counts[f, tok], g_total, g_vocab[f], use_alpha, a, floor, False)
                key = (user << 32) | tok
                it = u_counts[f].find(key)
                c_u = dereference(it).second if it != u_counts[f].end() else 0
                p_u = _prob(c_u, u_total[user], u_vocab[user, f], use_alpha, a, floor, True)
                value *= p_g / p_u
            att_out[j] = value

        for f in range(d):
            tok = legit_tokens[e, f]
            if g_counts[f, tok] == 0:
                g_vocab[f] += 1
            g_counts[f, tok] += 1
            key = (user << 32) | tok
            it = u_counts[f].find(key)
            if it == u_counts[f].end():
                u_vocab[user, f] += 1
                u_counts[f][key] = 1
            else:
                prev = dereference(it).second
                dereference(it).second = prev + 1
        g_total += 1
        u_total[user] += 1

    return legit_out, att_out
