"""Replay-scoring kernel selection.

Prefers the compiled Cython kernel when the extension built; falls back
to the pure-Python twin otherwise. Set RBAPRIVACY_PURE_PYTHON=1 to force
the fallback (used by the equivalence tests and the benchmark).
"""

from __future__ import annotations

import os

from ._pyref import replay_scores as replay_scores_py

if os.environ.get("RBAPRIVACY_PURE_PYTHON"):
    replay_scores = replay_scores_py
    KERNEL_IMPL = "python"
else:
    try:
        from ._speed import replay_scores as replay_scores_c

        replay_scores = replay_scores_c
        KERNEL_IMPL = "compiled"
    except ImportError:
        replay_scores = replay_scores_py
        KERNEL_IMPL = "python"

__all__ = ["replay_scores", "replay_scores_py", "KERNEL_IMPL"]
