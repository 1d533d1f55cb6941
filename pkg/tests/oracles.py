"""Independent reference implementations used to cross-check the metrics.

These are deliberately naive (memoized recursion, copy-and-remove list
scans) so a bug in the production code is unlikely to be mirrored here.
"""

from __future__ import annotations

import sys
from functools import lru_cache
from typing import Sequence


def lev_oracle(a: str, b: str) -> int:
    """Edit distance by memoized recursion on the textbook recurrence."""
    sys.setrecursionlimit(max(sys.getrecursionlimit(),
                              10 * (len(a) + len(b)) + 1000))

    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            d(i - 1, j) + 1,
            d(i, j - 1) + 1,
            d(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return d(len(a), len(b))


def ngram_count_oracle(words: Sequence[str], gram: Sequence[str]) -> int:
    """How many times ``gram`` occurs in ``words``, by sliding a window."""
    n = len(gram)
    return sum(1 for i in range(len(words) - n + 1)
               if list(words[i:i + n]) == list(gram))


def prf_oracle(pred: str, ref: str) -> tuple[float, float, float]:
    """Multiset precision/recall/F1 by copy-and-remove matching."""
    pw = pred.split()
    rw = ref.split()
    pool = list(rw)
    hits = 0
    for w in pw:
        if w in pool:
            pool.remove(w)
            hits += 1
    if not pw and not rw:
        return 1.0, 1.0, 1.0
    p = hits / len(pw) if pw else 0.0
    r = hits / len(rw) if rw else 0.0
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f
