"""Brute-force reference implementations used only to verify the fast paths.

Everything here is written as plain double loops over explicit index sets,
with no code shared with the vectorized implementations, so agreement between
the two routes is meaningful evidence rather than a tautology.
"""

from __future__ import annotations

import math

import numpy as np


def _sim(u, v, tau: float) -> float:
    return sum(float(a) * float(b) for a, b in zip(u, v)) / tau


def oracle_consistency_losses(h: np.ndarray, tau: float) -> dict[str, float]:
    """Direct transcription of the three loss definitions.

    h is (B, 2, 2, d) with axes (instance, view, segment, feature). Each
    anchor's denominator sums exp(similarity) over every one of the other
    4B - 1 segment views; the positive stays in the sum.
    """
    b = h.shape[0]
    index_set = [(n, v, s) for n in range(b) for v in (0, 1) for s in (0, 1)]

    def denom(n: int, v: int, s: int) -> float:
        total = 0.0
        for (m, w, r) in index_set:
            if (m, w, r) == (n, v, s):
                continue
            total += math.exp(_sim(h[n, v, s], h[m, w, r], tau))
        return total

    l_ac = 0.0
    for n in range(b):
        for s in (0, 1):
            l_ac -= math.log(math.exp(_sim(h[n, 0, s], h[n, 1, s], tau))
                             / denom(n, 0, s))
    l_ac /= 2 * b

    l_sc = 0.0
    for v in (0, 1):
        for n in range(b):
            l_sc -= math.log(math.exp(_sim(h[n, v, 0], h[n, v, 1], tau))
                             / denom(n, v, 0))
    l_sc /= 2 * b

    l_jc = 0.0
    for n in range(b):
        l_jc -= math.log(math.exp(_sim(h[n, 0, 0], h[n, 1, 1], tau))
                         / denom(n, 0, 0))
    l_jc /= b

    return {"ac": l_ac, "sc": l_sc, "jc": l_jc, "total": l_ac + l_sc + l_jc}


def oracle_instance_nt_xent(h: np.ndarray, tau: float) -> float:
    """Symmetric two-view NT-Xent; h is (B, 2, d)."""
    b = h.shape[0]
    index_set = [(n, v) for n in range(b) for v in (0, 1)]
    total = 0.0
    for (n, v) in index_set:
        denom = 0.0
        for (m, w) in index_set:
            if (m, w) == (n, v):
                continue
            denom += math.exp(_sim(h[n, v], h[m, w], tau))
        total -= math.log(math.exp(_sim(h[n, v], h[n, 1 - v], tau)) / denom)
    return total / (2 * b)


def oracle_mutual_information(joint: np.ndarray) -> float:
    """I(X;Y) in nats via H(X) + H(Y) - H(X,Y), all three by explicit loops.

    This is deliberately a different decomposition from the direct
    sum p * log(p / (px py)) used by the diagnostics module.
    """
    joint = np.asarray(joint, dtype=float)
    px = [sum(joint[i, j] for j in range(joint.shape[1]))
          for i in range(joint.shape[0])]
    py = [sum(joint[i, j] for i in range(joint.shape[0]))
          for j in range(joint.shape[1])]

    def entropy(values) -> float:
        h = 0.0
        for p in values:
            if p > 0:
                h -= p * math.log(p)
        return h

    return entropy(px) + entropy(py) - entropy(joint.reshape(-1))


def oracle_linear_scores(features: np.ndarray, weights: np.ndarray,
                         bias: np.ndarray) -> np.ndarray:
    """Per-class affine scores via explicit loops; features is (n, d)."""
    n, d = features.shape
    k = weights.shape[0]
    scores = np.zeros((n, k))
    for i in range(n):
        for c in range(k):
            acc = float(bias[c])
            for j in range(d):
                acc += float(weights[c, j]) * float(features[i, j])
            scores[i, c] = acc
    return scores


def oracle_mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation through the statistics module."""
    import statistics

    vals = [float(v) for v in values]
    mean = statistics.fmean(vals)
    std = statistics.pstdev(vals) if len(vals) > 1 else 0.0
    return mean, std
