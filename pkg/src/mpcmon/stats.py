"""Small statistical helpers for the privacy test harness.

The privacy properties are information-theoretic; at desk scale they are
checked empirically: total variation distance between sampled transcript
projections must stay below a threshold, and small share distributions
are compared exactly by enumerating the scheme's randomness.
"""

from __future__ import annotations

from collections import Counter


def tv_distance(samples_a, samples_b) -> float:
    """Empirical total variation distance between two sample sets."""
    ca, cb = Counter(samples_a), Counter(samples_b)
    na, nb = len(samples_a), len(samples_b)
    if not na or not nb:
        raise ValueError("need nonempty samples")
    return sum(abs(ca[k] / na - cb[k] / nb) for k in set(ca) | set(cb)) / 2


def tv_from_counts(counts_a: dict, counts_b: dict) -> float:
    na, nb = sum(counts_a.values()), sum(counts_b.values())
    keys = set(counts_a) | set(counts_b)
    return sum(abs(counts_a.get(k, 0) / na - counts_b.get(k, 0) / nb) for k in keys) / 2


def max_marginal_tv(views_a, views_b) -> float:
    """Worst per-coordinate TV distance between two sets of view dicts.

    Views are dicts of coordinate name -> small integer (see
    PartyView.coordinates); coordinates present in one set but not the
    other count as maximally distinguishing.
    """
    keys_a = set(views_a[0]) if views_a else set()
    keys_b = set(views_b[0]) if views_b else set()
    if keys_a != keys_b:
        return 1.0
    worst = 0.0
    for key in keys_a:
        worst = max(worst, tv_distance([v[key] for v in views_a],
                                       [v[key] for v in views_b]))
    return worst


def exact_distribution(outcomes) -> dict:
    """Normalize an exhaustive enumeration of equally likely outcomes."""
    c = Counter(outcomes)
    n = len(outcomes)
    return {k: v / n for k, v in c.items()}
