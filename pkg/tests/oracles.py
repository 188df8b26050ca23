"""Independent brute-force scoring oracle used by the metric tests.

Pure Python on purpose: lists, loops and per-threshold rescans, no numpy.
The implementation under test vectorizes the sweep; this module re-derives
every operating point from first principles so the two can be compared
exactly. Durations used by callers are multiples of 2.5 so duration sums
are exact in binary floating point and summation order cannot matter.
"""

import random


def brute_postprocess(decisions, max_gap):
    """Flip interior distractor runs of length <= max_gap to live."""
    out = list(decisions)
    n = len(out)
    i = 0
    runs = []
    while i < n:
        j = i
        while j < n and out[j] == out[i]:
            j += 1
        runs.append((out[i], i, j))
        i = j
    for value, a, b in runs:
        if value == 0 and a > 0 and b < n and (b - a) <= max_gap:
            for k in range(a, b):
                out[k] = 1
    return out


def brute_rates(durations, labels, decisions):
    live_total = 0.0
    dist_total = 0.0
    missed = 0.0
    false_alarm = 0.0
    for d, lab, dec in zip(durations, labels, decisions):
        if lab == 1:
            live_total += d
            if dec == 0:
                missed += d
        else:
            dist_total += d
            if dec == 1:
                false_alarm += d
    p_miss = missed / live_total if live_total > 0 else float("nan")
    p_fa = false_alarm / dist_total if dist_total > 0 else float("nan")
    return p_miss, p_fa


def brute_decide(scores, threshold):
    return [1 if s >= threshold else 0 for s in scores]


def _session_blocks(sessions, n):
    if sessions is None:
        return [(0, n)]
    blocks = []
    begin = 0
    for i in range(1, n + 1):
        if i == n or sessions[i] != sessions[begin]:
            blocks.append((begin, i))
            begin = i
    return blocks


def brute_sweep(durations, labels, scores, sessions, max_gap):
    """(threshold, p_miss, p_fa) at every distinct score plus sentinels."""
    n = len(scores)
    thresholds = [float("-inf")] + sorted(set(scores)) + [float("inf")]
    points = []
    for t in thresholds:
        decisions = brute_decide(scores, t)
        filled = []
        for a, b in _session_blocks(sessions, n):
            filled.extend(brute_postprocess(decisions[a:b], max_gap))
        p_miss, p_fa = brute_rates(durations, labels, filled)
        points.append((t, p_miss, p_fa))
    return points


def brute_eer(points):
    """First miss/false-alarm crossing, linearly interpolated."""
    for k, (t, p_miss, p_fa) in enumerate(points):
        diff = p_miss - p_fa
        if diff == 0.0:
            return p_miss, t
        if diff > 0.0:
            t0, pm0, pf0 = points[k - 1]
            d0 = pm0 - pf0
            d1 = diff
            alpha = d0 / (d0 - d1)
            eer = pm0 + alpha * (p_miss - pm0)
            if t0 != float("-inf") and t != float("inf"):
                t_eer = t0 + alpha * (t - t0)
            else:
                t_eer = t0 if t0 != float("-inf") else t
            return eer, t_eer
    raise RuntimeError("no crossing in sweep")


def brute_best_dcf(points, miss_weight=0.75, fa_weight=0.25):
    """First threshold minimizing the weighted cost."""
    best = None
    for t, p_miss, p_fa in points:
        cost = miss_weight * p_miss + fa_weight * p_fa
        if best is None or cost < best[1]:
            best = (t, cost, p_miss, p_fa)
    return best


def random_series(seed, max_segments=200):
    """A random scored series: durations on the 2.5 s grid, scores on a
    1/16 grid (ties likely), one to three contiguous sessions, both
    classes guaranteed present."""
    rng = random.Random(seed)
    n = rng.randint(2, max_segments)
    labels = [rng.randint(0, 1) for _ in range(n)]
    if all(v == labels[0] for v in labels):
        labels[rng.randrange(n)] = 1 - labels[0]
    scores = [rng.randrange(17) / 16.0 for _ in range(n)]
    durations = [rng.choice([2.5, 5.0]) for _ in range(n)]
    n_sessions = rng.choice([1, 1, 2, 3])
    if n_sessions > n:
        n_sessions = 1
    cuts = sorted(rng.sample(range(1, n), n_sessions - 1)) if n_sessions > 1 else []
    sessions = []
    bounds = [0] + cuts + [n]
    for s in range(len(bounds) - 1):
        sessions.extend([f"sess{s}"] * (bounds[s + 1] - bounds[s]))
    starts = []
    ends = []
    clock = 0.0
    prev = None
    for dur, sess in zip(durations, sessions):
        if sess != prev:
            clock = 0.0
            prev = sess
        starts.append(clock)
        ends.append(clock + dur)
        clock += dur
    max_gap = rng.choice([0, 1, 2, 3])
    return {
        "starts": starts,
        "ends": ends,
        "durations": durations,
        "labels": labels,
        "scores": scores,
        "sessions": sessions if n_sessions > 1 else None,
        "max_gap": max_gap,
    }
