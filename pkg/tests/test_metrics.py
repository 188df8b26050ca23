"""Scoring: fixed examples, properties, and exact agreement with the
brute-force oracle on randomized series."""

import math

import numpy as np
import pytest

from oracles import brute_best_dcf, brute_eer, brute_sweep, random_series
from strfnet.metrics import (
    DISTRACTOR,
    LIVE,
    MetricsReport,
    ScoredSegments,
    best_threshold_by_dcf,
    dcf,
    duration_normalized_rates,
    eer_with_postprocessing,
    evaluate_at_threshold,
    postprocess,
    postprocess_grouped,
    sweep_operating_points,
    threshold_decisions,
    write_det_sweep_csv,
)


def six_score_fixture():
    # ordered so that gap filling with max_gap 1 leaves the crossing intact
    return ScoredSegments(
        start_s=np.arange(6) * 5.0,
        end_s=np.arange(1, 7) * 5.0,
        scores=np.array([0.9, 0.8, 0.6, 0.2, 0.1, 0.4]),
        labels=np.array([LIVE, LIVE, DISTRACTOR, DISTRACTOR, DISTRACTOR, LIVE]),
    )


def segments_from(series):
    return ScoredSegments(
        start_s=np.array(series["starts"]),
        end_s=np.array(series["ends"]),
        scores=np.array(series["scores"]),
        labels=np.array(series["labels"]),
        session_ids=tuple(series["sessions"]) if series["sessions"] else None,
    )


# ---------------------------------------------------------------- fixed oracles

def test_dcf_fixed_example():
    assert dcf(0.1, 0.2) == 0.125


def test_dcf_endpoints_and_validation():
    assert dcf(0.0, 0.0) == 0.0
    assert dcf(1.0, 1.0) == 1.0
    assert dcf(1.0, 0.0) == 0.75
    assert dcf(0.0, 1.0) == 0.25
    with pytest.raises(ValueError):
        dcf(-0.1, 0.5)
    with pytest.raises(ValueError):
        dcf(0.5, 1.5)
    with pytest.raises(ValueError):
        dcf(math.nan, 0.5)


def test_six_score_eer_is_one_third():
    eer, threshold = eer_with_postprocessing(six_score_fixture(), max_gap_segments=0)
    assert eer == 5.0 / 15.0
    assert threshold == 0.6


def test_six_score_eer_survives_gap_filling():
    eer, threshold = eer_with_postprocessing(six_score_fixture(), max_gap_segments=1)
    assert eer == 5.0 / 15.0
    assert threshold == 0.6


def test_six_score_min_dcf_matches_enumeration():
    segs = six_score_fixture()
    # enumerate every threshold by hand
    want_best = None
    for t in [-np.inf, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9, np.inf]:
        decided = (segs.scores >= t).astype(int)
        miss = sum(5.0 for d, lab in zip(decided, segs.labels) if lab == LIVE and d == 0)
        fa = sum(5.0 for d, lab in zip(decided, segs.labels) if lab == DISTRACTOR and d == 1)
        cost = 0.75 * (miss / 15.0) + 0.25 * (fa / 15.0)
        if want_best is None or cost < want_best[1]:
            want_best = (t, cost)
    threshold, report = best_threshold_by_dcf(segs, max_gap_segments=0)
    assert threshold == want_best[0] == 0.4
    assert report.dcf == want_best[1]
    assert report.p_miss == 0.0
    assert report.p_fa == 5.0 / 15.0


# ------------------------------------------------------------------- properties

def test_threshold_decisions_boundary_is_live():
    d = threshold_decisions(np.array([0.3, 0.5, 0.7]), 0.5)
    assert d.tolist() == [0, 1, 1]


def test_postprocess_fills_only_interior_short_runs():
    d = np.array([0, 1, 0, 0, 1, 0, 1, 1, 0], dtype=np.int8)
    out = postprocess(d, max_gap_segments=2)
    # leading and trailing runs stay; both interior runs are <= 2 long
    assert out.tolist() == [0, 1, 1, 1, 1, 1, 1, 1, 0]
    out1 = postprocess(d, max_gap_segments=1)
    assert out1.tolist() == [0, 1, 0, 0, 1, 1, 1, 1, 0]


def test_postprocess_zero_gap_is_identity():
    rng = np.random.default_rng(0)
    d = rng.integers(0, 2, size=300).astype(np.int8)
    assert np.array_equal(postprocess(d, 0), d)


def test_postprocess_idempotent():
    rng = np.random.default_rng(1)
    for gap in (1, 2, 5):
        d = rng.integers(0, 2, size=400).astype(np.int8)
        once = postprocess(d, gap)
        twice = postprocess(once, gap)
        assert np.array_equal(once, twice)


def test_postprocess_rejects_negative_gap():
    with pytest.raises(ValueError):
        postprocess(np.array([1, 0, 1], dtype=np.int8), -1)


def test_postprocess_grouped_respects_session_edges():
    segs = ScoredSegments(
        start_s=np.array([0.0, 5.0, 0.0, 5.0]),
        end_s=np.array([5.0, 10.0, 5.0, 10.0]),
        scores=np.array([0.9, 0.1, 0.1, 0.9]),
        labels=np.array([1, 0, 0, 1]),
        session_ids=("a", "a", "b", "b"),
    )
    decisions = np.array([1, 0, 0, 1], dtype=np.int8)
    # the 0-run spans the session boundary; neither half is interior
    assert np.array_equal(postprocess_grouped(segs, decisions, 2), decisions)


def test_rates_nan_for_absent_class():
    segs = ScoredSegments(
        start_s=np.array([0.0, 5.0]),
        end_s=np.array([5.0, 10.0]),
        scores=np.array([0.9, 0.2]),
        labels=np.array([1, 1]),
    )
    p_miss, p_fa = duration_normalized_rates(np.array([1, 0]), segs)
    assert p_miss == 0.5
    assert math.isnan(p_fa)
    with pytest.raises(ValueError):
        dcf(p_miss, p_fa)


def test_rates_duration_weighting():
    segs = ScoredSegments(
        start_s=np.array([0.0, 5.0, 20.0]),
        end_s=np.array([5.0, 20.0, 25.0]),  # 5 s live, 15 s live, 5 s distractor
        scores=np.array([0.9, 0.9, 0.1]),
        labels=np.array([1, 1, 0]),
    )
    p_miss, p_fa = duration_normalized_rates(np.array([0, 1, 0]), segs)
    assert p_miss == 5.0 / 20.0
    assert p_fa == 0.0


def test_rates_length_mismatch_rejected():
    segs = six_score_fixture()
    with pytest.raises(ValueError):
        duration_normalized_rates(np.array([1, 0]), segs)


def test_sweep_endpoints():
    thresholds, p_miss, p_fa = sweep_operating_points(six_score_fixture(), 0)
    assert thresholds[0] == -np.inf and thresholds[-1] == np.inf
    assert (p_miss[0], p_fa[0]) == (0.0, 1.0)
    assert (p_miss[-1], p_fa[-1]) == (1.0, 0.0)
    assert np.all(np.diff(thresholds) > 0)


def test_sweep_rejects_single_class():
    segs = ScoredSegments(
        start_s=np.array([0.0]), end_s=np.array([5.0]),
        scores=np.array([0.5]), labels=np.array([1]),
    )
    with pytest.raises(ValueError):
        sweep_operating_points(segs, 0)


def test_eer_invariant_under_monotone_score_transform():
    series = random_series(777)
    segs = segments_from(series)
    eer_a, _ = eer_with_postprocessing(segs, series["max_gap"])
    warped = segments_from(
        dict(series, scores=[(s + 1.0) / 3.0 for s in series["scores"]])
    )
    eer_b, _ = eer_with_postprocessing(warped, series["max_gap"])
    assert eer_a == eer_b


def test_validation_rejects_bad_series():
    with pytest.raises(ValueError):
        ScoredSegments(np.array([]), np.array([]), np.array([]), np.array([]))
    with pytest.raises(ValueError):  # zero duration
        ScoredSegments(np.array([0.0]), np.array([0.0]), np.array([0.5]), np.array([1]))
    with pytest.raises(ValueError):  # score out of range
        ScoredSegments(np.array([0.0]), np.array([5.0]), np.array([1.5]), np.array([1]))
    with pytest.raises(ValueError):  # bad label
        ScoredSegments(np.array([0.0]), np.array([5.0]), np.array([0.5]), np.array([2]))
    with pytest.raises(ValueError):  # overlap
        ScoredSegments(np.array([0.0, 3.0]), np.array([5.0, 8.0]),
                       np.array([0.5, 0.5]), np.array([1, 0]))
    with pytest.raises(ValueError):  # non-contiguous session blocks
        ScoredSegments(np.array([0.0, 0.0, 5.0]), np.array([5.0, 5.0, 10.0]),
                       np.array([0.5, 0.5, 0.5]), np.array([1, 0, 1]),
                       session_ids=("a", "b", "a"))
    with pytest.raises(ValueError):  # session id length mismatch
        ScoredSegments(np.array([0.0]), np.array([5.0]), np.array([0.5]),
                       np.array([1]), session_ids=("a", "b"))


def test_records_round_trip():
    segs = ScoredSegments(
        start_s=np.array([0.0, 5.0]), end_s=np.array([5.0, 10.0]),
        scores=np.array([0.25, 0.75]), labels=np.array([0, 1]),
        session_ids=("x", "x"),
    )
    back = ScoredSegments.from_records(segs.to_records())
    assert np.array_equal(back.start_s, segs.start_s)
    assert np.array_equal(back.scores, segs.scores)
    assert np.array_equal(back.labels, segs.labels)
    assert back.session_ids == segs.session_ids
    with pytest.raises(ValueError):
        ScoredSegments.from_records([])


def test_report_to_dict():
    rep = MetricsReport(p_miss=0.1, p_fa=0.2, dcf=0.125, eer=0.15, threshold=0.5)
    assert rep.to_dict() == {"p_miss": 0.1, "p_fa": 0.2, "dcf": 0.125,
                             "eer": 0.15, "threshold": 0.5}


def test_det_sweep_csv(tmp_path):
    path = tmp_path / "det.csv"
    write_det_sweep_csv(path, six_score_fixture(), 0)
    lines = path.read_text().splitlines()
    assert lines[0] == "threshold,p_miss,p_fa,dcf"
    assert len(lines) == 1 + 8  # -inf, six distinct scores, +inf
    first = lines[1].split(",")
    assert float(first[0]) == -np.inf
    assert float(first[1]) == 0.0 and float(first[2]) == 1.0


# ------------------------------------------------- randomized oracle agreement

def check_series_against_oracle(seed):
    series = random_series(seed)
    segs = segments_from(series)
    gap = series["max_gap"]

    points = brute_sweep(series["durations"], series["labels"], series["scores"],
                         series["sessions"], gap)
    thresholds, p_miss, p_fa = sweep_operating_points(segs, gap)
    assert len(points) == thresholds.shape[0]
    for k, (t, pm, pf) in enumerate(points):
        assert thresholds[k] == t
        assert p_miss[k] == pm, (seed, k)
        assert p_fa[k] == pf, (seed, k)

    want_eer, want_t = brute_eer(points)
    got_eer, got_t = eer_with_postprocessing(segs, gap)
    assert got_eer == want_eer, seed
    assert got_t == want_t, seed

    want_best = brute_best_dcf(points)
    got_thresh, report = best_threshold_by_dcf(segs, gap)
    assert got_thresh == want_best[0], seed
    assert report.dcf == want_best[1], seed
    assert report.p_miss == want_best[2], seed
    assert report.p_fa == want_best[3], seed


def test_oracle_agreement_randomized():
    for seed in range(300):
        check_series_against_oracle(seed)


def test_evaluate_at_threshold_matches_oracle():
    from oracles import brute_decide, brute_postprocess, brute_rates, _session_blocks

    for seed in range(50):
        series = random_series(seed + 10_000)
        segs = segments_from(series)
        gap = series["max_gap"]
        t = (seed % 17) / 16.0
        report = evaluate_at_threshold(segs, t, gap)
        decisions = brute_decide(series["scores"], t)
        filled = []
        for a, b in _session_blocks(series["sessions"], len(decisions)):
            filled.extend(brute_postprocess(decisions[a:b], gap))
        pm, pf = brute_rates(series["durations"], series["labels"], filled)
        assert report.p_miss == pm
        assert report.p_fa == pf
        assert report.dcf == 0.75 * pm + 0.25 * pf
        assert report.threshold == t
