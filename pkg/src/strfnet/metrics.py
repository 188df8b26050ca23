"""Detection metrics for long-session voice-type discrimination.

Scores are posterior probabilities of live speech per fixed-length
segment. A decision series comes from thresholding (live iff score >=
threshold). Brief distractor-hypothesized gaps flanked by live decisions
are re-labeled live before rates are computed; miss and false-alarm
rates are normalized by class duration, and the detection cost weights
misses three times as heavily as false alarms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

LIVE = 1
DISTRACTOR = 0
LABEL_NAMES = {LIVE: "live", DISTRACTOR: "distractor"}
MISS_WEIGHT = 0.75
FA_WEIGHT = 0.25
SEGMENT_SECONDS = 5.0


def label_to_int(name: str) -> int:
    for value, key in LABEL_NAMES.items():
        if key == name:
            return value
    raise ValueError(f"unknown label {name!r}")


@dataclass(frozen=True)
class ScoredSegments:
    """Time-ordered, non-overlapping scored segments, optionally grouped
    into independent sessions (gap filling never crosses a session edge)."""

    start_s: np.ndarray
    end_s: np.ndarray
    scores: np.ndarray
    labels: np.ndarray
    session_ids: tuple | None = None

    def __post_init__(self):
        start = np.asarray(self.start_s, dtype=float)
        end = np.asarray(self.end_s, dtype=float)
        scores = np.asarray(self.scores, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int8)
        n = start.shape[0]
        if not (start.shape == end.shape == scores.shape == labels.shape) or start.ndim != 1:
            raise ValueError("segment fields must be equal-length 1-D arrays")
        if n == 0:
            raise ValueError("empty segment series")
        if np.any(end <= start):
            raise ValueError("segments must have positive duration")
        if np.any((scores < 0) | (scores > 1)) or not np.all(np.isfinite(scores)):
            raise ValueError("scores must lie in [0, 1]")
        if not np.all((labels == LIVE) | (labels == DISTRACTOR)):
            raise ValueError("labels must be 0 (distractor) or 1 (live)")
        object.__setattr__(self, "start_s", start)
        object.__setattr__(self, "end_s", end)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        if self.session_ids is not None:
            ids = tuple(self.session_ids)
            if len(ids) != n:
                raise ValueError("session_ids length mismatch")
            object.__setattr__(self, "session_ids", ids)
        for sl in self.group_slices():
            s, e = start[sl], end[sl]
            if np.any(s[1:] < e[:-1] - 1e-9):
                raise ValueError("segments overlap or are out of order within a session")

    def group_slices(self) -> list[slice]:
        if self.session_ids is None:
            return [slice(0, self.start_s.shape[0])]
        slices, seen = [], set()
        begin = 0
        for i in range(1, len(self.session_ids) + 1):
            if i == len(self.session_ids) or self.session_ids[i] != self.session_ids[begin]:
                sid = self.session_ids[begin]
                if sid in seen:
                    raise ValueError(f"session {sid!r} appears in non-contiguous blocks")
                seen.add(sid)
                slices.append(slice(begin, i))
                begin = i
        return slices

    @property
    def durations(self) -> np.ndarray:
        return self.end_s - self.start_s

    def has_both_classes(self) -> bool:
        return bool(np.any(self.labels == LIVE) and np.any(self.labels == DISTRACTOR))

    def to_records(self) -> list[dict]:
        records = []
        for i in range(self.start_s.shape[0]):
            rec = {
                "start_s": float(self.start_s[i]),
                "end_s": float(self.end_s[i]),
                "score": float(self.scores[i]),
                "label": LABEL_NAMES[int(self.labels[i])],
            }
            if self.session_ids is not None:
                rec["session"] = self.session_ids[i]
            records.append(rec)
        return records

    @classmethod
    def from_records(cls, records) -> "ScoredSegments":
        records = list(records)
        if not records:
            raise ValueError("no segment records")
        has_session = "session" in records[0]
        return cls(
            start_s=np.array([r["start_s"] for r in records], dtype=float),
            end_s=np.array([r["end_s"] for r in records], dtype=float),
            scores=np.array([r["score"] for r in records], dtype=float),
            labels=np.array([label_to_int(r["label"]) for r in records], dtype=np.int8),
            session_ids=tuple(r["session"] for r in records) if has_session else None,
        )


@dataclass(frozen=True)
class MetricsReport:
    p_miss: float
    p_fa: float
    dcf: float
    eer: float
    threshold: float

    def to_dict(self) -> dict:
        return {"p_miss": self.p_miss, "p_fa": self.p_fa, "dcf": self.dcf,
                "eer": self.eer, "threshold": self.threshold}


def threshold_decisions(scores: np.ndarray, threshold: float) -> np.ndarray:
    """Binary decisions: live iff score >= threshold."""
    return (np.asarray(scores, dtype=float) >= threshold).astype(np.int8)


def postprocess(decisions: np.ndarray, max_gap_segments: int) -> np.ndarray:
    """Fill brief distractor gaps between live decisions.

    Any maximal run of distractor decisions of length <= max_gap_segments
    flanked by live decisions on both sides flips to live. Idempotent;
    runs touching either end of the series are never flipped.
    """
    if max_gap_segments < 0:
        raise ValueError("max_gap_segments must be >= 0")
    out = np.asarray(decisions, dtype=np.int8).copy()
    n = out.shape[0]
    i = 0
    while i < n:
        if out[i] == DISTRACTOR:
            j = i
            while j < n and out[j] == DISTRACTOR:
                j += 1
            if i > 0 and j < n and (j - i) <= max_gap_segments:
                out[i:j] = LIVE
            i = j
        else:
            i += 1
    return out


def postprocess_grouped(segments: ScoredSegments, decisions: np.ndarray,
                        max_gap_segments: int) -> np.ndarray:
    out = np.asarray(decisions, dtype=np.int8).copy()
    for sl in segments.group_slices():
        out[sl] = postprocess(out[sl], max_gap_segments)
    return out


def duration_normalized_rates(decisions: np.ndarray, truth: ScoredSegments) -> tuple[float, float]:
    """(p_miss, p_fa) weighted by segment duration.

    A class absent from the truth makes its rate NaN; dcf() refuses NaN,
    so downstream cost computation fails loudly rather than silently.
    """
    decisions = np.asarray(decisions)
    if decisions.shape != truth.labels.shape:
        raise ValueError("decision series length must match the truth series")
    dur = truth.durations
    live = truth.labels == LIVE
    live_total = float(dur[live].sum())
    distractor_total = float(dur[~live].sum())
    if live_total > 0:
        p_miss = float(dur[live & (decisions == DISTRACTOR)].sum()) / live_total
    else:
        p_miss = math.nan
    if distractor_total > 0:
        p_fa = float(dur[~live & (decisions == LIVE)].sum()) / distractor_total
    else:
        p_fa = math.nan
    return p_miss, p_fa


def dcf(p_miss: float, p_fa: float) -> float:
    """Detection cost 0.75*p_miss + 0.25*p_fa; rejects rates outside [0, 1]."""
    if not (0.0 <= p_miss <= 1.0 and 0.0 <= p_fa <= 1.0):
        raise ValueError(f"rates must be in [0, 1], got p_miss={p_miss}, p_fa={p_fa}")
    return MISS_WEIGHT * p_miss + FA_WEIGHT * p_fa


def sweep_operating_points(segments: ScoredSegments, max_gap_segments: int
                           ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rates at every distinct score plus accept-all / reject-all sentinels.

    Returns (thresholds ascending, p_miss, p_fa); endpoints are always
    (0, 1) at -inf and (1, 0) at +inf, so a miss/false-alarm crossing
    exists somewhere in the sweep.
    """
    if not segments.has_both_classes():
        raise ValueError("sweep needs at least one segment of each class")
    thresholds = np.concatenate([[-np.inf], np.unique(segments.scores), [np.inf]])
    p_miss = np.empty(thresholds.shape[0])
    p_fa = np.empty(thresholds.shape[0])
    for k, t in enumerate(thresholds):
        decided = postprocess_grouped(segments, threshold_decisions(segments.scores, t),
                                      max_gap_segments)
        p_miss[k], p_fa[k] = duration_normalized_rates(decided, segments)
    return thresholds, p_miss, p_fa


def eer_with_postprocessing(segments: ScoredSegments, max_gap_segments: int
                            ) -> tuple[float, float]:
    """Equal error rate over the postprocessed sweep.

    Scans thresholds in ascending order for the first sign change of
    p_miss - p_fa and linearly interpolates both rates between the two
    straddling operating points; an exact crossing is returned as-is.
    The reported threshold is interpolated alongside (falling back to
    the finite endpoint when the crossing involves a sentinel).
    """
    thresholds, p_miss, p_fa = sweep_operating_points(segments, max_gap_segments)
    diff = p_miss - p_fa
    for k in range(thresholds.shape[0]):
        if diff[k] == 0.0:
            return float(p_miss[k]), float(thresholds[k])
        if diff[k] > 0.0:
            d0, d1 = diff[k - 1], diff[k]
            alpha = d0 / (d0 - d1)
            eer = float(p_miss[k - 1] + alpha * (p_miss[k] - p_miss[k - 1]))
            t0, t1 = thresholds[k - 1], thresholds[k]
            if np.isfinite(t0) and np.isfinite(t1):
                t_eer = float(t0 + alpha * (t1 - t0))
            else:
                t_eer = float(t0 if np.isfinite(t0) else t1)
            return eer, t_eer
    raise RuntimeError("no miss/false-alarm crossing found")  # unreachable: endpoints straddle


def best_threshold_by_dcf(segments: ScoredSegments, max_gap_segments: int
                          ) -> tuple[float, MetricsReport]:
    """Lowest-DCF threshold over the sweep, ties broken toward the lower
    threshold (fewer misses under the 3:1 weighting)."""
    thresholds, p_miss, p_fa = sweep_operating_points(segments, max_gap_segments)
    costs = np.array([dcf(pm, pf) for pm, pf in zip(p_miss, p_fa)])
    k = int(np.argmin(costs))  # first minimum = lowest threshold
    eer, _ = eer_with_postprocessing(segments, max_gap_segments)
    report = MetricsReport(p_miss=float(p_miss[k]), p_fa=float(p_fa[k]),
                           dcf=float(costs[k]), eer=eer, threshold=float(thresholds[k]))
    return float(thresholds[k]), report


def evaluate_at_threshold(segments: ScoredSegments, threshold: float,
                          max_gap_segments: int) -> MetricsReport:
    """Fixed-threshold report (threshold chosen elsewhere, e.g. on dev)."""
    decided = postprocess_grouped(segments, threshold_decisions(segments.scores, threshold),
                                  max_gap_segments)
    p_miss, p_fa = duration_normalized_rates(decided, segments)
    eer, _ = eer_with_postprocessing(segments, max_gap_segments)
    return MetricsReport(p_miss=p_miss, p_fa=p_fa, dcf=dcf(p_miss, p_fa),
                         eer=eer, threshold=float(threshold))


def write_det_sweep_csv(path, segments: ScoredSegments, max_gap_segments: int):
    """Plot-ready DET sweep: one (threshold, p_miss, p_fa, dcf) row per point."""
    thresholds, p_miss, p_fa = sweep_operating_points(segments, max_gap_segments)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "p_miss", "p_fa", "dcf"])
        for t, pm, pf in zip(thresholds, p_miss, p_fa):
            writer.writerow([repr(float(t)), repr(float(pm)), repr(float(pf)),
                             repr(dcf(pm, pf))])
