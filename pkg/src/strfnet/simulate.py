"""Synthetic long-session audio with exact live/distractor timelines.

Real labeled session corpora for this task are not distributable, so the
pipeline trains and evaluates on generated sessions: a mostly-active
distractor track (playback-like audio, traffic noise, sustained tones)
with a sparse live-speech track mixed on top at a controlled SNR. Labels
are exact by construction. Everything is a pure function of (config,
seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .audio_io import read_jsonl, read_wav, write_jsonl, write_wav
from .frontend import Waveform

SAMPLE_RATE = 11025
LIVE_CLASS = "live"
SILENCE_CLASS = "silence"
DISTRACTOR_KINDS = ("broadcast_proxy", "traffic_noise", "music_proxy")

_NOMINAL_RMS = 0.1
_FADE_S = 0.01


@dataclass(frozen=True)
class SessionTimeline:
    """Interval annotations for one session.

    Live and distractor intervals may overlap (separate tracks); silence
    intervals overlap nothing.
    """

    intervals: tuple
    total_duration_s: float

    def __post_init__(self):
        ivs = tuple((float(a), float(b), str(c)) for a, b, c in self.intervals)
        ivs = tuple(sorted(ivs, key=lambda iv: (iv[0], iv[1], iv[2])))
        for a, b, c in ivs:
            if not 0 <= a < b <= self.total_duration_s + 1e-9:
                raise ValueError(f"interval ({a}, {b}) outside session bounds")
            if c != SILENCE_CLASS and c != LIVE_CLASS and c not in DISTRACTOR_KINDS:
                raise ValueError(f"unknown interval class {c!r}")
        for a, b, c in ivs:
            if c == SILENCE_CLASS:
                for a2, b2, c2 in ivs:
                    if c2 != SILENCE_CLASS and min(b, b2) - max(a, a2) > 1e-9:
                        raise ValueError("silence interval overlaps an active interval")
        object.__setattr__(self, "intervals", ivs)

    def by_class(self, cls: str) -> list[tuple[float, float]]:
        return [(a, b) for a, b, c in self.intervals if c == cls]

    def live_intervals(self) -> list[tuple[float, float]]:
        return self.by_class(LIVE_CLASS)

    def live_occupancy(self) -> float:
        return sum(b - a for a, b in self.live_intervals()) / self.total_duration_s

    def live_overlap(self, start_s: float, end_s: float) -> float:
        return sum(max(0.0, min(b, end_s) - max(a, start_s))
                   for a, b in self.live_intervals())


@dataclass(frozen=True)
class SessionConfig:
    """Knobs for session synthesis; defaults give a desk-scale session."""

    sample_rate: int = SAMPLE_RATE
    distractor_kinds: tuple = DISTRACTOR_KINDS
    distractor_event_s: tuple = (10.0, 30.0)
    distractor_gap_s: tuple = (2.0, 8.0)
    distractor_gap_prob: float = 0.35
    utterance_s: tuple = (3.0, 15.0)
    live_to_distractor_snr_db: tuple = (0.0, 20.0)
    background_rms: float = 1e-3


def _fade_envelope(n: int, sample_rate: int) -> np.ndarray:
    ramp = min(max(int(_FADE_S * sample_rate), 1), n // 2)
    env = np.ones(n)
    if ramp > 0:
        edge = np.linspace(0.0, 1.0, ramp, endpoint=False)
        env[:ramp] = edge
        env[-ramp:] = edge[::-1]
    return env


def _normalize_rms(x: np.ndarray, rms: float = _NOMINAL_RMS) -> np.ndarray:
    p = np.sqrt(np.mean(x ** 2))
    return x * (rms / p) if p > 0 else x


def _control_walk(n: int, rate: int, rng, lo: float, hi: float, step: float,
                  hop_s: float = 0.05) -> np.ndarray:
    """Piecewise-linear random walk in [lo, hi], one control point per hop."""
    n_ctrl = max(2, int(np.ceil(n / (hop_s * rate))) + 1)
    walk = np.empty(n_ctrl)
    walk[0] = rng.uniform(lo, hi)
    for i in range(1, n_ctrl):
        walk[i] = walk[i - 1] + rng.normal(0.0, step)
    # reflect back into range
    span = hi - lo
    walk = lo + np.abs((walk - lo + span) % (2 * span) - span)
    ctrl_t = np.arange(n_ctrl) * hop_s
    return np.interp(np.arange(n) / rate, ctrl_t, walk)


def synth_live(duration_s: float, rng: np.random.Generator,
               sample_rate: int = SAMPLE_RATE) -> Waveform:
    """Live-speech proxy: harmonic tone with drifting fundamental
    (100-250 Hz), syllabic-rate amplitude modulation (2-8 Hz) and a
    broadband noise floor 25 dB down."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = _control_walk(n, sample_rate, rng, 100.0, 250.0, step=8.0)
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    n_harm = int((sample_rate / 2) // 250)  # keeps every partial below Nyquist
    x = np.zeros(n)
    for h in range(1, n_harm + 1):
        x += np.sin(h * phase + rng.uniform(0, 2 * np.pi)) / h
    am_rate = rng.uniform(2.0, 8.0)
    am = 1.0 + 0.8 * np.sin(2 * np.pi * am_rate * t + rng.uniform(0, 2 * np.pi))
    x *= am / 1.8
    noise = rng.standard_normal(n)
    x = _normalize_rms(x) + _normalize_rms(noise, _NOMINAL_RMS * 10 ** (-25 / 20))
    return Waveform(samples=_normalize_rms(x), sample_rate=sample_rate)


def _playback_channel(x: np.ndarray, rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    """Fixed band-limited (300-3400 Hz) channel with mild reverberant smearing."""
    sos = signal.butter(8, [300.0, 3400.0], btype="bandpass", fs=sample_rate, output="sos")
    y = signal.sosfiltfilt(sos, x)
    ir_len = int(0.06 * sample_rate)
    ir = rng.standard_normal(ir_len) * np.exp(-np.arange(ir_len) / (0.015 * sample_rate))
    ir[0] = 1.0
    ir /= np.sqrt(np.sum(ir ** 2))
    return np.convolve(y, ir)[: x.shape[0]]


def synth_distractor(kind: str, duration_s: float, rng: np.random.Generator,
                     sample_rate: int = SAMPLE_RATE) -> Waveform:
    """Distractor audio of the requested kind; see module docstring."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    if kind == "broadcast_proxy":
        src = synth_live(duration_s, rng, sample_rate)
        x = _playback_channel(src.samples, rng, sample_rate)
    elif kind == "traffic_noise":
        sos = signal.butter(4, 300.0, btype="lowpass", fs=sample_rate, output="sos")
        x = signal.sosfiltfilt(sos, rng.standard_normal(n))
        x *= 10 ** (_control_walk(n, sample_rate, rng, -6.0, 6.0, step=1.0, hop_s=0.5) / 20)
    elif kind == "music_proxy":
        n_tones = int(rng.integers(3, 6))
        x = np.zeros(n)
        for _ in range(n_tones):
            f = rng.uniform(200.0, 800.0)
            vib = 0.003 * f * np.sin(2 * np.pi * rng.uniform(4.0, 6.0) * t
                                     + rng.uniform(0, 2 * np.pi))
            gain = 10 ** (_control_walk(n, sample_rate, rng, -6.0, 0.0, step=1.5, hop_s=0.5) / 20)
            for mult, amp in ((1.0, 1.0), (2.0, 0.4)):
                x += amp * gain * np.sin(2 * np.pi * mult * np.cumsum(f + vib) / sample_rate)
    else:
        raise ValueError(f"unknown distractor kind {kind!r}")
    return Waveform(samples=_normalize_rms(x), sample_rate=sample_rate)


def mix_at_snr(target: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """target + noise rescaled for the requested global SNR over the segment."""
    if target.sample_rate != noise.sample_rate:
        raise ValueError("sample rates differ")
    if target.samples.shape != noise.samples.shape:
        raise ValueError("lengths differ")
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    p_target = float(np.mean(target.samples ** 2))
    p_noise = float(np.mean(noise.samples ** 2))
    if p_target <= 0 or p_noise <= 0:
        raise ValueError("zero-power target or noise")
    scale = np.sqrt(p_target / (p_noise * 10 ** (snr_db / 10)))
    return Waveform(samples=target.samples + scale * noise.samples,
                    sample_rate=target.sample_rate)


def _place_utterances(duration_s: float, live_fraction: float, bounds: tuple,
                      rng: np.random.Generator) -> list[tuple[float, float]]:
    """Non-overlapping utterance intervals hitting the requested occupancy.

    Durations are drawn from ``bounds`` until within 0.25 s of the
    target; random inter-utterance gaps then spread them over the
    session, so realized occupancy error is < 0.25 s / duration.
    """
    target = live_fraction * duration_s
    lengths = []
    cum = 0.0
    while target - cum > 0.25:
        u = min(rng.uniform(*bounds), target - cum)
        if u < 0.25:
            break
        lengths.append(u)
        cum += u
    if not lengths:
        raise ValueError("requested live occupancy too small for one utterance")
    gaps = rng.exponential(1.0, size=len(lengths) + 1)
    gaps *= (duration_s - cum) / gaps.sum()
    out, t = [], 0.0
    for u, g in zip(lengths, gaps):
        t += g
        out.append((t, t + u))
        t += u
    return out


def build_session(duration_s: float, live_fraction: float, rng: np.random.Generator,
                  config: SessionConfig = SessionConfig()) -> tuple[Waveform, SessionTimeline]:
    """One session waveform plus its exact timeline.

    The distractor track is active most of the time with occasional
    gaps; live utterances are placed to realize ``live_fraction`` and
    may overlap distractors. The live/distractor level difference is a
    per-session draw from ``config.live_to_distractor_snr_db``.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    if not 0 < live_fraction < 1:
        raise ValueError("live_fraction must be in (0, 1)")
    sr = config.sample_rate
    n = int(round(duration_s * sr))
    intervals = []

    distractor = np.zeros(n)
    t = 0.0
    while t < duration_s - 1.0:
        dur = min(rng.uniform(*config.distractor_event_s), duration_s - t)
        kind = config.distractor_kinds[int(rng.integers(len(config.distractor_kinds)))]
        event = synth_distractor(kind, dur, rng, sr)
        i0 = int(round(t * sr))
        seg = event.samples[: n - i0]
        if seg.shape[0] > 0:
            distractor[i0 : i0 + seg.shape[0]] += seg * _fade_envelope(seg.shape[0], sr)
            # interval bounds on the sample grid, clamped to session length
            intervals.append((i0 / sr, min(duration_s, (i0 + seg.shape[0]) / sr), kind))
        t += dur
        if rng.uniform() < config.distractor_gap_prob:
            t += rng.uniform(*config.distractor_gap_s)

    live = np.zeros(n)
    for a, b in _place_utterances(duration_s, live_fraction, config.utterance_s, rng):
        utt = synth_live(b - a, rng, sr)
        i0 = int(round(a * sr))
        seg = utt.samples[: n - i0]
        if seg.shape[0] > 0:
            live[i0 : i0 + seg.shape[0]] += seg * _fade_envelope(seg.shape[0], sr)
            intervals.append((i0 / sr, min(duration_s, (i0 + seg.shape[0]) / sr), LIVE_CLASS))

    # per-session live-vs-distractor SNR over the active spans
    p_live = float(np.mean(live[live != 0] ** 2)) if np.any(live != 0) else 0.0
    p_dist = float(np.mean(distractor[distractor != 0] ** 2)) if np.any(distractor != 0) else 0.0
    if p_live > 0 and p_dist > 0:
        snr = rng.uniform(*config.live_to_distractor_snr_db)
        distractor *= np.sqrt(p_live / (p_dist * 10 ** (snr / 10)))

    mix = live + distractor + config.background_rms * rng.standard_normal(n)
    peak = np.max(np.abs(mix))
    if peak > 0.99:
        mix *= 0.99 / peak

    for a, b in _silence_complement(intervals, duration_s):
        intervals.append((a, b, SILENCE_CLASS))
    timeline = SessionTimeline(intervals=tuple(intervals), total_duration_s=duration_s)
    return Waveform(samples=mix, sample_rate=sr), timeline


def _silence_complement(intervals, total: float) -> list[tuple[float, float]]:
    active = sorted((a, b) for a, b, _ in intervals)
    out, t = [], 0.0
    for a, b in active:
        if a - t > 1e-6:
            out.append((t, a))
        t = max(t, b)
    if total - t > 1e-6:
        out.append((t, total))
    return out


@dataclass(frozen=True)
class SegmentLabels:
    """Fixed-length segmentation of a session with exact class labels."""

    start_s: np.ndarray
    end_s: np.ndarray
    labels: np.ndarray  # 1 = live, 0 = distractor


def segment_session(timeline: SessionTimeline, segment_s: float = 5.0,
                    live_overlap_threshold: float = 0.5) -> SegmentLabels:
    """Contiguous ``segment_s`` segments; the final partial one is dropped.

    A segment is live iff its live-speech overlap fraction reaches the
    threshold (boundary counts as live).
    """
    if timeline.total_duration_s < segment_s:
        raise ValueError("session shorter than one segment")
    n_seg = int(np.floor(timeline.total_duration_s / segment_s + 1e-9))
    starts = np.arange(n_seg) * segment_s
    ends = starts + segment_s
    labels = np.zeros(n_seg, dtype=np.int8)
    for k in range(n_seg):
        frac = timeline.live_overlap(starts[k], ends[k]) / segment_s
        labels[k] = 1 if frac >= live_overlap_threshold - 1e-9 else 0
    return SegmentLabels(start_s=starts, end_s=ends, labels=labels)


def segment_samples(wave: Waveform, start_s: float, end_s: float) -> Waveform:
    i0 = int(round(start_s * wave.sample_rate))
    i1 = int(round(end_s * wave.sample_rate))
    return Waveform(samples=wave.samples[i0:i1].copy(), sample_rate=wave.sample_rate)


def write_session(out_dir, name: str, wave: Waveform, timeline: SessionTimeline):
    """Session WAV plus JSONL timeline (meta line, then interval lines)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_wav(out_dir / f"{name}.wav", wave)
    records = [{"kind": "meta", "total_duration_s": timeline.total_duration_s,
                "sample_rate": wave.sample_rate}]
    records += [{"kind": "interval", "start_s": a, "end_s": b, "class": c}
                for a, b, c in timeline.intervals]
    write_jsonl(out_dir / f"{name}_timeline.jsonl", records)


def read_session(out_dir, name: str) -> tuple[Waveform, SessionTimeline]:
    out_dir = Path(out_dir)
    wave = read_wav(out_dir / f"{name}.wav")
    records = read_jsonl(out_dir / f"{name}_timeline.jsonl")
    meta = [r for r in records if r["kind"] == "meta"]
    if len(meta) != 1:
        raise ValueError("timeline file must contain exactly one meta record")
    intervals = tuple((r["start_s"], r["end_s"], r["class"])
                      for r in records if r["kind"] == "interval")
    return wave, SessionTimeline(intervals=intervals,
                                 total_duration_s=meta[0]["total_duration_s"])
