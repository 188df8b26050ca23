"""Log-mel spectrogram front end and training-time augmentation.

The front end mirrors the standard recipe for this task family: Hamming
windowed frames, a 512-point DFT, triangular mel filters spanning 0 Hz to
Nyquist and natural-log power compression. Normalization is per segment
and per band (z-scoring); augmentation masks whole bands / frame ranges
and applies a mild piecewise-linear time warp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Waveform:
    """Mono audio samples with their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValueError("waveform must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.shape[0] / self.sample_rate


@dataclass(frozen=True)
class FrontendConfig:
    """Feature extraction settings.

    20 ms at 11025 Hz is 220.5 samples; the window is rounded down to an
    even sample count so a 50% hop is exact.
    """

    window_ms: float = 20.0
    overlap_fraction: float = 0.5
    dft_size: int = 512
    n_mel_bands: int = 40
    log_floor: float = 1e-10

    def __post_init__(self):
        if not 0 < self.overlap_fraction < 1:
            raise ValueError("overlap_fraction must be in (0, 1)")
        if self.n_mel_bands < 1:
            raise ValueError("n_mel_bands must be >= 1")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")

    def window_samples(self, sample_rate: int) -> int:
        win = int(sample_rate * self.window_ms / 1000.0)
        return win - (win % 2)

    def hop_samples(self, sample_rate: int) -> int:
        win = self.window_samples(sample_rate)
        return max(1, int(round(win * (1 - self.overlap_fraction))))

    def frame_rate_hz(self, sample_rate: int) -> float:
        return sample_rate / self.hop_samples(sample_rate)


@dataclass(frozen=True)
class Spectrogram:
    """frames x bands matrix of log-mel energies plus axis metadata."""

    values: np.ndarray
    frame_rate_hz: float
    band_centers_hz: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bands(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "Spectrogram":
        return Spectrogram(values=values, frame_rate_hz=self.frame_rate_hz,
                           band_centers_hz=self.band_centers_hz)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, dft_size: int, n_bands: int) -> tuple[np.ndarray, np.ndarray]:
    """Triangular mel filters as an (n_bands, dft_size//2 + 1) matrix.

    Band edges are uniform on the mel scale from 0 Hz to Nyquist. Each
    filter is normalized by its weight sum, capped at 1, so wide filters
    sum to one while the narrowest low-frequency filters keep sub-unit
    amplitude; the cap keeps every column sum at or below 1.

    Returns the weight matrix and the band center frequencies in Hz.
    """
    n_bins = dft_size // 2 + 1
    freqs = np.arange(n_bins) * sample_rate / dft_size
    edges = mel_to_hz(np.linspace(0.0, float(hz_to_mel(sample_rate / 2)), n_bands + 2))
    weights = np.zeros((n_bands, n_bins))
    for m in range(n_bands):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        rise = (freqs - lo) / max(center - lo, 1e-12)
        fall = (hi - freqs) / max(hi - center, 1e-12)
        tri = np.maximum(0.0, np.minimum(rise, fall))
        weights[m] = tri / max(tri.sum(), 1.0)
    return weights, edges[1:-1].copy()


def frame_count(n_samples: int, window: int, hop: int) -> int:
    return (n_samples - window) // hop + 1


def log_mel_spectrogram(wave: Waveform, cfg: FrontendConfig) -> Spectrogram:
    """Log-mel spectrogram of a waveform.

    Raises
    ------
    ValueError
        If the waveform is shorter than one analysis window.
    """
    win = cfg.window_samples(wave.sample_rate)
    hop = cfg.hop_samples(wave.sample_rate)
    n = wave.samples.shape[0]
    if n < win:
        raise ValueError(f"waveform of {n} samples is shorter than one {win}-sample window")
    if cfg.dft_size < win:
        raise ValueError(f"dft_size {cfg.dft_size} is smaller than the {win}-sample window")
    n_frames = frame_count(n, win, hop)
    stride = wave.samples.strides[0]
    frames = np.lib.stride_tricks.as_strided(
        wave.samples, shape=(n_frames, win), strides=(stride * hop, stride)
    )
    windowed = frames * np.hamming(win)
    power = np.abs(np.fft.rfft(windowed, n=cfg.dft_size, axis=1)) ** 2
    fbank, centers = mel_filterbank(wave.sample_rate, cfg.dft_size, cfg.n_mel_bands)
    mel_power = power @ fbank.T
    values = np.log(np.maximum(mel_power, cfg.log_floor))
    return Spectrogram(values=values, frame_rate_hz=cfg.frame_rate_hz(wave.sample_rate),
                       band_centers_hz=centers)


def normalize_segment(spec: Spectrogram) -> Spectrogram:
    """Z-score each band over the segment (population std).

    Constant bands come out all-zero instead of dividing by zero. Rejects
    single-frame input, whose standard deviation is undefined.
    """
    if spec.n_frames < 2:
        raise ValueError("segment normalization needs at least 2 frames")
    mean = spec.values.mean(axis=0)
    std = spec.values.std(axis=0)
    out = np.where(std > 0, (spec.values - mean) / np.where(std > 0, std, 1.0), 0.0)
    return spec.with_values(out)


@dataclass(frozen=True)
class AugmentPolicy:
    """SpecAugment-style masking and warp limits.

    Each mask draws a width uniformly in [0, max] and a start position;
    the warp displaces one interior anchor frame by up to
    ``time_warp_max_shift`` frames with linear interpolation. Widths of 0
    everywhere make the policy an exact identity.
    """

    n_freq_masks: int = 2
    max_freq_mask_width: int = 8
    n_time_masks: int = 2
    max_time_mask_width: int = 40
    time_warp_max_shift: int = 20
    mask_value: float = 0.0

    def __post_init__(self):
        if min(self.n_freq_masks, self.max_freq_mask_width, self.n_time_masks,
               self.max_time_mask_width, self.time_warp_max_shift) < 0:
            raise ValueError("augmentation counts, widths and shift must be >= 0")

    def validate_for(self, n_frames: int, n_bands: int):
        if self.max_freq_mask_width >= n_bands:
            raise ValueError("frequency mask width must be smaller than the band count")
        if self.max_time_mask_width >= n_frames:
            raise ValueError("time mask width must be smaller than the frame count")
        if self.time_warp_max_shift >= max(n_frames // 2, 1):
            raise ValueError("warp shift too large for the frame count")


def apply_freq_mask(values: np.ndarray, start: int, width: int, mask_value: float) -> np.ndarray:
    out = values.copy()
    out[:, start : start + width] = mask_value
    return out


def apply_time_mask(values: np.ndarray, start: int, width: int, mask_value: float) -> np.ndarray:
    out = values.copy()
    out[start : start + width, :] = mask_value
    return out


def apply_time_warp(values: np.ndarray, anchor: int, shift: int) -> np.ndarray:
    """Piecewise-linear warp moving frame ``anchor`` to ``anchor + shift``."""
    if shift == 0:
        return values.copy()
    n = values.shape[0]
    target = anchor + shift
    grid = np.arange(n, dtype=float)
    # source position for each output frame, linear on both sides of the anchor
    src = np.empty(n)
    left = grid[: target + 1] * (anchor / target) if target > 0 else grid[:1]
    src[: target + 1] = left
    src[target:] = anchor + (grid[target:] - target) * ((n - 1 - anchor) / (n - 1 - target))
    idx = np.clip(np.floor(src).astype(int), 0, n - 2)
    frac = src - idx
    return values[idx] * (1 - frac[:, None]) + values[idx + 1] * frac[:, None]


def spec_augment(spec: Spectrogram, policy: AugmentPolicy, rng: np.random.Generator) -> Spectrogram:
    """Apply time warp then frequency and time masks; shape is preserved."""
    policy.validate_for(spec.n_frames, spec.n_bands)
    out = spec.values
    if policy.time_warp_max_shift > 0 and spec.n_frames > 2:
        lo = policy.time_warp_max_shift
        hi = spec.n_frames - 1 - policy.time_warp_max_shift
        anchor = int(rng.integers(lo, hi)) if hi > lo else (spec.n_frames - 1) // 2
        shift = int(rng.integers(-policy.time_warp_max_shift, policy.time_warp_max_shift + 1))
        out = apply_time_warp(out, anchor, shift)
    for _ in range(policy.n_freq_masks):
        width = int(rng.integers(0, policy.max_freq_mask_width + 1))
        start = int(rng.integers(0, spec.n_bands - width + 1))
        if width > 0:
            out = apply_freq_mask(out, start, width, policy.mask_value)
    for _ in range(policy.n_time_masks):
        width = int(rng.integers(0, policy.max_time_mask_width + 1))
        start = int(rng.integers(0, spec.n_frames - width + 1))
        if width > 0:
            out = apply_time_mask(out, start, width, policy.mask_value)
    if out is spec.values:
        out = out.copy()
    return spec.with_values(out)
