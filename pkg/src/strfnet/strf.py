"""Discrete spectro-temporal receptive field kernels.

A kernel is the real part of the outer product of two analytic envelopes:
a temporal envelope dilated by the temporal modulation frequency (Hz) and a
spectral envelope dilated by the spectral modulation frequency (cycles per
frequency channel). Characteristic phases enter through the analytic
signal (``h*cos(phase) + hilbert(h)*sin(phase)``), and the temporal factor
is conjugated for upward-drifting kernels so the two drift directions
occupy opposite sign-quadrants of the 2D spectrum.

All four scalars per kernel are differentiable; :func:`strf_jacobian`
returns the exact parameter derivatives used during training.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .hilbert import HilbertFir, circular_analytic, circular_hilbert_transfer, design_hilbert_fir

UPWARD = "upward"
DOWNWARD = "downward"

# Initialization ranges for the learnable scalars.
TEMPORAL_MOD_RANGE_HZ = (0.0, 10.0)
SPECTRAL_MOD_RANGE_CPC = (0.0, 0.2)


@dataclass(frozen=True)
class StrfParams:
    """Learnable scalars plus fixed geometry for one kernel.

    ``spectral_mod`` is in cycles per frequency channel, ``temporal_mod``
    in Hz; both phases are in radians and stored unconstrained.
    """

    spectral_mod: float
    temporal_mod: float
    spectral_phase: float
    temporal_phase: float
    direction: str
    time_support_s: float
    channel_support: int
    frame_rate: float
    channels_per_octave: float

    def __post_init__(self):
        if self.direction not in (UPWARD, DOWNWARD):
            raise ValueError(f"unknown drift direction: {self.direction!r}")
        if self.time_support_s <= 0:
            raise ValueError("time_support_s must be positive")
        if self.channel_support < 1 or self.channel_support % 2 == 0:
            raise ValueError("channel_support must be odd and >= 1")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")

    @property
    def time_frames(self) -> int:
        return int(round(self.time_support_s * self.frame_rate))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.time_frames, self.channel_support)


def temporal_seed(u: np.ndarray) -> np.ndarray:
    """t^2 * exp(-3.5 t) * sin(2 pi t) evaluated at dimensionless time."""
    return u**2 * np.exp(-3.5 * u) * np.sin(2 * np.pi * u)


def temporal_seed_deriv(u: np.ndarray) -> np.ndarray:
    e = np.exp(-3.5 * u)
    s = np.sin(2 * np.pi * u)
    return e * (2 * u * s - 3.5 * u**2 * s + 2 * np.pi * u**2 * np.cos(2 * np.pi * u))


def spectral_seed(v: np.ndarray) -> np.ndarray:
    """(1 - x^2) * exp(-x^2 / 2) evaluated at dimensionless channel offset."""
    return (1 - v**2) * np.exp(-(v**2) / 2)


def spectral_seed_deriv(v: np.ndarray) -> np.ndarray:
    return (v**3 - 3 * v) * np.exp(-(v**2) / 2)


def _check_finite(p: StrfParams):
    vals = (p.spectral_mod, p.temporal_mod, p.spectral_phase, p.temporal_phase)
    if not all(np.isfinite(v) for v in vals):
        raise ValueError(f"non-finite STRF parameters: {vals}")


def _temporal_grid(p: StrfParams) -> np.ndarray:
    # causal grid [0, time_support)
    return np.arange(p.time_frames) / p.frame_rate


def _spectral_grid(p: StrfParams) -> np.ndarray:
    # centered grid in octaves; channel k sits (k - center)/K octaves away
    center = (p.channel_support - 1) / 2
    return (np.arange(p.channel_support) - center) / p.channels_per_octave


def _analytic_factors(p: StrfParams, fir: HilbertFir, d_temporal=False, d_spectral=False):
    """Analytic temporal and spectral envelopes with phases applied.

    With ``d_temporal``/``d_spectral`` the corresponding envelope is
    replaced by its derivative with respect to the modulation frequency;
    the Hilbert transform commutes with that derivative because it is
    linear in the seed samples.
    """
    t = _temporal_grid(p)
    u = p.temporal_mod * t
    if d_temporal:
        ht = temporal_seed(u) + p.temporal_mod * t * temporal_seed_deriv(u)
    else:
        ht = p.temporal_mod * temporal_seed(u)
    x = _spectral_grid(p)
    omega_oct = p.spectral_mod * p.channels_per_octave  # cycles/channel -> cycles/octave
    v = omega_oct * x
    if d_spectral:
        dhs = spectral_seed(v) + omega_oct * x * spectral_seed_deriv(v)
        hs = p.channels_per_octave * dhs  # chain through the unit conversion
    else:
        hs = omega_oct * spectral_seed(v)

    a_t = circular_analytic(ht, circular_hilbert_transfer(fir, ht.shape[0]))
    a_s = circular_analytic(hs, circular_hilbert_transfer(fir, hs.shape[0]))
    a_t = a_t * np.exp(-1j * p.temporal_phase)
    a_s = a_s * np.exp(-1j * p.spectral_phase)
    return a_t, a_s


def _combine(a_t: np.ndarray, a_s: np.ndarray, direction: str) -> np.ndarray:
    if direction == UPWARD:
        a_t = np.conj(a_t)
    return np.real(np.outer(a_t, a_s))


def assemble_strf(p: StrfParams, fir: HilbertFir) -> np.ndarray:
    """Assemble the discrete kernel for one parameter set.

    Returns an array of shape ``(round(time_support_s * frame_rate),
    channel_support)``.
    """
    _check_finite(p)
    a_t, a_s = _analytic_factors(p, fir)
    return _combine(a_t, a_s, p.direction)


def strf_jacobian(p: StrfParams, fir: HilbertFir) -> np.ndarray:
    """Exact kernel derivatives with respect to the four learnable scalars.

    Returns an array of shape ``(4, T, F)`` ordered (spectral_mod,
    temporal_mod, spectral_phase, temporal_phase). Phase derivatives use
    the quarter-period shift identity dK/dphase = K(phase + pi/2);
    modulation derivatives differentiate the dilated seed and reuse the
    Hilbert transform's linearity.
    """
    _check_finite(p)
    a_t, a_s = _analytic_factors(p, fir)
    da_t, _ = _analytic_factors(p, fir, d_temporal=True)
    _, da_s = _analytic_factors(p, fir, d_spectral=True)
    d_spectral_mod = _combine(a_t, da_s, p.direction)
    d_temporal_mod = _combine(da_t, a_s, p.direction)
    d_spectral_phase = _combine(a_t, a_s * np.exp(-1j * np.pi / 2), p.direction)
    # e^{-j theta} differentiates to e^{-j (theta + pi/2)}; the conjugation
    # applied for upward kernels carries the shift through unchanged.
    d_temporal_phase = _combine(a_t * np.exp(-1j * np.pi / 2), a_s, p.direction)
    return np.stack([d_spectral_mod, d_temporal_mod, d_spectral_phase, d_temporal_phase])


def drift_quadrant_fraction(kernel: np.ndarray) -> float:
    """Fraction of sign-assignable 2D-DFT energy in the opposite-sign quadrants.

    Energy on the zero-frequency and Nyquist lines has no drift direction
    and is excluded from the normalization. Upward kernels concentrate in
    the quadrants where temporal and spectral frequencies have opposite
    signs (fraction near 1), downward kernels in the other two (near 0).
    """
    spectrum = np.abs(np.fft.fft2(kernel)) ** 2
    ft = np.fft.fftfreq(kernel.shape[0])
    fs = np.fft.fftfreq(kernel.shape[1])
    tt, ss = np.meshgrid(ft, fs, indexing="ij")
    pos_t, neg_t = (tt > 0) & (tt < 0.5), (tt < 0) & (tt > -0.5)
    pos_s, neg_s = (ss > 0) & (ss < 0.5), (ss < 0) & (ss > -0.5)
    e_opp = spectrum[(pos_t & neg_s) | (neg_t & pos_s)].sum()
    e_same = spectrum[(pos_t & pos_s) | (neg_t & neg_s)].sum()
    total = e_opp + e_same
    if total == 0:
        return 0.5
    return float(e_opp / total)


@dataclass
class KernelBank:
    """A bank of STRF kernels with a lazily rebuilt kernel cache."""

    params: list[StrfParams]
    fir: HilbertFir = field(default_factory=design_hilbert_fir)
    _kernels: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.params)

    @property
    def shape(self) -> tuple[int, int]:
        return self.params[0].shape

    def scalar_array(self) -> np.ndarray:
        """The learnable scalars as an (n, 4) array.

        Column order matches :func:`strf_jacobian`: spectral_mod,
        temporal_mod, spectral_phase, temporal_phase.
        """
        return np.array(
            [
                [p.spectral_mod, p.temporal_mod, p.spectral_phase, p.temporal_phase]
                for p in self.params
            ]
        )

    def set_scalars(self, values: np.ndarray):
        """Overwrite the learnable scalars and invalidate the cache."""
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.params), 4):
            raise ValueError(f"expected scalars of shape {(len(self.params), 4)}, got {values.shape}")
        self.params = [
            replace(
                p,
                spectral_mod=float(row[0]),
                temporal_mod=float(row[1]),
                spectral_phase=float(row[2]),
                temporal_phase=float(row[3]),
            )
            for p, row in zip(self.params, values)
        ]
        self._kernels = None

    def kernels(self) -> np.ndarray:
        """Assembled kernels, shape (n, T, F); rebuilt after any update."""
        if self._kernels is None:
            self._kernels = np.stack([assemble_strf(p, self.fir) for p in self.params])
        return self._kernels

    def jacobians(self) -> np.ndarray:
        """Parameter jacobians, shape (n, 4, T, F)."""
        return np.stack([strf_jacobian(p, self.fir) for p in self.params])


def init_bank(
    count: int,
    time_support_s: float,
    channel_support: int,
    frame_rate: float,
    channels_per_octave: float,
    rng: np.random.Generator,
    fir: HilbertFir | None = None,
) -> KernelBank:
    """Draw a bank of kernels from the standard initialization ranges.

    Temporal modulation ~ U[0, 10) Hz, spectral modulation ~ U[0, 0.2)
    cycles per channel, phases ~ U[0, 2 pi). Drift directions alternate so
    the bank is half upward, half downward.
    """
    if count < 1:
        raise ValueError("bank size must be >= 1")
    params = []
    for i in range(count):
        params.append(
            StrfParams(
                spectral_mod=float(rng.uniform(*SPECTRAL_MOD_RANGE_CPC)),
                temporal_mod=float(rng.uniform(*TEMPORAL_MOD_RANGE_HZ)),
                spectral_phase=float(rng.uniform(0.0, 2 * np.pi)),
                temporal_phase=float(rng.uniform(0.0, 2 * np.pi)),
                direction=UPWARD if i % 2 == 0 else DOWNWARD,
                time_support_s=time_support_s,
                channel_support=channel_support,
                frame_rate=frame_rate,
                channels_per_octave=channels_per_octave,
            )
        )
    return KernelBank(params=params, fir=fir if fir is not None else design_hilbert_fir())
