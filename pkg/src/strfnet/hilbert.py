"""FIR Hilbert transformer designed by frequency sampling.

The filter is the exact inverse DFT of the ideal Hilbert response sampled
at M points, rotated to a causal impulse response with group delay M/2.
At the M design frequencies the magnitude response is exactly 1 (0 at DC
and Nyquist); between design bins the response is the Dirichlet
interpolation of those samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HilbertFir:
    """Causal type-III FIR Hilbert transformer.

    Attributes
    ----------
    taps : np.ndarray
        Impulse response of length ``design_dft_size``, antisymmetric about
        the center tap ``design_dft_size // 2``.
    design_dft_size : int
        The M of the frequency-sampling design (group delay M/2).
    """

    taps: np.ndarray
    design_dft_size: int

    @property
    def group_delay(self) -> int:
        return self.design_dft_size // 2


def design_hilbert_fir(m: int = 512) -> HilbertFir:
    """Design an M-tap FIR Hilbert transformer by frequency sampling.

    The ideal response is -j on positive frequencies, +j on negative ones
    and 0 at DC and Nyquist. Its inverse M-point DFT is real and circularly
    antisymmetric; rotating it by M/2 yields a causal linear-phase filter.

    Parameters
    ----------
    m : int
        Number of DFT points / taps. Must be even and >= 8.

    Raises
    ------
    ValueError
        If ``m`` is odd or too small.
    """
    if m % 2 != 0:
        raise ValueError(f"Hilbert FIR design requires an even M, got {m}")
    if m < 8:
        raise ValueError(f"Hilbert FIR design requires M >= 8, got {m}")
    response = np.zeros(m, dtype=complex)
    response[1 : m // 2] = -1j
    response[m // 2 + 1 :] = 1j
    zero_phase = np.fft.ifft(response)
    taps = np.roll(zero_phase, m // 2)
    if np.max(np.abs(taps.imag)) > 1e-12:
        raise AssertionError("frequency-sampled Hilbert taps are not real")
    return HilbertFir(taps=np.ascontiguousarray(taps.real), design_dft_size=m)


def hilbert_imag(x: np.ndarray, fir: HilbertFir) -> np.ndarray:
    """Hilbert transform of ``x`` by zero-padded convolution with ``fir``.

    The full linear convolution is cropped by the filter's group delay so
    the result aligns sample-for-sample with the input.
    """
    x = np.asarray(x, dtype=float)
    full = np.convolve(x, fir.taps, mode="full")
    d = fir.group_delay
    return full[d : d + x.shape[0]]


def analytic_sequence(x: np.ndarray, fir: HilbertFir) -> np.ndarray:
    """Return ``x + j * hilbert(x)`` with delay compensation.

    The real part equals the input exactly by construction; the imaginary
    part is the delay-compensated FIR Hilbert transform.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 1:
        raise ValueError("analytic_sequence requires a nonempty input")
    return x + 1j * hilbert_imag(x, fir)


def circular_hilbert_transfer(fir: HilbertFir, n: int) -> np.ndarray:
    """Transfer function of ``fir`` applied circularly on an n-point axis.

    Time-aliases the delay-compensated taps modulo ``n`` and returns the
    n-point DFT. For n not dividing M this samples the filter's DTFT at the
    n native frequencies, i.e. the ideal +/-j response up to the design's
    interpolation ripple.
    """
    if n < 1:
        raise ValueError("transfer length must be positive")
    offsets = (np.arange(fir.design_dft_size) - fir.group_delay) % n
    aliased = np.zeros(n)
    np.add.at(aliased, offsets, fir.taps)
    return np.fft.fft(aliased)


def circular_analytic(x: np.ndarray, transfer: np.ndarray) -> np.ndarray:
    """Analytic extension of ``x`` using a circular Hilbert transfer.

    Unlike :func:`analytic_sequence` this treats ``x`` as one period, so no
    transform energy is lost to truncation; the imaginary part is the
    circular convolution of ``x`` with the aliased FIR.
    """
    x = np.asarray(x, dtype=float)
    imag = np.real(np.fft.ifft(np.fft.fft(x) * transfer))
    return x + 1j * imag
