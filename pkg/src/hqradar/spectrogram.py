"""Short-window two-sided STFT packed as a 2-channel real image."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .radar import ComplexTimeSeries


@dataclass
class Spectrogram:
    """``data[0]`` is Re(STFT), ``data[1]`` is Im(STFT); shape [2, n_bins, n_frames]."""

    data: np.ndarray
    sample_rate: float
    hop: int

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]

    def complex(self) -> np.ndarray:
        return self.data[0] + 1j * self.data[1]


def hamming(window: int) -> np.ndarray:
    """Symmetric Hamming window (``window - 1`` in the denominator)."""
    if window < 2:
        raise ParameterError(f"window must be >= 2, got {window}")
    n = np.arange(window)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (window - 1))


def n_frames(signal_len: int, window: int, hop: int) -> int:
    return 1 + (signal_len - window) // hop


def frame_signal(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Return frames of shape [n_frames, window]; the trailing partial frame is dropped."""
    if window < 2 or window > x.shape[-1]:
        raise ParameterError(f"window must be in [2, {x.shape[-1]}], got {window}")
    if not 0 < hop <= window:
        raise ParameterError(f"hop must be in (0, window], got {hop}")
    m = n_frames(x.shape[-1], window, hop)
    idx = np.arange(window)[None, :] + hop * np.arange(m)[:, None]
    return x[..., idx]


def stft_complex(x: np.ndarray, window: int = 16, hop: int = 8) -> np.ndarray:
    """Center-shifted complex STFT of shape [..., window, n_frames] (unnormalized DFT)."""
    frames = frame_signal(np.asarray(x), window, hop) * hamming(window)
    spec = np.fft.fftshift(np.fft.fft(frames, axis=-1), axes=-1)
    return np.swapaxes(spec, -1, -2)


def stft(ts: ComplexTimeSeries, window: int = 16, hop: int = 8) -> Spectrogram:
    spec = stft_complex(ts.samples, window, hop)
    return Spectrogram(np.stack([spec.real, spec.imag]), ts.sample_rate, hop)


def bin_frequencies(window: int, sample_rate: float) -> np.ndarray:
    """Bin center frequencies in the center-shifted layout, ascending."""
    if window < 2 or window % 2:
        raise ParameterError(f"window must be an even integer >= 2, got {window}")
    return (np.arange(window) - window // 2) * (sample_rate / window)
