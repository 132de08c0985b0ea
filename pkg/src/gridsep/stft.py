"""STFT analysis and overlap-add synthesis with a square-root Hann window.

Array conventions used across the package:

* waveforms are real arrays of shape ``(..., N)`` (channels first);
* spectrograms are complex arrays of shape ``(..., T, F)`` with
  ``F = dft_size // 2 + 1``.

Framing is centered: the signal is left-padded with ``win_len - hop_len``
zeros, and frame ``t`` covers padded samples ``[t*hop, t*hop + win_len)``.
Enough frames are taken that every input sample is covered by the full set
of overlapping windows, giving ``T = 1 + (N + win_len - hop_len - 1) // hop``.
"""
from dataclasses import dataclass

import numpy as np

__all__ = ['StftConfig', 'stft', 'istft', 'num_frames', 'sqrt_hann']


def sqrt_hann(win_len):
    """Periodic square-root Hann window."""
    n = np.arange(win_len)
    return np.sqrt(0.5 - 0.5 * np.cos(2 * np.pi * n / win_len))


@dataclass(frozen=True)
class StftConfig:
    sample_rate: int
    win_len: int
    hop_len: int
    dft_size: int
    window: str = 'sqrt_hann'

    def __post_init__(self):
        if self.window != 'sqrt_hann':
            raise ValueError(f'Unsupported window {self.window!r}')
        if not 0 < self.hop_len <= self.win_len:
            raise ValueError('Need 0 < hop_len <= win_len')
        if self.win_len > self.dft_size:
            raise ValueError('Window longer than dft_size')
        if self.dft_size % 2:
            raise ValueError('dft_size must be even')

    @classmethod
    def from_ms(cls, sample_rate, win_ms=32, hop_ms=8):
        """Config with the DFT size equal to the window length.

        >>> StftConfig.from_ms(8000).n_freqs
        129
        >>> StftConfig.from_ms(16000).n_freqs
        257
        """
        win = int(round(sample_rate * win_ms / 1000))
        hop = int(round(sample_rate * hop_ms / 1000))
        return cls(sample_rate, win, hop, win)

    @property
    def n_freqs(self):
        return self.dft_size // 2 + 1

    @property
    def window_array(self):
        return sqrt_hann(self.win_len)


def num_frames(n_samples, cfg):
    return 1 + (n_samples + cfg.win_len - cfg.hop_len - 1) // cfg.hop_len


def stft(x, cfg):
    """One-sided STFT of ``x`` with shape ``(..., N)`` -> ``(..., T, F)``."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n == 0:
        raise ValueError('Empty signal')
    T = num_frames(n, cfg)
    left = cfg.win_len - cfg.hop_len
    total = (T - 1) * cfg.hop_len + cfg.win_len
    pad = [(0, 0)] * (x.ndim - 1) + [(left, total - left - n)]
    xp = np.pad(x, pad)
    idx = np.arange(T)[:, None] * cfg.hop_len + np.arange(cfg.win_len)
    frames = xp[..., idx] * cfg.window_array
    return np.fft.rfft(frames, n=cfg.dft_size, axis=-1)


def istft(X, cfg, out_len):
    """Overlap-add inverse of :func:`stft`, returning ``(..., out_len)``.

    The synthesis window equals the analysis window and the sum is divided
    by the accumulated squared-window envelope, so any hop with a nonzero
    envelope reconstructs exactly. Imaginary parts of the DC and Nyquist
    bins are discarded.
    """
    X = np.array(X, dtype=np.complex128)
    if X.shape[-1] != cfg.n_freqs:
        raise ValueError(
            f'Spectrogram has {X.shape[-1]} bins, config expects '
            f'{cfg.n_freqs}')
    X[..., 0] = X[..., 0].real
    X[..., -1] = X[..., -1].real
    T = X.shape[-2]
    win = cfg.window_array
    frames = np.fft.irfft(X, n=cfg.dft_size, axis=-1)[..., :cfg.win_len]
    frames = frames * win

    total = (T - 1) * cfg.hop_len + cfg.win_len
    y = np.zeros(X.shape[:-2] + (total,))
    env = np.zeros(total)
    for t in range(T):
        sl = slice(t * cfg.hop_len, t * cfg.hop_len + cfg.win_len)
        y[..., sl] += frames[..., t, :]
        env[sl] += win ** 2
    ok = env > 1e-10
    y[..., ok] /= env[ok]
    y[..., ~ok] = 0.0

    left = cfg.win_len - cfg.hop_len
    y = y[..., left:left + out_len]
    short = out_len - y.shape[-1]
    if short > 0:
        y = np.pad(y, [(0, 0)] * (y.ndim - 1) + [(0, short)])
    return y
