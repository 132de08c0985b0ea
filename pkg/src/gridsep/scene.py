"""Synthetic multi-channel scenes: dry sources, direct path, reverberant
tail and noise, summed into a mixture.

The room impulse response of source c at microphone p is a scaled delta at
``direct_delay[c, p]`` (the direct path) followed by a seeded, exponentially
decaying Gaussian tail that starts one sample later (early reflections and
late reverberation lumped together).

All randomness comes from ``numpy.random.default_rng(spec.seed)``, drawn in
this order: dry sources, delays (if not given), gains (if not given), tail
filters (source-major), noise.
"""
from dataclasses import asdict, dataclass, field
import json
import os

import numpy as np
from scipy.signal import fftconvolve

from .stft import StftConfig, stft
from .wavio import write_wav

__all__ = ['SceneSpec', 'Scene', 'simulate', 'band_limited_noise',
           'normalize_variance', 'oracle_estimator', 'corrupt_targets',
           'add_noise_at_snr']


@dataclass(frozen=True)
class SceneSpec:
    """Scene parameters. Array-valued fields accept a scalar or a (C, P)
    nested list; delays and lengths are in samples."""
    n_sources: int = 2
    n_mics: int = 1
    sample_rate: int = 8000
    duration: float = 4.0
    direct_delay: object = None
    direct_gain: object = None
    max_delay: int = 16
    tail_length: object = 0
    tail_decay: object = 400.0
    tail_level_db: float = 0.0
    noise_kind: str = 'none'
    snr_db: object = None
    seed: int = 0

    def __post_init__(self):
        if self.n_sources < 1 or self.n_mics < 1:
            raise ValueError('Need at least one source and one microphone')
        if self.duration <= 0:
            raise ValueError('duration must be positive')
        if self.noise_kind not in ('white', 'none'):
            raise ValueError("noise_kind must be 'white' or 'none'")
        if self.noise_kind == 'white' and self.snr_db is None:
            raise ValueError('White noise needs snr_db')
        if self.noise_kind == 'none' and self.snr_db is not None:
            raise ValueError('snr_db given without noise')

    @property
    def n_samples(self):
        return int(round(self.duration * self.sample_rate))

    def _grid(self, value, dtype):
        arr = np.broadcast_to(np.asarray(value, dtype=dtype),
                              (self.n_sources, self.n_mics))
        return np.array(arr)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f'Unknown scene config keys: {sorted(extra)}')
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class Scene:
    """Scene components; every array shares the last (sample) axis."""
    dry: np.ndarray            # (C, N)
    direct: np.ndarray         # (C, P, N)
    reverb_tail: np.ndarray    # (C, P, N)
    noise: np.ndarray          # (P, N)
    mixture: np.ndarray        # (P, N)
    sample_rate: int
    direct_delay: np.ndarray = field(default=None)
    direct_gain: np.ndarray = field(default=None)

    def export(self, folder, fmt='float32'):
        """Write every component as a WAV file under ``folder``."""
        os.makedirs(folder, exist_ok=True)
        sr = self.sample_rate
        write_wav(os.path.join(folder, 'mixture.wav'), self.mixture, sr, fmt)
        write_wav(os.path.join(folder, 'noise.wav'), self.noise, sr, fmt)
        for c in range(self.dry.shape[0]):
            write_wav(os.path.join(folder, f'dry_c{c}.wav'),
                      self.dry[c], sr, fmt)
            write_wav(os.path.join(folder, f'direct_c{c}.wav'),
                      self.direct[c], sr, fmt)
            write_wav(os.path.join(folder, f'tail_c{c}.wav'),
                      self.reverb_tail[c], sr, fmt)


def band_limited_noise(rng, n_samples, sample_rate, lo=100.0, hi_frac=0.4):
    """Unit-variance Gaussian noise with a flat spectrum in [lo, hi_frac*fs]."""
    x = rng.standard_normal(n_samples)
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n_samples, 1.0 / sample_rate)
    spec[(freqs < lo) | (freqs > hi_frac * sample_rate)] = 0
    y = np.fft.irfft(spec, n=n_samples)
    return y / y.std()


def add_noise_at_snr(signal_ref, noise, snr_db, ref_noise=None):
    """Scale ``noise`` so ``|signal_ref|^2 / |ref_noise|^2`` is ``snr_db``.

    ``ref_noise`` defaults to ``noise``; the same factor is applied to the
    whole of ``noise``.
    """
    ref_noise = noise if ref_noise is None else ref_noise
    gain = np.sqrt(np.sum(signal_ref ** 2)
                   / (np.sum(ref_noise ** 2) * 10 ** (snr_db / 10)))
    return noise * gain


def simulate(spec, dry=None):
    """Generate a :class:`Scene` from ``spec``.

    ``dry`` optionally supplies the (C, N) dry sources (e.g. read from WAV);
    otherwise band-limited noise is drawn.
    """
    rng = np.random.default_rng(spec.seed)
    C, P, N = spec.n_sources, spec.n_mics, spec.n_samples
    if dry is None:
        dry = np.stack([band_limited_noise(rng, N, spec.sample_rate)
                        for _ in range(C)])
    else:
        dry = np.asarray(dry, dtype=np.float64)
        if dry.shape != (C, N):
            raise ValueError(f'dry sources must have shape {(C, N)}')

    if spec.direct_delay is None:
        delays = rng.integers(0, spec.max_delay + 1, size=(C, P))
    else:
        delays = spec._grid(spec.direct_delay, np.int64)
    if spec.direct_gain is None:
        gains = rng.uniform(0.5, 1.0, size=(C, P))
    else:
        gains = spec._grid(spec.direct_gain, np.float64)
    if np.any(delays < 0) or not np.all(np.isfinite(gains)):
        raise ValueError('Delays must be >= 0 and gains finite')
    tail_len = spec._grid(spec.tail_length, np.int64)
    tail_decay = spec._grid(spec.tail_decay, np.float64)
    if np.any(delays + tail_len + 1 >= N):
        raise ValueError('Duration too short for the requested delays/tails')

    direct = np.zeros((C, P, N))
    tail = np.zeros((C, P, N))
    for c in range(C):
        for p in range(P):
            d = delays[c, p]
            direct[c, p, d:] = gains[c, p] * dry[c, :N - d]
            L = tail_len[c, p]
            if L == 0:
                continue
            k = np.arange(1, L + 1)
            h = rng.standard_normal(L) * np.exp(-k / tail_decay[c, p])
            h *= gains[c, p] * np.sqrt(10 ** (spec.tail_level_db / 10)
                                       / np.sum(h ** 2))
            start = d + 1
            tail[c, p, start:] = fftconvolve(dry[c], h)[:N - start]

    noise = np.zeros((P, N))
    if spec.noise_kind == 'white':
        raw = rng.standard_normal((P, N))
        noise = add_noise_at_snr(direct[:, 0].sum(0), raw, spec.snr_db,
                                 ref_noise=raw[0])
    mixture = (direct + tail).sum(0) + noise
    return Scene(dry, direct, tail, noise, mixture, spec.sample_rate,
                 delays, gains)


def normalize_variance(mixture, targets=()):
    """Scale the mixture to unit sample variance and targets by the same
    factor. Returns ``(mixture, targets, factor)``."""
    mixture = np.asarray(mixture, dtype=np.float64)
    var = mixture.var()
    if var == 0:
        raise ValueError('All-zero (or constant) mixture')
    factor = 1.0 / np.sqrt(var)
    return mixture * factor, [np.asarray(t) * factor for t in targets], factor


def oracle_estimator(scene, corruption_db, seed=0, stft_cfg=None, q=0,
                     scale=1.0):
    """Stand-in for a first-stage network: noisy copies of the direct-path
    targets at mic ``q``, returned as (C, T, F) spectrograms.

    White Gaussian noise is added in the time domain at ``corruption_db``
    SNR per source (``inf`` means no corruption), then the STFT is taken.
    """
    cfg = stft_cfg or StftConfig.from_ms(scene.sample_rate)
    return corrupt_targets(scene.direct[:, q] * scale, corruption_db, seed,
                           cfg)


def corrupt_targets(targets, corruption_db, seed, stft_cfg):
    """STFT of ``targets`` (C, N) plus seeded white noise at
    ``corruption_db`` SNR per source."""
    if np.isnan(corruption_db):
        raise ValueError('corruption_db must not be NaN')
    rng = np.random.default_rng(seed)
    noisy = np.array(targets, dtype=np.float64)
    if np.isfinite(corruption_db):
        for c in range(noisy.shape[0]):
            n = rng.standard_normal(noisy.shape[1])
            noisy[c] += add_noise_at_snr(targets[c], n, corruption_db)
    return stft(noisy, stft_cfg)
