"""WAV reading/writing (PCM 16-bit and IEEE float 32-bit, little-endian)."""
import numpy as np
from scipy.io import wavfile

__all__ = ['read_wav', 'write_wav', 'SUPPORTED_RATES']

SUPPORTED_RATES = (8000, 16000)


def read_wav(path):
    """Return ``(data, sample_rate)`` with data shaped (channels, samples).

    PCM16 is scaled to [-1, 1); float32 is returned as is (in float64).
    """
    sr, data = wavfile.read(path)
    if sr not in SUPPORTED_RATES:
        raise ValueError(f'{path}: unsupported sample rate {sr}')
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        data = data.astype(np.float64)
    else:
        raise ValueError(f'{path}: unsupported sample format {data.dtype}')
    if data.ndim == 1:
        data = data[None]
    else:
        data = data.T
    return np.ascontiguousarray(data), sr


def write_wav(path, data, sample_rate, fmt='float32'):
    """Write (channels, samples) or (samples,) data.

    ``fmt`` is ``'float32'`` or ``'pcm16'`` (clipped to the int16 range).
    """
    if sample_rate not in SUPPORTED_RATES:
        raise ValueError(f'Unsupported sample rate {sample_rate}')
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data.T if data.shape[0] > 1 else data[0]
    if fmt == 'float32':
        out = data.astype('<f4')
    elif fmt == 'pcm16':
        out = np.clip(np.round(data * 32768.0), -32768, 32767).astype('<i2')
    else:
        raise ValueError(f'Unknown WAV format {fmt!r}')
    wavfile.write(path, sample_rate, out)
