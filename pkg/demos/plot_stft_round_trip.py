"""
STFT analysis and synthesis
===========================

A tour of the square-root Hann STFT used everywhere else in the package.
"""

# %%
# Two presets cover the usual rates: 32 ms windows with 8 ms hops give
# 129 bins at 8 kHz and 257 at 16 kHz.
import numpy as np

from gridsep.stft import StftConfig, istft, num_frames, stft

cfg8 = StftConfig.from_ms(8000)
cfg16 = StftConfig.from_ms(16000)
print(cfg8.win_len, cfg8.hop_len, cfg8.n_freqs)
print(cfg16.win_len, cfg16.hop_len, cfg16.n_freqs)

# %%
# Analyse four seconds of noise. The frame count follows from the left
# padding, so nothing is lost at either edge.
rng = np.random.default_rng(0)
x = rng.standard_normal(4 * 8000)
X = stft(x, cfg8)
print(X.shape, num_frames(x.size, cfg8))

# %%
# Synthesis divides by the summed window envelope, which makes the round
# trip exact up to floating point.
y = istft(X, cfg8, x.size)
print('max error', np.abs(y - x).max())

# %%
# Leading axes are batch axes: a six-microphone recording is one call.
multi = rng.standard_normal((6, 8000))
M = stft(multi, cfg8)
print(M.shape)
print(np.allclose(M[3], stft(multi[3], cfg8)))

# %%
# A single impulse lands in the frames whose windows cover it.
imp = np.zeros(800)
imp[400] = 1.0
energy = np.sum(np.abs(stft(imp, cfg8)) ** 2, axis=-1)
print(np.nonzero(energy > 1e-12)[0])
