"""
TF-GridNet in numpy
===================

Count parameters for the published configurations, run a tiny model,
and store its weights in the manifest format.
"""

# %%
# Parameter counts and multiply-accumulate estimates come straight from
# the config, no weights needed.
import tempfile
from pathlib import Path

import numpy as np

from gridsep.model import (ModelConfig, WeightStore, count_params, forward,
                           gmacs_per_second, init_weights,
                           zero_final_projection)
from gridsep.model.gridnet import gridnet_block
from gridsep.stft import StftConfig, stft

full = ModelConfig(D=64, B=6, I=4, J=1, H=256, L=4, E=4)
print(f'{count_params(full):,} parameters')
print(f'{gmacs_per_second(full, StftConfig.from_ms(8000)):.1f} GMAC/s')

for L, D, I, J, H in [(4, 48, 4, 1, 192), (4, 96, 2, 2, 192),
                      (4, 32, 4, 4, 128), (4, 24, 4, 4, 96)]:
    cfg = ModelConfig(D=D, I=I, J=J, H=H, L=L)
    print(f'{L}/{D}/{I}/{J}/{H}: {count_params(cfg) / 1e6:.2f} M')

# %%
# A small random model is enough to exercise the whole forward pass on
# real audio frames.
tiny = ModelConfig(D=16, B=2, I=4, J=2, H=16, L=2, E=2, C=2, P=2)
W = init_weights(tiny, seed=0)
rng = np.random.default_rng(0)
Y = stft(rng.standard_normal((2, 4000)), StftConfig.from_ms(8000))
S = forward([Y], tiny, W)
print(Y.shape, '->', S.shape)

# %%
# Each block is residual. Zero the last projection of all three modules
# and the block passes its input through untouched.
R = rng.standard_normal((16, 10, 129))
Wz = W
for module in ('intra', 'sub', 'attn'):
    Wz = zero_final_projection(Wz, 0, module)
print(np.array_equal(gridnet_block(R, tiny, Wz, 0), R))

# %%
# Weights are saved as a text manifest plus a little-endian float32 blob.
with tempfile.TemporaryDirectory() as d:
    path = Path(d) / 'tiny.txt'
    W.save(path)
    print(path.read_text().splitlines()[:4])
    W2 = WeightStore.load(path, tiny)
    print(np.array_equal(forward([Y], tiny, W2), S))
