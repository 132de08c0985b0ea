"""Forward inference of TF-GridNet.

Tensors are ``(D, T, F)`` float64 arrays (one utterance, no batch axis).
Complex inputs are turned into real features by stacking real parts of all
channels followed by imaginary parts: ``[Re(x_0..x_{K-1}), Im(x_0..x_{K-1})]``.
The 2C output channels are read back the same way, giving C complex
spectrograms.
"""
import numpy as np

from . import layers
from .config import padded_length

__all__ = ['ModelError', 'stack_ri', 'unstack_ri', 'embed_inputs',
           'intra_frame_module', 'subband_module', 'attention_module',
           'gridnet_block', 'forward']


class ModelError(ValueError):
    pass


def stack_ri(x):
    x = np.asarray(x)
    return np.concatenate([x.real, x.imag], axis=0).astype(np.float64)


def unstack_ri(x):
    half = x.shape[0] // 2
    return x[:half] + 1j * x[half:]


def embed_inputs(features, cfg, weights):
    """Conv2D(3x3) + gLN per input feature, summed to (D, T, F).

    ``features`` is a sequence of complex arrays: the mixture (P, T, F) and,
    in the three-input mode, the first-stage estimates and the filter
    outputs (C, T, F) each.
    """
    expected = cfg.input_channels
    if len(features) != len(expected):
        raise ModelError(
            f'{cfg.inputs} expects {len(expected)} input features, '
            f'got {len(features)}')
    out = None
    for k, (feat, c_in) in enumerate(zip(features, expected)):
        x = stack_ri(feat)
        if x.shape[0] != c_in:
            raise ModelError(
                f'Input feature {k} has {x.shape[0]} real channels, '
                f'expected {c_in}')
        if x.shape[2] != cfg.F:
            raise ModelError(f'Input feature {k} has {x.shape[2]} bins, '
                             f'config says F={cfg.F}')
        e = layers.conv2d_3x3(x, weights[f'embed{k}.conv.weight'],
                              weights[f'embed{k}.conv.bias'])
        e = layers.global_layer_norm(e, weights[f'embed{k}.norm.gain'],
                                     weights[f'embed{k}.norm.bias'])
        out = e if out is None else out + e
    return out


def _sequence_module(seqs, cfg, weights, prefix):
    """Shared body of the intra-frame and sub-band modules.

    seqs: (n, D, length) -- n independent sequences of D-dim embeddings.
    Returns the module output before the residual, same shape.
    """
    n, D, length = seqs.shape
    padded = padded_length(length, cfg.I, cfg.J)
    pad = ((0, 0), (0, 0), (0, padded - length))
    gain = weights[f'{prefix}.norm.gain']
    bias = weights[f'{prefix}.norm.bias']
    if cfg.unfold_order == 'LNUnfold':
        x = layers.channel_layer_norm(seqs, gain, bias, axis=1)
        x = layers.unfold(np.pad(x, pad), cfg.I, cfg.J)
    else:
        x = layers.unfold(np.pad(seqs, pad), cfg.I, cfg.J)
        x = layers.channel_layer_norm(x, gain, bias, axis=1)
    h = layers.blstm(x.transpose(0, 2, 1), weights, f'{prefix}.blstm')
    y = layers.deconv1d(h.transpose(0, 2, 1),
                        weights[f'{prefix}.deconv.weight'],
                        weights[f'{prefix}.deconv.bias'], cfg.J)
    return y[:, :, :length]


def intra_frame_module(R, cfg, weights, block=0):
    """Full-band BLSTM over frequency within each frame, plus residual."""
    seqs = R.transpose(1, 0, 2)                      # T, D, F
    y = _sequence_module(seqs, cfg, weights, f'block{block}.intra')
    return y.transpose(1, 0, 2) + R


def subband_module(U, cfg, weights, block=0):
    """BLSTM over time within each frequency (shared weights), plus residual."""
    seqs = U.transpose(2, 0, 1)                      # F, D, T
    y = _sequence_module(seqs, cfg, weights, f'block{block}.sub')
    return y.transpose(1, 2, 0) + U


def _pointwise(x, weights, prefix):
    y = layers.conv1x1(x, weights[f'{prefix}.weight'],
                       weights[f'{prefix}.bias'])
    y = layers.prelu(y, weights[f'{prefix}.prelu'])
    return layers.cf_layer_norm(y, weights[f'{prefix}.norm.gain'],
                                weights[f'{prefix}.norm.bias'])


def attention_module(Z, cfg, weights, block=0, return_attention=False):
    """Cross-frame multi-head self-attention with a residual connection.

    With ``return_attention`` the list of per-head (T, T) attention
    matrices is returned as well; that list is the only attention memory,
    L*T^2 values per block.
    """
    if cfg.D % cfg.L:
        raise ModelError(f'D={cfg.D} is not divisible by L={cfg.L}')
    _, T, F = Z.shape
    heads = []
    maps = []
    for l in range(cfg.L):
        p = f'block{block}.attn.head{l}'
        q = _pointwise(Z, weights, f'{p}.query')
        k = _pointwise(Z, weights, f'{p}.key')
        v = _pointwise(Z, weights, f'{p}.value')
        dv = v.shape[0]
        Q = q.transpose(1, 0, 2).reshape(T, -1)
        K = k.transpose(1, 0, 2).reshape(T, -1)
        V = v.transpose(1, 0, 2).reshape(T, -1)
        attn = layers.softmax_rows(Q @ K.T / np.sqrt(F * cfg.E))
        A = (attn @ V).reshape(T, dv, F).transpose(1, 0, 2)
        heads.append(A)
        maps.append(attn)
    out = _pointwise(np.concatenate(heads, axis=0), weights,
                     f'block{block}.attn.proj') + Z
    if return_attention:
        return out, maps
    return out


def gridnet_block(R, cfg, weights, block):
    stages = [('intra', intra_frame_module), ('sub', subband_module)]
    if cfg.attention:
        stages.append(('attn', attention_module))
    x = R
    for name, fn in stages:
        try:
            x = fn(x, cfg, weights, block)
        except (KeyError, ValueError) as e:
            raise ModelError(f'block {block} ({name}): {e}') from e
    return x


def forward(features, cfg, weights):
    """Run TF-GridNet; returns C complex spectrograms of shape (C, T, F)."""
    x = embed_inputs(features, cfg, weights)
    for b in range(cfg.B):
        x = gridnet_block(x, cfg, weights, b)
    out = layers.deconv2d_3x3(x, weights['head.weight'], weights['head.bias'])
    return unstack_ri(out)
