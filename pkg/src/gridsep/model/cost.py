"""Parameter and multiply-accumulate accounting for TF-GridNet.

MAC conventions (normalizations, activations and softmax are not counted):

* Conv2D/Deconv2D 3x3: ``T*F*C_in*C_out*9``
* BLSTM, per direction and step: ``4H*(n_in + H)``
* Deconv1D, implemented as a linear layer followed by overlap-add:
  ``L_seq * 2H * D * I`` per sequence
* attention: point-wise convs ``T*F*C_in*C_out``, scores ``L*T^2*F*E``,
  weighted sum ``L*T^2*F*(D/L)``
"""
from .config import unfolded_length

__all__ = ['count_params', 'mac_breakdown', 'estimate_macs',
           'gmacs_per_second']


def _grid_params(cfg):
    norm = cfg.D if cfg.unfold_order == 'LNUnfold' else cfg.I * cfg.D
    lstm = 2 * (4 * cfg.H * cfg.I * cfg.D + 4 * cfg.H * cfg.H + 8 * cfg.H)
    deconv = 2 * cfg.H * cfg.D * cfg.I + cfg.D
    return 2 * norm + lstm + deconv


def _pointwise_params(c_out, c_in, n_freq):
    # conv weight + bias, PReLU slopes, cfLN gain and bias
    return c_out * c_in + 2 * c_out + 2 * c_out * n_freq


def count_params(cfg):
    """Exact number of learnable scalars for ``cfg``."""
    total = sum(9 * c_in * cfg.D + 3 * cfg.D for c_in in cfg.input_channels)
    block = 2 * _grid_params(cfg)
    if cfg.attention:
        dv = cfg.D // cfg.L
        per_head = (2 * _pointwise_params(cfg.E, cfg.D, cfg.F)
                    + _pointwise_params(dv, cfg.D, cfg.F))
        block += cfg.L * per_head + _pointwise_params(cfg.D, cfg.D, cfg.F)
    total += cfg.B * block
    total += 9 * cfg.D * 2 * cfg.C + 2 * cfg.C
    return total


def mac_breakdown(cfg, T):
    """MACs per component for an utterance of ``T`` frames."""
    F = cfg.F
    n_in = cfg.I * cfg.D
    lstm_step = 2 * 4 * cfg.H * (n_in + cfg.H)
    deconv_step = 2 * cfg.H * cfg.D * cfg.I
    lf = unfolded_length(F, cfg.I, cfg.J)
    lt = unfolded_length(T, cfg.I, cfg.J)
    out = {
        'embed': sum(T * F * c * cfg.D * 9 for c in cfg.input_channels),
        'intra_blstm': cfg.B * T * lf * lstm_step,
        'intra_deconv': cfg.B * T * lf * deconv_step,
        'sub_blstm': cfg.B * F * lt * lstm_step,
        'sub_deconv': cfg.B * F * lt * deconv_step,
        'attn_pointwise': 0,
        'attn_scores': 0,
        'attn_values': 0,
        'head': T * F * cfg.D * 2 * cfg.C * 9,
    }
    if cfg.attention:
        dv = cfg.D // cfg.L
        pw = T * F * cfg.D * (cfg.L * (2 * cfg.E + dv) + cfg.D)
        out['attn_pointwise'] = cfg.B * pw
        out['attn_scores'] = cfg.B * cfg.L * T * T * F * cfg.E
        out['attn_values'] = cfg.B * cfg.L * T * T * F * dv
    return out


def estimate_macs(cfg, T):
    return sum(mac_breakdown(cfg, T).values())


def gmacs_per_second(cfg, stft_cfg, seconds=4.0):
    """GMACs per second of audio, measured on a ``seconds``-long segment."""
    from ..stft import num_frames
    n = int(round(seconds * stft_cfg.sample_rate))
    T = num_frames(n, stft_cfg)
    return estimate_macs(cfg, T) / seconds / 1e9
