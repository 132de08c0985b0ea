"""Numpy building blocks for TF-GridNet inference (float64, no batching
beyond what each function documents)."""
import numpy as np

EPS = 1e-5


def conv2d_3x3(x, weight, bias):
    """3x3 Conv2D, stride 1, zero padding 1. x: (C_in, T, F)."""
    _, T, F = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((weight.shape[0], T, F))
    for kt in range(3):
        for kf in range(3):
            out += np.einsum('oi,itf->otf', weight[:, :, kt, kf],
                             xp[:, kt:kt + T, kf:kf + F])
    return out + bias[:, None, None]


def deconv2d_3x3(x, weight, bias):
    """3x3 transposed Conv2D, stride 1, padding 1 (keeps T x F).

    weight has the transposed-convolution layout (C_in, C_out, 3, 3).
    """
    _, T, F = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((weight.shape[1], T, F))
    for kt in range(3):
        for kf in range(3):
            out += np.einsum('io,itf->otf', weight[:, :, kt, kf],
                             xp[:, 2 - kt:2 - kt + T, 2 - kf:2 - kf + F])
    return out + bias[:, None, None]


def conv1x1(x, weight, bias):
    return np.einsum('oi,itf->otf', weight, x) + bias[:, None, None]


def global_layer_norm(x, gain, bias):
    """Normalize over all of (C, T, F); per-channel affine."""
    mu = x.mean()
    var = ((x - mu) ** 2).mean()
    y = (x - mu) / np.sqrt(var + EPS)
    return y * gain[:, None, None] + bias[:, None, None]


def channel_layer_norm(x, gain, bias, axis):
    """Normalize along ``axis`` at every other position; affine on ``axis``."""
    mu = x.mean(axis=axis, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=axis, keepdims=True)
    shape = [1] * x.ndim
    shape[axis] = -1
    return ((x - mu) / np.sqrt(var + EPS) * gain.reshape(shape)
            + bias.reshape(shape))


def cf_layer_norm(x, gain, bias):
    """Normalize over (channel, frequency) per frame. x: (C, T, F)."""
    mu = x.mean(axis=(0, 2), keepdims=True)
    var = ((x - mu) ** 2).mean(axis=(0, 2), keepdims=True)
    return (x - mu) / np.sqrt(var + EPS) * gain[:, None, :] + bias[:, None, :]


def prelu(x, slope):
    shape = (-1,) + (1,) * (x.ndim - 1)
    return np.where(x >= 0, x, x * slope.reshape(shape))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm(x, w_ih, w_hh, b_ih, b_hh, reverse=False):
    """Single-layer LSTM over axis 1 of x (batch, length, in).

    Gate order (i, f, g, o) along the 4H axis; zero initial states.
    """
    n, length, _ = x.shape
    H = w_hh.shape[1]
    h = np.zeros((n, H))
    c = np.zeros((n, H))
    out = np.zeros((n, length, H))
    pre = x @ w_ih.T + (b_ih + b_hh)
    steps = range(length - 1, -1, -1) if reverse else range(length)
    for t in steps:
        z = pre[:, t] + h @ w_hh.T
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[:, t] = h
    return out


def blstm(x, weights, prefix):
    fwd = lstm(x, *(weights[f'{prefix}.fwd.{k}']
                    for k in ('w_ih', 'w_hh', 'b_ih', 'b_hh')))
    bwd = lstm(x, *(weights[f'{prefix}.bwd.{k}']
                    for k in ('w_ih', 'w_hh', 'b_ih', 'b_hh')), reverse=True)
    return np.concatenate([fwd, bwd], axis=-1)


def unfold(x, kernel, stride):
    """(n, C, L_pad) -> (n, C*kernel, L_seq); feature index c*kernel + k."""
    n, C, length = x.shape
    steps = (length - kernel) // stride + 1
    idx = np.arange(steps)[:, None] * stride + np.arange(kernel)
    patches = x[:, :, idx]                     # n, C, steps, kernel
    return patches.transpose(0, 1, 3, 2).reshape(n, C * kernel, steps)


def deconv1d(h, weight, bias, stride):
    """Transposed Conv1D as a linear layer followed by overlap-add.

    h: (n, C_in, L_seq); weight: (C_in, C_out, I). Output length
    (L_seq - 1) * stride + I.
    """
    n, _, steps = h.shape
    kernel = weight.shape[2]
    frames = np.einsum('nil,iok->nolk', h, weight)
    out = np.zeros((n, weight.shape[1], (steps - 1) * stride + kernel))
    for l in range(steps):
        out[:, :, l * stride:l * stride + kernel] += frames[:, :, l]
    return out + bias[None, :, None]


def softmax_rows(scores):
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
