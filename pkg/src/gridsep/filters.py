"""DNN-supported linear filters computed per frequency from a first-stage
estimate: multi-frame Wiener filter (MFWF), convolutional beamformer
(ConvBF) and WPE.

Shapes: mixture ``Y`` is (P, T, F), estimates ``S1`` are (C, T, F). Filter
banks are returned as (C, F, n) complex arrays where n is the stacked
vector length. Frames outside ``[0, T)`` are zero when stacking, so every
output has the same T as the input. Filters are time-invariant over the
utterance.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import linalg

__all__ = ['FilterSpec', 'stack_frames', 'stack_offsets', 'mfwf',
           'mfwf_objective', 'compute_lambda', 'estimate_mask',
           'compute_mask_and_rtf', 'convbf', 'wpe', 'apply_filter',
           'FILTER_KINDS']

FILTER_KINDS = ('MFWF', 'ConvBF', 'WPE')

# Tap settings tuned per array size (P -> taps).
_MFWF_TAPS = {8: (4, 3), 6: (5, 4), 2: (15, 14), 1: (20, 19)}
_CONVBF_TAPS = {8: 7, 6: 9, 2: 29}


@dataclass(frozen=True)
class FilterSpec:
    kind: str = 'MFWF'
    delta_l: int = 0
    delta_r: int = 0
    delta_d: int = 0
    epsilon: float = 1e-5
    loading: float = linalg.DEFAULT_LOADING

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f'kind must be one of {FILTER_KINDS}')
        if min(self.delta_l, self.delta_r, self.delta_d) < 0:
            raise ValueError('Filter taps must be nonnegative')
        if not self.epsilon > 0:
            raise ValueError('epsilon must be positive')
        if self.loading < 0:
            raise ValueError('loading must be nonnegative')
        if self.kind in ('ConvBF', 'WPE'):
            if self.delta_d < 1:
                raise ValueError(f'{self.kind} needs a prediction delay >= 1')
            if self.delta_r != 0:
                raise ValueError(f'{self.kind} does not filter future frames')
        if self.kind == 'WPE' and self.delta_l < 1:
            raise ValueError('WPE needs at least one tap')

    @classmethod
    def default(cls, kind, n_mics=1):
        """Tap configuration used for a given filter kind and array size."""
        if kind == 'MFWF':
            dl, dr = _MFWF_TAPS[n_mics]
            return cls('MFWF', dl, dr)
        if kind == 'ConvBF':
            return cls('ConvBF', _CONVBF_TAPS[n_mics], 0, 3)
        if kind == 'WPE':
            return cls('WPE', 40, 0, 3)
        raise ValueError(f'Unknown filter kind {kind!r}')

    def filter_length(self, n_mics):
        if self.kind == 'MFWF':
            return (self.delta_l + 1 + self.delta_r) * n_mics
        if self.kind == 'ConvBF':
            return (self.delta_l + 1) * n_mics
        return self.delta_l


def stack_offsets(Y, offsets):
    """Stack ``Y(t + o)`` for o in ``offsets``: (P, T, F) -> (T, F, len*P)."""
    Y = np.asarray(Y, dtype=np.complex128)
    P, T, F = Y.shape
    out = np.zeros((T, F, len(offsets), P), dtype=np.complex128)
    for k, o in enumerate(offsets):
        lo, hi = max(0, -o), min(T, T - o)
        if lo < hi:
            out[lo:hi, :, k, :] = Y[:, lo + o:hi + o, :].transpose(1, 2, 0)
    return out.reshape(T, F, len(offsets) * P)


def stack_frames(Y, delta_l, delta_r, t=None):
    """``[Y(t-dl)^T, ..., Y(t)^T, ..., Y(t+dr)^T]^T`` for every (t, f).

    Returns (T, F, (dl+1+dr)*P), or (F, (dl+1+dr)*P) if ``t`` is given.
    """
    out = stack_offsets(Y, range(-delta_l, delta_r + 1))
    return out if t is None else out[t]


def _convbf_offsets(spec):
    return list(range(-(spec.delta_d + spec.delta_l - 1),
                      -spec.delta_d + 1)) + [0] if spec.delta_l else [0]


def _wpe_offsets(spec):
    return list(range(-(spec.delta_d + spec.delta_l - 1), -spec.delta_d + 1))


def apply_filter(w, stacked):
    """``w^H x`` per (t, f): w (F, n), stacked (T, F, n) -> (T, F)."""
    return np.einsum('fn,tfn->tf', w.conj(), stacked)


def _check_pair(Y, S1):
    Y = np.asarray(Y, dtype=np.complex128)
    S1 = np.asarray(S1, dtype=np.complex128)
    if Y.ndim != 3 or S1.ndim != 3:
        raise ValueError('Expected Y (P, T, F) and S1 (C, T, F)')
    if Y.shape[1:] != S1.shape[1:]:
        raise ValueError(f'T/F mismatch: Y {Y.shape}, S1 {S1.shape}')
    return Y, S1


def _per_freq(fn, F, threads):
    """Evaluate ``fn(freq_slice)`` over contiguous chunks and concatenate
    along axis 0. Chunks are independent, so the result does not depend on
    ``threads``."""
    if threads <= 1 or F < 2:
        return fn(slice(0, F))
    bounds = np.linspace(0, F, min(threads, F) + 1).astype(int)
    chunks = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(fn, chunks))
    return np.concatenate(parts, axis=0)


def _weighted_solve(stacked, targets, weights, loading, threads):
    """weighted_normal_equations for every frequency. stacked (T, F, n)."""
    X = stacked.transpose(1, 0, 2)            # F, T, n
    y = targets.T
    wt = None if weights is None else weights.T

    def run(sl):
        return linalg.weighted_normal_equations(
            X[sl], y[sl], None if wt is None else wt[sl], loading)
    return _per_freq(run, X.shape[0], threads)


def mfwf(Y, S1, spec, threads=1):
    """Multi-frame Wiener filter projecting the mixture onto ``S1``.

    Returns (filters (C, F, n), outputs (C, T, F)).
    """
    Y, S1 = _check_pair(Y, S1)
    stacked = stack_frames(Y, spec.delta_l, spec.delta_r)
    filters = np.stack([
        _weighted_solve(stacked, S1[c], None, spec.loading, threads)
        for c in range(S1.shape[0])])
    return filters, _tf(filters, stacked)


def _tf(filters, stacked):
    return np.stack([apply_filter(w, stacked) for w in filters])


def mfwf_objective(Y, S1, filters, spec):
    """Sum over (t, f) of ``|S1 - w^H Y~|^2`` per source, shape (C,)."""
    Y, S1 = _check_pair(Y, S1)
    stacked = stack_frames(Y, spec.delta_l, spec.delta_r)
    est = _tf(filters, stacked)
    return np.sum(np.abs(S1 - est) ** 2, axis=(1, 2))


def compute_lambda(S1, epsilon=1e-5):
    """Floored power ``max(eps * max|S|^2, |S|^2)`` of one source (T, F).

    Stacks (C, T, F) are handled per source.
    """
    S1 = np.asarray(S1)
    if not epsilon > 0:
        raise ValueError('epsilon must be positive')
    power = np.abs(S1) ** 2
    peak = power.max(axis=(-2, -1), keepdims=True)
    if np.any(peak == 0):
        raise ValueError('All-zero source estimate: lambda is undefined')
    return np.maximum(epsilon * peak, power)


def estimate_mask(Y_q, S1):
    """``|S| / (|S| + |Y_q - S|)``; 0 where both terms vanish."""
    num = np.abs(S1)
    den = num + np.abs(Y_q - S1)
    mask = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=mask, where=den > 0)
    return mask


def compute_mask_and_rtf(Y, S1, q=0):
    """Mask, masked spatial covariance and relative transfer function.

    Args:
        Y: mixture (P, T, F).
        S1: one source estimate (T, F).
        q: reference microphone.

    Returns:
        mask (T, F), phi (F, P, P), rtf (F, P) with ``rtf[:, q] == 1``.
    """
    Y = np.asarray(Y, dtype=np.complex128)
    S1 = np.asarray(S1, dtype=np.complex128)
    P = Y.shape[0]
    if not 0 <= q < P:
        raise ValueError(f'Reference microphone {q} out of range for P={P}')
    mask = estimate_mask(Y[q], S1)
    phi = np.einsum('tf,itf,jtf->fij', mask, Y, Y.conj())
    rtf = np.zeros((Y.shape[2], P), dtype=np.complex128)
    for f in range(Y.shape[2]):
        if not np.any(phi[f]):
            raise ValueError(f'Zero speech covariance at frequency {f}')
        d = linalg.principal_eigvec(phi[f])
        if d[q] == 0:
            raise ValueError(
                f'Steering vector vanishes at reference mic, frequency {f}')
        rtf[f] = d / d[q]
    return mask, phi, rtf


def convbf(Y, S1, spec, q=0, threads=1):
    """Weighted minimum-power distortionless convolutional beamformer.

    Per source and frequency: ``w = R^-1 d / (d^H R^-1 d)`` where R is the
    1/lambda-weighted covariance of the stacked frames
    ``[Y(t-dd-dl+1), ..., Y(t-dd), Y(t)]`` and d holds the RTF in the
    current-frame block and zeros elsewhere.

    Returns (filters (C, F, (dl+1)*P), outputs (C, T, F)).
    """
    Y, S1 = _check_pair(Y, S1)
    if spec.kind != 'ConvBF':
        spec = FilterSpec('ConvBF', spec.delta_l, 0, spec.delta_d,
                          spec.epsilon, spec.loading)
    P, T, F = Y.shape
    stacked = stack_offsets(Y, _convbf_offsets(spec))
    n = stacked.shape[-1]
    X = stacked.transpose(1, 0, 2)             # F, T, n
    filters = np.zeros((S1.shape[0], F, n), dtype=np.complex128)
    for c in range(S1.shape[0]):
        lam = compute_lambda(S1[c], spec.epsilon).T      # F, T
        _, _, rtf = compute_mask_and_rtf(Y, S1[c], q)
        dvec = np.zeros((F, n), dtype=np.complex128)
        dvec[:, n - P:] = rtf

        def run(sl, lam=lam, dvec=dvec):
            Xw = X[sl] / lam[sl][..., None]
            R = linalg.hermitian_part(np.swapaxes(Xw, 1, 2) @ X[sl].conj())
            Rd = linalg.hermitian_solve(R, dvec[sl], spec.loading)
            den = np.einsum('fi,fi->f', dvec[sl].conj(), Rd)
            if np.any(den == 0):
                raise ValueError('Zero steering vector')
            return Rd / den.real[:, None]
        filters[c] = _per_freq(run, F, threads)
    return filters, _tf(filters, stacked)


def wpe(Y_q, S1, spec, threads=1):
    """DNN-supported WPE on one microphone.

    ``Y_q`` is (T, F) or (1, T, F). The prediction uses ``dl`` frames ending
    ``dd`` frames in the past, weighted by 1/lambda from each source
    estimate. Returns (filters (C, F, dl), outputs (C, T, F)).
    """
    Y_q = np.asarray(Y_q, dtype=np.complex128)
    if Y_q.ndim == 3:
        if Y_q.shape[0] != 1:
            raise ValueError('WPE operates on a single channel')
        Y_q = Y_q[0]
    _, S1 = _check_pair(Y_q[None], S1)
    if spec.kind != 'WPE':
        spec = FilterSpec('WPE', spec.delta_l, 0, spec.delta_d,
                          spec.epsilon, spec.loading)
    stacked = stack_offsets(Y_q[None], _wpe_offsets(spec))
    filters = []
    for c in range(S1.shape[0]):
        lam = compute_lambda(S1[c], spec.epsilon)
        filters.append(_weighted_solve(stacked, Y_q, 1.0 / lam,
                                       spec.loading, threads))
    filters = np.stack(filters)
    return filters, Y_q[None] - _tf(filters, stacked)
