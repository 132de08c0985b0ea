"""Losses, permutation-invariant assignment and SI-SDR metrics.

Waveform batches are (C, N) arrays. Two SI-SDR flavours are provided:

* :func:`si_sdr_se` rescales the *estimate* to the target (used by the
  losses). It is never negative, since alpha = 0 is always admissible.
* :func:`si_sdr` rescales the *target* to the estimate, the usual
  evaluation metric; a mixture at -10 dB SNR scores about -10 dB.

Both are clamped to +-60 dB; the residual energy is floored at 1e-12 times
the target energy so a perfect estimate gives a finite value.
"""
from dataclasses import asdict, dataclass, field
import enum
import itertools
import json

import numpy as np

from .stft import StftConfig, stft

__all__ = ['LossKind', 'EvalReport', 'si_sdr_se', 'si_sdr', 'si_sdri',
           'gain_factors', 'loss_sisdr_se', 'loss_sisdr_se_mc',
           'loss_wav_mag', 'loss_wav_mag_geq', 'compute_loss', 'pit_assign',
           'evaluate', 'SDR_CLAMP_DB']

SDR_CLAMP_DB = 60.0
_REL_EPS = 1e-12


class LossKind(enum.Enum):
    SISDR_SE = 'sisdr_se'
    SISDR_SE_MC = 'sisdr_se_mc'
    WavMag = 'wav_mag'
    WavMagMC = 'wav_mag_mc'
    WavMagGEQ = 'wav_mag_geq'


def _pair(est, ref):
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError(f'Length mismatch: {est.shape} vs {ref.shape}')
    return est, ref


def _ratio_db(target_energy, resid_energy):
    val = 10 * np.log10(target_energy
                        / (resid_energy + _REL_EPS * target_energy))
    return float(np.clip(val, -SDR_CLAMP_DB, SDR_CLAMP_DB))


def gain_factors(est, ref):
    """Least-squares gains ``est.ref / est.est`` along the last axis."""
    est, ref = _pair(est, ref)
    energy = np.sum(est * est, axis=-1)
    if np.any(energy == 0):
        raise ValueError('Zero-norm estimate: gain is undefined')
    return np.sum(est * ref, axis=-1) / energy


def si_sdr_se(est, ref):
    """SI-SDR with the estimate rescaled by its least-squares gain (dB).

    >>> round(si_sdr_se([1., 1.], [1., 0.]), 4)
    3.0103
    """
    est, ref = _pair(est, ref)
    if est.ndim != 1:
        raise ValueError('si_sdr_se expects 1-D signals')
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0:
        raise ValueError('All-zero reference')
    alpha = gain_factors(est, ref)
    resid = alpha * est - ref
    return _ratio_db(ref_energy, np.dot(resid, resid))


def si_sdr(est, ref):
    """SI-SDR with the reference rescaled to the estimate (dB)."""
    est, ref = _pair(est, ref)
    if est.ndim != 1:
        raise ValueError('si_sdr expects 1-D signals')
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0:
        raise ValueError('All-zero reference')
    target = np.dot(est, ref) / ref_energy * ref
    noise = est - target
    t_energy = np.dot(target, target)
    if t_energy == 0:
        return -SDR_CLAMP_DB
    return _ratio_db(t_energy, np.dot(noise, noise))


def si_sdri(est, ref, mixture, scale='source'):
    """Improvement of SI-SDR over the mixture (reference channel).

    ``mixture`` may be (N,) or (P, N); channel 0 is the reference. ``scale``
    selects :func:`si_sdr` (``'source'``) or :func:`si_sdr_se`
    (``'estimate'``).
    """
    metric = {'source': si_sdr, 'estimate': si_sdr_se}[scale]
    mixture = np.asarray(mixture, dtype=np.float64)
    if mixture.ndim == 2:
        mixture = mixture[0]
    return metric(est, ref) - metric(mixture, ref)


def loss_sisdr_se(est, ref):
    """Negative SI-SDR-SE summed over sources."""
    est, ref = _pair(est, ref)
    return -sum(si_sdr_se(e, r) for e, r in zip(est, ref))


def loss_sisdr_se_mc(est, ref):
    """SI-SDR-SE loss plus the L1 mixture-constraint term (unweighted)."""
    est, ref = _pair(est, ref)
    alpha = gain_factors(est, ref)
    mc = np.abs((alpha[:, None] * est).sum(0) - ref.sum(0)).mean()
    return loss_sisdr_se(est, ref) + mc


def _default_stft(stft_cfg):
    return stft_cfg if stft_cfg is not None else StftConfig.from_ms(8000)


def _wav_mag_terms(est, ref, cfg):
    wav = np.abs(est - ref).mean(axis=-1)
    mag = np.abs(np.abs(stft(est, cfg)) - np.abs(stft(ref, cfg)))
    return wav + mag.mean(axis=(-2, -1))


def loss_wav_mag(est, ref, stft_cfg=None, with_mc=False):
    """L1 waveform + L1 STFT-magnitude loss, optionally on the source sums.

    Each term is averaged over samples (1/N) or T-F units (1/(T*F)).
    """
    est, ref = _pair(est, ref)
    cfg = _default_stft(stft_cfg)
    total = float(_wav_mag_terms(est, ref, cfg).sum())
    if with_mc:
        total += float(_wav_mag_terms(est.sum(0), ref.sum(0), cfg))
    return total


def loss_wav_mag_geq(est, ref, stft_cfg=None, with_mc=False):
    """Wav+Mag after rescaling every estimate by its least-squares gain."""
    est, ref = _pair(est, ref)
    alpha = gain_factors(est, ref)
    return loss_wav_mag(alpha[..., None] * est, ref, stft_cfg, with_mc)


def compute_loss(kind, est, ref, stft_cfg=None):
    kind = LossKind(kind)
    if kind is LossKind.SISDR_SE:
        return loss_sisdr_se(est, ref)
    if kind is LossKind.SISDR_SE_MC:
        return loss_sisdr_se_mc(est, ref)
    if kind is LossKind.WavMag:
        return loss_wav_mag(est, ref, stft_cfg)
    if kind is LossKind.WavMagMC:
        return loss_wav_mag(est, ref, stft_cfg, with_mc=True)
    return loss_wav_mag_geq(est, ref, stft_cfg)


def pit_assign(est, ref, kind=LossKind.SISDR_SE, stft_cfg=None):
    """Utterance-level PIT by exhaustive search (C <= 4).

    Returns ``(perm, loss)`` where ``est[perm[c]]`` is matched with
    ``ref[c]``. Ties go to the lexicographically smallest permutation.
    """
    est, ref = _pair(est, ref)
    C = est.shape[0]
    if C > 4:
        raise ValueError(f'pit_assign supports at most 4 sources, got {C}')
    best, best_loss = None, np.inf
    for perm in itertools.permutations(range(C)):
        loss = compute_loss(kind, est[list(perm)], ref, stft_cfg)
        if loss < best_loss:
            best, best_loss = perm, loss
    return tuple(best), float(best_loss)


@dataclass
class EvalReport:
    si_sdr: list
    si_sdri: list
    loss: float
    permutation: tuple
    loss_kind: str = LossKind.SISDR_SE.value
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if sorted(self.permutation) != list(range(len(self.permutation))):
            raise ValueError('permutation must be a bijection')

    def to_text(self):
        lines = [f'loss ({self.loss_kind}): {self.loss:.4f}',
                 'permutation: ' + ' '.join(str(p) for p in self.permutation)]
        for c, (s, i) in enumerate(zip(self.si_sdr, self.si_sdri)):
            lines.append(f'source {c}: SI-SDR {s:.2f} dB, SI-SDRi {i:.2f} dB')
        for key in sorted(self.extra):
            lines.append(f'{key}: {self.extra[key]}')
        return '\n'.join(lines) + '\n'

    def to_json(self):
        d = asdict(self)
        d['permutation'] = list(self.permutation)
        return json.dumps(d, indent=2, sort_keys=True) + '\n'

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d['permutation'] = tuple(d['permutation'])
        return cls(**d)


def evaluate(est, ref, mixture, kind=LossKind.SISDR_SE, stft_cfg=None):
    """PIT-align ``est`` to ``ref`` and report SI-SDR/SI-SDRi per source."""
    est, ref = _pair(est, ref)
    perm, loss = pit_assign(est, ref, kind, stft_cfg)
    aligned = est[list(perm)]
    sdr = [si_sdr(e, r) for e, r in zip(aligned, ref)]
    sdri = [si_sdri(e, r, mixture) for e, r in zip(aligned, ref)]
    return EvalReport(sdr, sdri, loss, perm, LossKind(kind).value)
