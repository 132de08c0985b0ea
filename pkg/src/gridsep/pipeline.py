"""Two-stage estimator -> linear filter -> estimator pipeline.

Stage 1 maps the mixture to C source estimates at the reference mic (a
TF-GridNet or an oracle stub built from a known scene). A per-frequency
filter is computed from those estimates, and stage 2 post-filters using the
stacked features ``[mixture RI (2P), stage-1 RI (2C), filter RI (2C)]``.

The mixture is normalized to unit variance on entry; every emitted
waveform is mapped back to the input scale.
"""
from dataclasses import asdict, dataclass, field
import json
import os

import numpy as np

from . import filters as filt
from .model import ModelConfig, WeightStore, forward
from .objective import evaluate
from .scene import corrupt_targets, normalize_variance
from .stft import StftConfig, istft, stft
from .wavio import write_wav

__all__ = ['OracleStage', 'ModelStage', 'IdentityStage', 'PipelineConfig',
           'PipelineResult', 'run', 'ConfigError']


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OracleStage:
    corruption_db: float = 20.0
    seed: int = 0


@dataclass(frozen=True)
class ModelStage:
    config: ModelConfig
    weights: WeightStore

    def __post_init__(self):
        self.weights.validate(self.config)


@dataclass(frozen=True)
class IdentityStage:
    pass


@dataclass(frozen=True)
class PipelineConfig:
    stage1: object
    filter: object = None
    stage2: object = None
    reference_mic: int = 0
    stft: StftConfig = field(default_factory=lambda: StftConfig.from_ms(8000))
    normalize: bool = True

    def validate(self, n_mics, n_sources=None):
        """Check channel/source consistency before any computation."""
        q = self.reference_mic
        if not 0 <= q < n_mics:
            raise ConfigError(f'Reference mic {q} invalid for {n_mics} mics')
        s1 = self.stage1
        if isinstance(s1, ModelStage):
            if s1.config.inputs != 'mixture_only':
                raise ConfigError('Stage-1 model must take the mixture only')
            if s1.config.P != n_mics:
                raise ConfigError(f'Stage-1 model expects P={s1.config.P}, '
                                  f'mixture has {n_mics} channels')
            if s1.config.F != self.stft.n_freqs:
                raise ConfigError('Stage-1 model F does not match the STFT')
            n_sources = s1.config.C
        elif not isinstance(s1, OracleStage):
            raise ConfigError(f'Unsupported stage 1: {s1!r}')
        s2 = self.stage2
        if isinstance(s2, ModelStage):
            want = 'mixture+dnn1+mfwf' if self.filter else 'mixture_only'
            if s2.config.inputs != want:
                raise ConfigError(f'Stage-2 model must use inputs={want!r}')
            if s2.config.P != n_mics:
                raise ConfigError('Stage-2 model P does not match mixture')
            if n_sources is not None and s2.config.C != n_sources:
                raise ConfigError('Stage-2 model C does not match stage 1')
            if s2.config.F != self.stft.n_freqs:
                raise ConfigError('Stage-2 model F does not match the STFT')
        elif s2 is not None and not isinstance(s2, IdentityStage):
            raise ConfigError(f'Unsupported stage 2: {s2!r}')
        if self.filter is not None and not isinstance(self.filter,
                                                      filt.FilterSpec):
            raise ConfigError('filter must be a FilterSpec')

    @classmethod
    def from_dict(cls, d, base_dir='.'):
        """Build from a JSON-style dict; file paths are relative to
        ``base_dir``. Keys: stft, stage1, filter, stage2, reference_mic,
        normalize."""
        known = {'stft', 'stage1', 'filter', 'stage2', 'reference_mic',
                 'normalize'}
        extra = set(d) - known
        if extra:
            raise ConfigError(f'Unknown pipeline keys: {sorted(extra)}')
        s = d.get('stft', {})
        stft_cfg = StftConfig.from_ms(s.get('sample_rate', 8000),
                                      s.get('win_ms', 32), s.get('hop_ms', 8))
        if 'stage1' not in d:
            raise ConfigError('Pipeline config needs a stage1 entry')
        fspec = None
        if d.get('filter'):
            fspec = filt.FilterSpec(**d['filter'])
        return cls(stage1=_stage_from_dict(d['stage1'], base_dir),
                   filter=fspec,
                   stage2=_stage_from_dict(d.get('stage2'), base_dir),
                   reference_mic=d.get('reference_mic', 0),
                   stft=stft_cfg,
                   normalize=d.get('normalize', True))

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        return cls.from_dict(d, os.path.dirname(os.path.abspath(path)))


def _stage_from_dict(d, base_dir):
    if d is None:
        return None
    kind = d.get('kind')
    if kind == 'oracle':
        return OracleStage(d.get('corruption_db', 20.0), d.get('seed', 0))
    if kind == 'identity':
        return IdentityStage()
    if kind == 'model':
        mc = d['config']
        if isinstance(mc, str):
            cfg = ModelConfig.from_json(os.path.join(base_dir, mc))
        else:
            cfg = ModelConfig.from_dict(mc)
        weights = WeightStore.load(os.path.join(base_dir, d['weights']), cfg)
        return ModelStage(cfg, weights)
    raise ConfigError(f'Unknown stage kind {kind!r}')


@dataclass
class PipelineResult:
    """Waveforms are (C, N) in input scale; spectrograms (C, T, F) in the
    normalized scale used internally."""
    s1: np.ndarray
    filtered: np.ndarray = None
    s2: np.ndarray = None
    spectrograms: dict = field(default_factory=dict)
    factor: float = 1.0
    report: object = None

    @property
    def output(self):
        for x in (self.s2, self.filtered, self.s1):
            if x is not None:
                return x


def _apply_filter(spec, Y, S1, q, threads):
    if spec.kind == 'MFWF':
        return filt.mfwf(Y, S1, spec, threads)
    if spec.kind == 'ConvBF':
        return filt.convbf(Y, S1, spec, q, threads)
    return filt.wpe(Y[q], S1, spec, threads)


def run(mixture, cfg, scene=None, references=None, out_dir=None, threads=1,
        wav_format='float32'):
    """Run the pipeline on a (P, N) mixture.

    ``references`` are the (C, N) direct-path targets at the reference mic;
    they default to those of ``scene``. An oracle stage 1 needs them. When
    they are available an evaluation report is attached (and written to
    ``out_dir`` when given).
    """
    mixture = np.atleast_2d(np.asarray(mixture, dtype=np.float64))
    P, N = mixture.shape
    q = cfg.reference_mic
    if references is None and scene is not None:
        references = scene.direct[:, q]
    n_sources = None
    if references is not None:
        references = np.atleast_2d(np.asarray(references, dtype=np.float64))
        if references.shape[1] != N:
            raise ConfigError('References and mixture differ in length')
        n_sources = references.shape[0]
    cfg.validate(P, n_sources)
    if isinstance(cfg.stage1, OracleStage) and references is None:
        raise ConfigError('An oracle stage 1 needs the scene or references')
    if cfg.normalize:
        y, _, factor = normalize_variance(mixture)
    else:
        y, factor = mixture, 1.0
    Y = stft(y, cfg.stft)
    specs = {'mixture': Y}

    if isinstance(cfg.stage1, OracleStage):
        S1 = corrupt_targets(references * factor, cfg.stage1.corruption_db,
                             cfg.stage1.seed, cfg.stft)
    else:
        S1 = forward([Y], cfg.stage1.config, cfg.stage1.weights)
    specs['s1'] = S1

    Sf = None
    if cfg.filter is not None:
        _, Sf = _apply_filter(cfg.filter, Y, S1, q, threads)
        specs['filtered'] = Sf

    S2 = None
    if isinstance(cfg.stage2, IdentityStage):
        S2 = Sf if Sf is not None else S1
    elif isinstance(cfg.stage2, ModelStage):
        feats = [Y, S1, Sf] if Sf is not None else [Y]
        S2 = forward(feats, cfg.stage2.config, cfg.stage2.weights)
    if S2 is not None:
        specs['s2'] = S2

    def synth(S):
        return None if S is None else istft(S, cfg.stft, N) / factor

    result = PipelineResult(synth(S1), synth(Sf), synth(S2), specs, factor)
    if references is not None:
        result.report = evaluate(result.output, references, mixture[q])
    if out_dir is not None:
        _export(result, mixture, cfg, out_dir, wav_format)
    return result


def _export(result, mixture, cfg, out_dir, fmt):
    os.makedirs(out_dir, exist_ok=True)
    sr = cfg.stft.sample_rate
    write_wav(os.path.join(out_dir, 'mixture.wav'), mixture, sr, fmt)
    fname = 'mfwf' if cfg.filter is None else cfg.filter.kind.lower()
    for prefix, wav in (('s1', result.s1), (fname, result.filtered),
                        ('s2', result.s2)):
        if wav is None:
            continue
        for c in range(wav.shape[0]):
            write_wav(os.path.join(out_dir, f'{prefix}_c{c}.wav'),
                      wav[c], sr, fmt)
    summary = {
        'n_mics': int(mixture.shape[0]),
        'n_samples': int(mixture.shape[1]),
        'n_sources': int(result.s1.shape[0]),
        'reference_mic': cfg.reference_mic,
        'normalization_factor': float(result.factor),
        'filter': None if cfg.filter is None else asdict(cfg.filter),
        'stage1': type(cfg.stage1).__name__,
        'stage2': None if cfg.stage2 is None else type(cfg.stage2).__name__,
    }
    if result.report is not None:
        summary['evaluation'] = json.loads(result.report.to_json())
    with open(os.path.join(out_dir, 'report.json'), 'w') as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write('\n')
    with open(os.path.join(out_dir, 'report.txt'), 'w') as fh:
        for key in sorted(summary):
            if key != 'evaluation':
                fh.write(f'{key}: {summary[key]}\n')
        if result.report is not None:
            fh.write(result.report.to_text())
