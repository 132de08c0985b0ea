"""``gridsep`` command-line front end.

Every subcommand validates its inputs first and exits nonzero with a single
``error: ...`` line on failure. All randomness goes through ``--seed``.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import filters as filt
from .model import (ModelConfig, WeightStore, count_params, forward,
                    gmacs_per_second, init_weights)
from .objective import LossKind, evaluate
from .pipeline import OracleStage, PipelineConfig, run
from .scene import SceneSpec, simulate
from .stft import StftConfig, istft, stft
from .wavio import read_wav, write_wav


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f'usage: {message}')


def _threads(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError('--threads must be >= 1')
    return n


def _existing(path):
    if not os.path.isfile(path):
        raise CliError(f'file not found: {path}')
    return path


def _load_json(path):
    _existing(path)
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(f'malformed config {path}: {exc}') from None


def _read_many(paths):
    """Read mono or multi-channel WAVs and stack all channels."""
    chans, rate = [], None
    for p in paths:
        data, sr = read_wav(_existing(p))
        if rate is not None and sr != rate:
            raise CliError(f'sample rate mismatch in {p}')
        rate = sr
        chans.append(data)
    lengths = {c.shape[1] for c in chans}
    if len(lengths) != 1:
        raise CliError('input WAVs differ in length')
    return np.concatenate(chans, axis=0), rate


def _read_targets(paths, n_mics, q):
    """Read one file per source; multi-channel files (as written by
    ``simulate``) are reduced to microphone ``q``."""
    refs, sr = _read_many(paths)
    if refs.shape[0] == len(paths) * n_mics and n_mics > 1:
        refs = refs[q::n_mics]
    elif refs.shape[0] != len(paths):
        raise CliError('target files must be mono or have one channel per '
                       'microphone')
    return refs, sr


def _stft_cfg(args, sample_rate):
    return StftConfig.from_ms(sample_rate, args.win_ms, args.hop_ms)


def _add_stft_flags(p):
    p.add_argument('--win-ms', type=float, default=32)
    p.add_argument('--hop-ms', type=float, default=8)


def _write_report(out_dir, report, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    if extra:
        report.extra.update(extra)
    with open(os.path.join(out_dir, 'report.json'), 'w') as fh:
        fh.write(report.to_json())
    with open(os.path.join(out_dir, 'report.txt'), 'w') as fh:
        fh.write(report.to_text())


def cmd_simulate(args):
    d = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        d['seed'] = args.seed
    spec = SceneSpec.from_dict(d)
    dry = None
    if args.dry:
        dry, sr = _read_many(args.dry)
        if sr != spec.sample_rate:
            raise CliError('dry WAV sample rate differs from the scene')
    scene = simulate(spec, dry)
    scene.export(args.out, args.format)
    with open(os.path.join(args.out, 'scene.json'), 'w') as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write('\n')
    print(f'wrote scene with {spec.n_sources} sources, {spec.n_mics} mics '
          f'to {args.out}')


def cmd_stft(args):
    if args.inverse:
        X = np.load(_existing(args.input))
        cfg = _stft_cfg(args, args.sample_rate)
        if args.length is None:
            raise CliError('--inverse needs --length')
        write_wav(args.out, istft(X, cfg, args.length), args.sample_rate,
                  args.format)
        print(f'wrote {args.out}')
        return
    x, sr = read_wav(_existing(args.input))
    cfg = _stft_cfg(args, sr)
    X = stft(x, cfg)
    np.save(args.out, X)
    print(f'{X.shape[0]} channels, T={X.shape[1]}, F={X.shape[2]}')


def _model_cfg(args):
    d = _load_json(args.config) if args.config else {}
    for key in ('D', 'B', 'I', 'J', 'H', 'L', 'E', 'C', 'P', 'F'):
        val = getattr(args, key, None)
        if val is not None:
            d[key] = val
    if getattr(args, 'order', None):
        d['unfold_order'] = args.order
    return ModelConfig.from_dict(d)


def _add_model_flags(p):
    p.add_argument('--config', help='model config JSON')
    for key in ('D', 'B', 'I', 'J', 'H', 'L', 'E', 'C', 'P', 'F'):
        p.add_argument(f'--{key}', type=int, dest=key)
    p.add_argument('--order', choices=['LNUnfold', 'UnfoldLN'])


def cmd_infer(args):
    cfg = _model_cfg(args)
    if args.weights:
        weights = WeightStore.load(_existing(args.weights), cfg)
    else:
        weights = init_weights(cfg, args.seed)
    if args.save_weights:
        weights.save(args.save_weights)
    y, sr = _read_many(args.mix)
    scfg = _stft_cfg(args, sr)
    feats = [stft(y, scfg)]
    for group in (args.dnn1, args.filtered):
        if group:
            feats.append(stft(_read_many(group)[0], scfg))
    S = forward(feats, cfg, weights)
    os.makedirs(args.out, exist_ok=True)
    out = istft(S, scfg, y.shape[1])
    for c in range(out.shape[0]):
        write_wav(os.path.join(args.out, f'est_c{c}.wav'), out[c], sr,
                  args.format)
    print(f'wrote {out.shape[0]} estimates to {args.out}')


def cmd_beamform(args):
    kind = {'mfwf': 'MFWF', 'convbf': 'ConvBF', 'wpe': 'WPE'}[args.kind]
    y, sr = _read_many(args.mix)
    q = args.ref_mic
    if not 0 <= q < y.shape[0]:
        raise CliError(f'--ref-mic {q} out of range')
    est, sr_e = _read_targets(args.est, y.shape[0], q)
    if sr_e != sr or est.shape[1] != y.shape[1]:
        raise CliError('estimates and mixture differ in rate or length')
    if args.dl is None:
        spec = filt.FilterSpec.default(kind, y.shape[0])
        spec = filt.FilterSpec(kind, spec.delta_l, spec.delta_r,
                               spec.delta_d if args.dd is None else args.dd,
                               args.eps)
    else:
        dd = args.dd if args.dd is not None else (0 if kind == 'MFWF' else 3)
        spec = filt.FilterSpec(kind, args.dl, args.dr, dd, args.eps)
    cfg = _stft_cfg(args, sr)
    Y, S1 = stft(y, cfg), stft(est, cfg)
    if kind == 'MFWF':
        _, out = filt.mfwf(Y, S1, spec, args.threads)
    elif kind == 'ConvBF':
        _, out = filt.convbf(Y, S1, spec, q, args.threads)
    else:
        _, out = filt.wpe(Y[q], S1, spec, args.threads)
    wav = istft(out, cfg, y.shape[1])
    os.makedirs(args.out, exist_ok=True)
    for c in range(wav.shape[0]):
        write_wav(os.path.join(args.out, f'{args.kind}_c{c}.wav'), wav[c],
                  sr, args.format)
    info = {'kind': spec.kind, 'delta_l': spec.delta_l,
            'delta_r': spec.delta_r, 'delta_d': spec.delta_d,
            'epsilon': spec.epsilon, 'n_mics': int(y.shape[0]),
            'reference_mic': q}
    if args.ref:
        ref, _ = _read_targets(args.ref, y.shape[0], q)
        report = evaluate(wav, ref, y[q])
        _write_report(args.out, report, {'filter': info})
        print(report.to_text(), end='')
    else:
        with open(os.path.join(args.out, 'report.json'), 'w') as fh:
            json.dump({'filter': info}, fh, indent=2, sort_keys=True)
            fh.write('\n')
    print(f'wrote {wav.shape[0]} filtered signals to {args.out}')


def cmd_eval(args):
    est, sr = _read_many(args.est)
    mix, sr_m = _read_many([args.mix])
    if not 0 <= args.ref_mic < mix.shape[0]:
        raise CliError(f'--ref-mic {args.ref_mic} out of range')
    ref, sr_r = _read_targets(args.ref, mix.shape[0], args.ref_mic)
    if len({sr, sr_r, sr_m}) != 1:
        raise CliError('sample rates differ')
    if est.shape != ref.shape:
        raise CliError(f'{est.shape[0]} estimates vs {ref.shape[0]} '
                       f'references, or lengths differ')
    if mix.shape[1] != est.shape[1]:
        raise CliError('mixture length differs from the estimates')
    report = evaluate(est, ref, mix[args.ref_mic], LossKind(args.loss),
                      StftConfig.from_ms(sr))
    if args.out:
        _write_report(args.out, report)
    print(report.to_text(), end='')


def cmd_pipeline(args):
    cfg_path = _existing(args.config)
    _load_json(cfg_path)
    cfg = PipelineConfig.from_json(cfg_path)
    if args.seed is not None and isinstance(cfg.stage1, OracleStage):
        cfg = PipelineConfig(OracleStage(cfg.stage1.corruption_db,
                                         args.seed),
                             cfg.filter, cfg.stage2, cfg.reference_mic,
                             cfg.stft, cfg.normalize)
    y, sr = _read_many(args.mix)
    if sr != cfg.stft.sample_rate:
        raise CliError(f'mixture is {sr} Hz, config expects '
                       f'{cfg.stft.sample_rate} Hz')
    refs = None
    if args.targets:
        refs, sr_t = _read_targets(args.targets, y.shape[0],
                                   cfg.reference_mic)
        if sr_t != sr:
            raise CliError('target sample rate differs from the mixture')
        if refs.shape[1] != y.shape[1]:
            raise CliError('targets and mixture differ in length')
    result = run(y, cfg, references=refs, out_dir=args.out,
                 threads=args.threads, wav_format=args.format)
    if result.report is not None:
        print(result.report.to_text(), end='')
    print(f'wrote outputs to {args.out}')


def cmd_params(args):
    cfg = _model_cfg(args)
    n = count_params(cfg)
    print(f'{n:,} parameters')
    if args.macs:
        g = gmacs_per_second(cfg, StftConfig.from_ms(args.sample_rate))
        print(f'{g:.1f} GMAC/s (4 s segment)')


def build_parser():
    p = _Parser(prog='gridsep', description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest='command', parser_class=_Parser)
    sub.required = True

    s = sub.add_parser('simulate', help='generate a synthetic scene')
    s.add_argument('--config', help='scene JSON (SceneSpec fields)')
    s.add_argument('--dry', nargs='+', help='dry source WAVs')
    s.add_argument('--out', required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser('stft', help='analysis to .npy, or --inverse')
    s.add_argument('--in', dest='input', required=True)
    s.add_argument('--out', required=True)
    s.add_argument('--inverse', action='store_true')
    s.add_argument('--length', type=int)
    s.add_argument('--sample-rate', type=int, default=8000)
    _add_stft_flags(s)
    s.set_defaults(func=cmd_stft)

    s = sub.add_parser('infer', help='TF-GridNet forward pass')
    _add_model_flags(s)
    s.add_argument('--weights', help='weight manifest; random if omitted')
    s.add_argument('--save-weights')
    s.add_argument('--mix', nargs='+', required=True)
    s.add_argument('--dnn1', nargs='+')
    s.add_argument('--filtered', nargs='+')
    s.add_argument('--out', required=True)
    _add_stft_flags(s)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser('beamform', help='MFWF / ConvBF / WPE')
    s.add_argument('--kind', choices=['mfwf', 'convbf', 'wpe'],
                   required=True)
    s.add_argument('--mix', nargs='+', required=True)
    s.add_argument('--est', nargs='+', required=True)
    s.add_argument('--ref', nargs='+', help='targets for a report')
    s.add_argument('--dl', type=int)
    s.add_argument('--dr', type=int, default=0)
    s.add_argument('--dd', type=int)
    s.add_argument('--eps', type=float, default=1e-5)
    s.add_argument('--ref-mic', type=int, default=0)
    s.add_argument('--out', required=True)
    _add_stft_flags(s)
    s.set_defaults(func=cmd_beamform)

    s = sub.add_parser('eval', help='SI-SDR / SI-SDRi with PIT')
    s.add_argument('--est', nargs='+', required=True)
    s.add_argument('--ref', nargs='+', required=True)
    s.add_argument('--mix', required=True)
    s.add_argument('--ref-mic', type=int, default=0)
    s.add_argument('--loss', default='sisdr_se',
                   choices=[k.value for k in LossKind])
    s.add_argument('--out')
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser('pipeline', help='stage 1 -> filter -> stage 2')
    s.add_argument('--config', required=True)
    s.add_argument('--mix', nargs='+', required=True)
    s.add_argument('--targets', nargs='+',
                   help='direct-path targets (oracle stage 1, report)')
    s.add_argument('--out', required=True)
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser('params', help='parameter count')
    _add_model_flags(s)
    s.add_argument('--macs', action='store_true')
    s.add_argument('--sample-rate', type=int, default=8000)
    s.set_defaults(func=cmd_params)

    for name, sp in sub.choices.items():
        sp.add_argument('--seed', type=int,
                        default=None if name in ('simulate', 'pipeline')
                        else 0)
        sp.add_argument('--threads', type=_threads,
                        default=os.cpu_count() or 1)
        if name in ('simulate', 'infer', 'beamform', 'pipeline', 'stft'):
            sp.add_argument('--format', choices=['float32', 'pcm16'],
                            default='float32')
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except CliError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f'error: file not found: {exc.filename}', file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError, OSError,
            np.linalg.LinAlgError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f'error: {type(exc).__name__}: {msg}', file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
