import json
from pathlib import Path

import numpy as np
import pytest

from gridsep.cli import main
from gridsep.model import ModelConfig, count_params
from gridsep.wavio import read_wav, write_wav

CONFIGS = Path(__file__).resolve().parents[1] / 'configs'


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope='module')
def scene8(tmp_path_factory):
    out = tmp_path_factory.mktemp('scene8')
    cfg = out / 'scene.json'
    cfg.write_text(json.dumps({'n_sources': 2, 'n_mics': 8, 'duration': 1.0,
                               'tail_length': 400, 'tail_decay': 150,
                               'noise_kind': 'white', 'snr_db': 30}))
    assert main(['simulate', '--config', str(cfg), '--seed', '3',
                 '--out', str(out)]) == 0
    return out


def test_params_matches_count(capsys):
    path = CONFIGS / 'gridnet_L4_D64_I4_J1_H256.json'
    code, out, _ = _run(capsys, 'params', '--config', path)
    assert code == 0
    n = count_params(ModelConfig.from_json(path))
    assert out.strip() == f'{n:,} parameters'
    assert out.startswith('14,5')


def test_params_flags_override(capsys):
    code, out, _ = _run(capsys, 'params', '--D', '8', '--B', '1', '--H', '4',
                        '--L', '2', '--E', '2', '--F', '9')
    cfg = ModelConfig(D=8, B=1, H=4, L=2, E=2, F=9)
    assert code == 0 and out.strip() == f'{count_params(cfg):,} parameters'


def test_beamform_eight_mics(scene8, tmp_path, capsys):
    est = [scene8 / f'direct_c{c}.wav' for c in range(2)]
    code, out, _ = _run(capsys, 'beamform', '--kind', 'mfwf', '--dl', 4,
                        '--dr', 3, '--mix', scene8 / 'mixture.wav',
                        '--est', *est, '--ref', *est, '--out', tmp_path)
    assert code == 0, out
    assert (tmp_path / 'mfwf_c1.wav').exists()
    rep = json.loads((tmp_path / 'report.json').read_text())
    assert rep['extra']['filter']['delta_l'] == 4
    assert rep['extra']['filter']['n_mics'] == 8
    assert min(rep['si_sdr']) > 20
    assert 'SI-SDRi' in out


@pytest.mark.parametrize('kind', ['convbf', 'wpe'])
def test_beamform_other_kinds(scene8, tmp_path, capsys, kind):
    est = [scene8 / f'direct_c{c}.wav' for c in range(2)]
    code, _, err = _run(capsys, 'beamform', '--kind', kind, '--dl', 2,
                        '--mix', scene8 / 'mixture.wav', '--est', *est,
                        '--out', tmp_path)
    assert code == 0, err
    rep = json.loads((tmp_path / 'report.json').read_text())
    assert rep['filter']['delta_d'] == 3
    assert read_wav(tmp_path / f'{kind}_c0.wav')[0].shape == (1, 8000)


def test_eval_mixture_is_zero_improvement(tmp_path, capsys):
    rng = np.random.default_rng(0)
    s = rng.standard_normal(4000)
    y = s + 0.5 * rng.standard_normal(4000)
    write_wav(tmp_path / 's.wav', s, 8000)
    write_wav(tmp_path / 'y.wav', y, 8000)
    code, out, _ = _run(capsys, 'eval', '--est', tmp_path / 'y.wav',
                        '--ref', tmp_path / 's.wav', '--mix',
                        tmp_path / 'y.wav')
    assert code == 0
    assert 'SI-SDRi 0.00 dB' in out


def test_stft_round_trip(tmp_path, capsys):
    x = np.random.default_rng(1).standard_normal(1234) * 0.1
    write_wav(tmp_path / 'x.wav', x, 8000)
    assert _run(capsys, 'stft', '--in', tmp_path / 'x.wav',
                '--out', tmp_path / 'X.npy')[0] == 0
    assert np.load(tmp_path / 'X.npy').shape[-1] == 129
    assert _run(capsys, 'stft', '--inverse', '--in', tmp_path / 'X.npy',
                '--length', 1234, '--out', tmp_path / 'r.wav')[0] == 0
    r, _ = read_wav(tmp_path / 'r.wav')
    np.testing.assert_allclose(r[0], x.astype(np.float32), atol=1e-6)


def test_infer_weights_round_trip(scene8, tmp_path, capsys):
    flags = ['--D', 4, '--B', 1, '--H', 4, '--L', 2, '--E', 2, '--P', 8]
    mix = scene8 / 'mixture.wav'
    code, _, err = _run(capsys, 'infer', *flags, '--seed', 5, '--mix', mix,
                        '--save-weights', tmp_path / 'w.txt',
                        '--out', tmp_path / 'a')
    assert code == 0, err
    code, _, err = _run(capsys, 'infer', *flags, '--weights',
                        tmp_path / 'w.txt', '--mix', mix,
                        '--out', tmp_path / 'b')
    assert code == 0, err
    a, _ = read_wav(tmp_path / 'a' / 'est_c1.wav')
    b, _ = read_wav(tmp_path / 'b' / 'est_c1.wav')
    # saved weights are float32, the random draw is float64
    np.testing.assert_allclose(a, b, atol=1e-5)


def test_distinct_diagnostics(tmp_path, capsys):
    code, _, err = _run(capsys, 'params', '--bogus')
    assert code == 2 and err.startswith('error: usage:')
    assert err.count('\n') == 1
    code, _, err = _run(capsys, 'eval', '--est', tmp_path / 'no.wav',
                        '--ref', tmp_path / 'no.wav', '--mix',
                        tmp_path / 'no.wav')
    assert code == 2 and 'file not found' in err
    bad = tmp_path / 'bad.json'
    bad.write_text('{"n_sources": ')
    code, _, err = _run(capsys, 'simulate', '--config', bad,
                        '--out', tmp_path)
    assert code == 2 and 'malformed config' in err
    bad.write_text('{"rooms": 2}')
    code, _, err = _run(capsys, 'simulate', '--config', bad,
                        '--out', tmp_path)
    assert code == 1 and 'Unknown' in err
    code, _, err = _run(capsys, 'params', '--threads', '0')
    assert code == 2
    code, _, err = _run(capsys, 'bogus')
    assert code == 2


def test_pipeline_mismatched_rate(scene8, tmp_path, capsys):
    cfg = tmp_path / 'p.json'
    cfg.write_text(json.dumps({'stft': {'sample_rate': 16000},
                               'stage1': {'kind': 'oracle'}}))
    code, _, err = _run(capsys, 'pipeline', '--config', cfg, '--mix',
                        scene8 / 'mixture.wav', '--out', tmp_path / 'o')
    assert code == 2 and '16000 Hz' in err


def _tree_bytes(d):
    return {p.name: p.read_bytes() for p in sorted(Path(d).iterdir())}


def test_simulate_is_byte_identical(tmp_path, capsys):
    cfg = CONFIGS / 'scene_6mic_reverb.json'
    for name in 'ab':
        assert _run(capsys, 'simulate', '--config', cfg, '--seed', 4,
                    '--out', tmp_path / name)[0] == 0
    assert _run(capsys, 'simulate', '--config', cfg, '--seed', 5,
                '--out', tmp_path / 'c')[0] == 0
    assert _tree_bytes(tmp_path / 'a') == _tree_bytes(tmp_path / 'b')
    a, c = _tree_bytes(tmp_path / 'a'), _tree_bytes(tmp_path / 'c')
    assert a['mixture.wav'] != c['mixture.wav']


def test_pipeline_threads_byte_identical(scene8, tmp_path, capsys):
    cfg = tmp_path / 'p.json'
    cfg.write_text(json.dumps({
        'stage1': {'kind': 'oracle', 'corruption_db': 20},
        'filter': {'kind': 'MFWF', 'delta_l': 2, 'delta_r': 1},
        'stage2': {'kind': 'identity'}}))
    targets = [scene8 / f'direct_c{c}.wav' for c in range(2)]
    for name, threads in (('a', 1), ('b', 4)):
        code, _, err = _run(capsys, 'pipeline', '--config', cfg, '--seed', 2,
                            '--mix', scene8 / 'mixture.wav', '--targets',
                            *targets, '--threads', threads,
                            '--out', tmp_path / name)
        assert code == 0, err
    assert _tree_bytes(tmp_path / 'a') == _tree_bytes(tmp_path / 'b')
