import json

import numpy as np
import pytest

from gridsep import filters as filt
from gridsep.model import ModelConfig, init_weights
from gridsep.objective import si_sdr
from gridsep.pipeline import (ConfigError, IdentityStage, ModelStage,
                              OracleStage, PipelineConfig, run)
from gridsep.scene import SceneSpec, simulate


@pytest.fixture(scope='module')
def scene6():
    return simulate(SceneSpec(n_sources=2, n_mics=6, duration=2.0,
                              tail_length=1000, tail_decay=300,
                              noise_kind='white', snr_db=30, seed=0))


def test_oracle_mfwf_six_mics(scene6, tmp_path):
    cfg = PipelineConfig(OracleStage(60, 0), filt.FilterSpec('MFWF', 5, 4),
                         IdentityStage())
    res = run(scene6.mixture, cfg, scene6, out_dir=tmp_path)
    assert res.s1.shape == res.filtered.shape == (2, scene6.mixture.shape[1])
    for c in range(2):
        ref = scene6.direct[c, 0]
        assert si_sdr(res.filtered[c], ref) >= si_sdr(scene6.mixture[0], ref)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ['mfwf_c0.wav', 'mfwf_c1.wav', 'mixture.wav',
                     'report.json', 'report.txt', 's1_c0.wav', 's1_c1.wav',
                     's2_c0.wav', 's2_c1.wav']
    rep = json.loads((tmp_path / 'report.json').read_text())
    assert rep['filter']['delta_l'] == 5
    assert len(rep['evaluation']['si_sdr']) == 2


def test_pass_through_is_stage1(scene6):
    cfg = PipelineConfig(OracleStage(20, 3))
    res = run(scene6.mixture, cfg, scene6)
    assert res.filtered is None and res.s2 is None
    assert res.output is res.s1
    full = run(scene6.mixture,
               PipelineConfig(OracleStage(20, 3),
                              filt.FilterSpec('MFWF', 1, 1), IdentityStage()),
               scene6)
    assert np.array_equal(full.s1, res.s1)
    assert full.output.shape[1] == scene6.mixture.shape[1]


def test_anechoic_oracle_chain_is_exact():
    sc = simulate(SceneSpec(n_sources=1, n_mics=2, duration=1.0, seed=4))
    cfg = PipelineConfig(OracleStage(np.inf), filt.FilterSpec('MFWF', 0, 0),
                         IdentityStage())
    res = run(sc.mixture, cfg, sc)
    np.testing.assert_allclose(res.output[0], sc.direct[0, 0], atol=1e-6)


def test_residual_decreases_with_taps(scene6):
    prev = None
    for taps in [(0, 0), (1, 1), (2, 2), (4, 4)]:
        spec = filt.FilterSpec('MFWF', *taps)
        res = run(scene6.mixture,
                  PipelineConfig(OracleStage(40, 1), spec), scene6)
        Y, S1 = res.spectrograms['mixture'], res.spectrograms['s1']
        W, _ = filt.mfwf(Y, S1, spec)
        obj = filt.mfwf_objective(Y, S1, W, spec).sum()
        if prev is not None:
            assert obj <= prev
        prev = obj


def test_model_stages_run():
    sc = simulate(SceneSpec(n_sources=2, n_mics=2, duration=0.1, seed=5))
    small = dict(D=4, B=1, I=2, J=1, H=4, L=2, E=2, C=2, P=2, F=129)
    c1 = ModelConfig(**small)
    c2 = ModelConfig(inputs='mixture+dnn1+mfwf', **small)
    cfg = PipelineConfig(ModelStage(c1, init_weights(c1, 0)),
                         filt.FilterSpec('MFWF', 1, 0),
                         ModelStage(c2, init_weights(c2, 1)))
    res = run(sc.mixture, cfg)
    assert res.s2.shape == (2, sc.mixture.shape[1])
    assert res.report is None
    assert np.all(np.isfinite(res.s2))


def test_validation_before_compute():
    small = dict(D=4, B=1, I=2, J=1, H=4, L=2, E=2, C=2, P=2, F=129)
    c1 = ModelConfig(**small)
    w1 = init_weights(c1, 0)
    mix = np.zeros((3, 800))
    with pytest.raises(ConfigError, match='P=2'):
        run(mix, PipelineConfig(ModelStage(c1, w1)))
    with pytest.raises(ConfigError, match='inputs'):
        PipelineConfig(ModelStage(c1, w1), filt.FilterSpec(),
                       ModelStage(c1, w1)).validate(2)
    with pytest.raises(ConfigError, match='Reference mic'):
        PipelineConfig(OracleStage(), reference_mic=4).validate(2)
    with pytest.raises(ConfigError, match='needs the scene'):
        run(np.ones((2, 800)), PipelineConfig(OracleStage()))
    c3 = ModelConfig(**{**small, 'C': 3})
    with pytest.raises(ConfigError, match='C does not match'):
        PipelineConfig(ModelStage(c1, w1), None,
                       ModelStage(c3, init_weights(c3, 0))).validate(2)


def test_config_from_json(tmp_path):
    mc = ModelConfig(D=4, B=1, I=2, J=1, H=4, L=2, E=2, C=2, P=1, F=129)
    init_weights(mc, 0).save(tmp_path / 'w.txt')
    (tmp_path / 'm.json').write_text(json.dumps(mc.to_dict()))
    (tmp_path / 'p.json').write_text(json.dumps({
        'stft': {'sample_rate': 8000},
        'stage1': {'kind': 'model', 'config': 'm.json', 'weights': 'w.txt'},
        'filter': {'kind': 'WPE', 'delta_l': 4, 'delta_d': 3},
        'stage2': {'kind': 'identity'}}))
    cfg = PipelineConfig.from_json(tmp_path / 'p.json')
    assert isinstance(cfg.stage1, ModelStage) and cfg.filter.kind == 'WPE'
    with pytest.raises(ConfigError, match='Unknown pipeline keys'):
        PipelineConfig.from_dict({'stage1': {'kind': 'oracle'}, 'x': 1})
    with pytest.raises(ConfigError, match='stage kind'):
        PipelineConfig.from_dict({'stage1': {'kind': 'magic'}})


def test_repeat_runs_identical_files(scene6, tmp_path):
    cfg = PipelineConfig(OracleStage(20, 9), filt.FilterSpec('MFWF', 2, 1),
                         IdentityStage())
    run(scene6.mixture, cfg, scene6, out_dir=tmp_path / 'a', threads=1)
    run(scene6.mixture, cfg, scene6, out_dir=tmp_path / 'b', threads=3)
    for f in (tmp_path / 'a').iterdir():
        assert f.read_bytes() == (tmp_path / 'b' / f.name).read_bytes()
