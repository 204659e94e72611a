import json

import pytest

from cdcim.capnet import CALIBRATED_SIGMA_C
from cdcim.config import OUTPUT_DIR_ENV, load_config
from cdcim.exceptions import ConfigError


class TestLoadConfig:

    def test_defaults(self):
        cfg = load_config('montecarlo')
        assert cfg['sigma_c'] == CALIBRATED_SIGMA_C
        assert cfg['n_samples'] == 1000
        assert cfg['seed'] == 0

    def test_file_then_flags(self):
        text = json.dumps({'sigma_c': 0.02, 'n_samples': 50})
        cfg = load_config('montecarlo', text, {'n_samples': 10, 'seed': None})
        assert cfg['sigma_c'] == 0.02
        assert cfg['n_samples'] == 10
        assert cfg['seed'] == 0

    def test_keyed_by_command(self):
        text = json.dumps({'montecarlo': {'seed': 9}})
        assert load_config('montecarlo', text)['seed'] == 9

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            load_config('montecarlo', json.dumps({'sigma': 0.01}))

    def test_unknown_command(self):
        with pytest.raises(ConfigError):
            load_config('train')

    def test_bad_json(self):
        with pytest.raises(ConfigError):
            load_config('cost', '{not json')

    def test_type_check(self):
        with pytest.raises(ConfigError):
            load_config('montecarlo', overrides={'n_samples': 2.5})

    def test_negative_sigma(self):
        with pytest.raises(ConfigError):
            load_config('mac', overrides={'sigma_c': -0.1})

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            load_config('nn', overrides={'modes': ['ideal', 'noisy']})

    def test_defaults_are_not_shared(self):
        cfg = load_config('nn')
        cfg['seeds'].append(99)
        assert 99 not in load_config('nn')['seeds']

    def test_output_dir(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
        assert load_config('inl').output_path() == str(tmp_path / 'adc_inl.csv')
        assert load_config('inl', overrides={'output': '-'}).output_path() is None
        absolute = str(tmp_path / 'elsewhere.csv')
        assert load_config('inl', overrides={'output': absolute}).output_path() == absolute
