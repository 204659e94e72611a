"""Experiment configuration: per-command defaults, a JSON file, then flag overrides."""
import copy
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from cdcim.capnet import CALIBRATED_SIGMA_C
from cdcim.exceptions import ConfigError
from cdcim.models import ChipFigures

OUTPUT_DIR_ENV = 'CDCIM_OUTPUT_DIR'

DEFAULTS = {
    'mac': {
        'activations': None,
        'weights': None,
        'rows': ChipFigures.ROWS,
        'sigma_c': 0.0,
        'parasitic_c': 0.0,
        'seed': 0,
        'output': None,
    },
    'montecarlo': {
        'sigma_c': CALIBRATED_SIGMA_C,
        'n_samples': 1000,
        'seed': 0,
        'target_bits': 8,
        'min_bits': 7,
        'output': 'montecarlo.csv',
    },
    'sweep': {
        'target': ChipFigures.CAAT_7B_YIELD,
        'n_samples': 1000,
        'seed': 0,
        'low': 0.0,
        'high': 0.1,
        'iterations': 30,
        'output': None,
    },
    'inl': {
        'target_inl': ChipFigures.ADC_MAX_INL_LSB,
        'epsilon': None,
        'sigma_c': 0.0,
        'seed': None,
        'points_per_lsb': 64,
        'output': 'adc_inl.csv',
    },
    'cost': {
        'params': {},
        'format': 'json',
        'output': None,
    },
    'table1': {
        'rows': ChipFigures.ROWS,
        'cycles_per_op': 45,
        'format': 'csv',
        'output': None,
    },
    'calibrate': {
        'model': None,
        'data': None,
        'task_seed': 0,
        'sigma_c': CALIBRATED_SIGMA_C,
        'parasitic_c': 16.0,
        'seed': 0,
        'n_calibration': 64,
        'output': 'finetune.json',
    },
    'nn': {
        'model': None,
        'data': None,
        'task_seed': 0,
        'modes': ['ideal', 'distorted', 'finetuned'],
        'seeds': list(range(10)),
        'sigma_c': CALIBRATED_SIGMA_C,
        'parasitic_c': 16.0,
        'n_calibration': 64,
        'workers': 1,
        'output': 'nn.json',
    },
}

NN_MODES = ('ideal', 'distorted', 'finetuned')


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.params[key]

    def output_path(self, key: str = 'output') -> Optional[str]:
        """Relative output paths land in $CDCIM_OUTPUT_DIR when it is set."""
        path = self.params.get(key)
        if path is None or path == '-':
            return None
        directory = os.environ.get(OUTPUT_DIR_ENV)
        if directory and not os.path.isabs(path):
            return os.path.join(directory, path)
        return path


def _coerce(command: str, key: str, value, default):
    if value is None or default is None:
        return value
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError('expected true or false')
            return value
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, bool) or int(value) != value:
                raise TypeError('expected an integer')
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError('expected a number')
            return float(value)
        if isinstance(default, (list, dict)) and not isinstance(value, type(default)):
            raise TypeError('expected a {}'.format(type(default).__name__))
    except (TypeError, ValueError) as error:
        raise ConfigError('{}.{} = {!r}: {}'.format(command, key, value, error))
    return value


def _validate(command: str, params: Dict[str, Any]) -> None:
    for key in ('sigma_c', 'parasitic_c'):
        if key in params and params[key] is not None and params[key] < 0:
            raise ConfigError('{}.{} must be non-negative, got {}'.format(command, key, params[key]))
    for key in ('n_samples', 'rows', 'workers', 'iterations', 'points_per_lsb'):
        if key in params and params[key] is not None and params[key] < 1:
            raise ConfigError('{}.{} must be positive, got {}'.format(command, key, params[key]))
    if 'modes' in params:
        unknown = set(params['modes']) - set(NN_MODES)
        if unknown:
            raise ConfigError('{}.modes has unknown entries: {}'.format(command, ', '.join(sorted(unknown))))
    if params.get('format') not in (None, 'json', 'csv'):
        raise ConfigError('{}.format must be json or csv, got {!r}'.format(command, params['format']))


def load_config(command: str, text: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Merge defaults, a JSON document (flat, or keyed by command) and non-None overrides."""
    if command not in DEFAULTS:
        raise ConfigError('unknown command {!r}'.format(command))
    defaults = DEFAULTS[command]
    params = copy.deepcopy(defaults)
    layers = []
    if text:
        try:
            document = json.loads(text)
        except ValueError as error:
            raise ConfigError('config is not valid JSON: {}'.format(error))
        if not isinstance(document, dict):
            raise ConfigError('config must be a JSON object')
        if command in document and isinstance(document[command], dict):
            document = document[command]
        layers.append(document)
    if overrides:
        layers.append({key: value for key, value in overrides.items() if value is not None})
    for layer in layers:
        unknown = set(layer) - set(defaults)
        if unknown:
            raise ConfigError('unknown {} settings: {}'.format(command, ', '.join(sorted(unknown))))
        for key, value in layer.items():
            params[key] = _coerce(command, key, value, defaults[key])
    _validate(command, params)
    return ExperimentConfig(command, params)
