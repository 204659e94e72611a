"""Output-based non-linearity compensation.

A distorted layer output y1 = a * y0 + b is pulled back onto the ideal
distribution by matching the first two moments: y0 ~= scale * y1 + offset
with scale = sigma0 / sigma1 and offset = mu0 - scale * mu1.
"""
import json
import logging
import math
from collections import namedtuple
from typing import Dict, List, Sequence

import numpy as np

from cdcim.exceptions import DegenerateCalibration, InvertedDistortion, LengthMismatchError, ValueRangeError
from cdcim.utils import INT8_MAX, INT8_MIN, dumps_json, round_half_away_array

logger = logging.getLogger(__name__)

CalibrationStats = namedtuple('CalibrationStats', ['mu0', 'sigma0', 'mu1', 'sigma1', 'count'])


class FineTuneParams(namedtuple('_FineTuneParams', ['scale', 'offset', 'stats'])):

    @classmethod
    def identity(cls) -> 'FineTuneParams':
        return cls(1.0, 0.0, None)

    def to_dict(self, layer: int) -> Dict:
        document = {'layer': layer, 'scale': self.scale, 'offset': self.offset}
        if self.stats is not None:
            document.update(self.stats._asdict())
        return document

    @classmethod
    def from_dict(cls, document: Dict) -> 'FineTuneParams':
        try:
            scale, offset = float(document['scale']), float(document['offset'])
        except (KeyError, TypeError, ValueError) as error:
            raise ValueRangeError('malformed fine-tune parameters: {}'.format(error))
        if not math.isfinite(scale) or scale <= 0 or not math.isfinite(offset):
            raise ValueRangeError('fine-tune scale must be finite and positive, got {}'.format(scale))
        stats = None
        if all(name in document for name in CalibrationStats._fields):
            stats = CalibrationStats(*(document[name] for name in CalibrationStats._fields))
        return cls(scale, offset, stats)


def collect_stats(ideal: Sequence[float], measured: Sequence[float]) -> CalibrationStats:
    """Population mean and standard deviation of paired ideal and measured outputs."""
    if len(ideal) != len(measured):
        raise LengthMismatchError('{} ideal outputs against {} measured'.format(len(ideal), len(measured)))
    if len(ideal) < 2:
        raise DegenerateCalibration('calibration needs at least 2 samples, got {}'.format(len(ideal)))
    ideal = np.asarray(ideal, dtype=float)
    measured = np.asarray(measured, dtype=float)
    return CalibrationStats(float(ideal.mean()), float(ideal.std()), float(measured.mean()), float(measured.std()),
                            int(ideal.size))


def compute_params(stats: CalibrationStats) -> FineTuneParams:
    if stats.sigma1 == 0:
        raise DegenerateCalibration('measured outputs are constant; no correction can be derived')
    scale = stats.sigma0 / stats.sigma1
    if scale == 0:
        raise DegenerateCalibration('ideal outputs are constant; the correction would erase the signal')
    return FineTuneParams(scale, stats.mu0 - scale * stats.mu1, stats)


def check_orientation(ideal: Sequence[float], measured: Sequence[float]) -> None:
    """Reject distortions that invert the output ordering."""
    ideal = np.asarray(ideal, dtype=float)
    measured = np.asarray(measured, dtype=float)
    covariance = float(np.mean((ideal - ideal.mean()) * (measured - measured.mean())))
    if covariance < 0:
        raise InvertedDistortion('measured outputs fall as ideal outputs rise (covariance {:.3g})'.format(covariance))


def calibrate(ideal: Sequence[float], measured: Sequence[float]) -> FineTuneParams:
    stats = collect_stats(ideal, measured)
    check_orientation(ideal, measured)
    params = compute_params(stats)
    logger.info('fine-tune scale %.5f offset %.5f over %d samples', params.scale, params.offset, stats.count)
    return params


def apply(params: FineTuneParams, y):
    """scale * y + offset, element-wise for arrays."""
    if isinstance(y, (list, tuple, np.ndarray)):
        return params.scale * np.asarray(y, dtype=float) + params.offset
    return params.scale * y + params.offset


def apply_requantize(params: FineTuneParams, codes, relu: bool = True) -> np.ndarray:
    """Correct ADC codes, then round half away from zero onto the next layer's 8b range."""
    corrected = round_half_away_array(apply(params, np.asarray(codes, dtype=float)))
    low = 0 if relu else INT8_MIN
    return np.clip(corrected, low, INT8_MAX)


def dumps_params(params: Sequence[FineTuneParams]) -> str:
    return dumps_json({'schema_version': 1, 'layers': [p.to_dict(layer) for layer, p in enumerate(params)]})


def loads_params(text: str) -> List[FineTuneParams]:
    try:
        document = json.loads(text)
        layers = sorted(document['layers'], key=lambda layer: layer['layer'])
    except (ValueError, KeyError, TypeError) as error:
        raise ValueRangeError('malformed fine-tune document: {}'.format(error))
    return [FineTuneParams.from_dict(layer) for layer in layers]
