import numpy as np
import pytest

from cdcim.exceptions import DegenerateCalibration, InvertedDistortion, LengthMismatchError, ValueRangeError
from cdcim.finetune import FineTuneParams, apply, apply_requantize, calibrate, collect_stats, compute_params, \
    dumps_params, loads_params


class TestCollectStats:

    def test_hand_example(self):
        stats = collect_stats([0, 2], [3, 7])
        assert (stats.mu0, stats.sigma0, stats.mu1, stats.sigma1, stats.count) == (1, 1, 5, 2, 2)

    def test_identical(self):
        stats = collect_stats([1, 4, 9], [1, 4, 9])
        assert stats.mu0 == stats.mu1
        assert stats.sigma0 == stats.sigma1

    def test_constant_measurement(self):
        assert collect_stats([1, 2, 3], [5, 5, 5]).sigma1 == 0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            collect_stats([1, 2], [1])

    def test_too_few(self):
        with pytest.raises(DegenerateCalibration):
            collect_stats([1], [1])


class TestComputeParams:

    def test_hand_example(self):
        params = compute_params(collect_stats([0, 2], [3, 7]))
        assert params.scale == pytest.approx(0.5)
        assert params.offset == pytest.approx(-1.5)

    def test_identity(self):
        params = compute_params(collect_stats([3, 1, 2], [3, 1, 2]))
        assert params.scale == pytest.approx(1)
        assert params.offset == pytest.approx(0)

    def test_inverts_linear_distortion(self):
        ideal = np.random.default_rng(0).normal(0, 1, 500)
        measured = 2 * ideal + 3
        params = calibrate(ideal, measured)
        assert params.scale == pytest.approx(0.5)
        assert params.offset == pytest.approx(-1.5)
        assert apply(params, measured) == pytest.approx(ideal, abs=1e-9)

    def test_constant_measurement(self):
        with pytest.raises(DegenerateCalibration):
            compute_params(collect_stats([1, 2, 3], [5, 5, 5]))

    def test_inverted_distortion(self):
        with pytest.raises(InvertedDistortion):
            calibrate([1, 2, 3, 4], [4, 3, 2, 1])


class TestApply:

    def test_identity(self):
        assert apply(FineTuneParams.identity(), 42) == 42

    def test_scalar(self):
        assert apply(FineTuneParams(0.5, -1.5, None), 7) == 2

    def test_batch_moments(self):
        rng = np.random.default_rng(9)
        ideal = rng.normal(10, 3, 300)
        measured = 0.7 * ideal + rng.normal(0, 0.5, 300) - 4
        params = calibrate(ideal, measured)
        corrected = apply(params, measured)
        assert corrected.mean() == pytest.approx(ideal.mean(), abs=1e-9)
        assert corrected.std() == pytest.approx(ideal.std(), abs=1e-9)

    def test_requantize_relu(self):
        params = FineTuneParams(2.0, -3.0, None)
        assert list(apply_requantize(params, [0, 1, 2, 100])) == [0, 0, 1, 127]

    def test_requantize_signed(self):
        params = FineTuneParams(1.0, -0.5, None)
        assert list(apply_requantize(params, [-128, 0, 1], relu=False)) == [-128, -1, 1]


class TestSerialization:

    def test_round_trip(self):
        params = [calibrate([0, 2, 4], [1, 5, 9]), FineTuneParams(1.25, 0.5, None)]
        loaded = loads_params(dumps_params(params))
        assert [(p.scale, p.offset) for p in loaded] == [(p.scale, p.offset) for p in params]
        assert loaded[0].stats == params[0].stats

    def test_rejects_non_positive_scale(self):
        with pytest.raises(ValueRangeError):
            FineTuneParams.from_dict({'scale': 0, 'offset': 1})

    def test_malformed(self):
        with pytest.raises(ValueRangeError):
            loads_params('{"layers": [{"offset": 1}]}')
