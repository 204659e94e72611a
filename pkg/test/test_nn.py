import statistics

import numpy as np
import pytest

from cdcim.exceptions import DegenerateCalibration, TilingUnsupported, ValueRangeError
from cdcim.finetune import apply
from cdcim.macro import Macro
from cdcim.models import AdcResult
from cdcim.nn import ARCH, MIN_IDEAL_ACCURACY, QuantLayer, QuantModel, build_macros, calibrate_model, \
    dataset_digest, distorted_macros, dumps_dataset, dumps_model, evaluate, ideal_macros, infer_on_macro, \
    infer_reference, loads_dataset, loads_model, make_model_and_task, make_synthetic_task, reference_codes, \
    reference_layer_codes, summarize

W1 = np.asarray([[127, 127], [-127, 0], [64, 64]])
W2 = np.asarray([[0, 0, 127], [127, 0, 0], [0, 127, 0]])


@pytest.fixture
def hand_model():
    return QuantModel([QuantLayer(W1, 1.0, True), QuantLayer(W2, 1.0, False)], 0.05)


class TestReferenceInference:

    def test_codes(self):
        assert list(reference_codes(W1, [127, 127], relu=False)) == [126, -63, 64]
        assert list(reference_codes(W1, [127, 127], relu=True)) == [126, 0, 64]

    def test_two_layers_by_hand(self, hand_model):
        hidden, logits = reference_layer_codes(hand_model, [127, 127])
        assert list(hidden) == [126, 0, 64]
        assert list(logits) == [21, 42, 0]
        assert infer_reference(hand_model, [127, 127]) == 1

    def test_dominant_logit(self):
        model = QuantModel([QuantLayer(np.asarray([[0, 0], [100, 100], [0, 0]]), 1.0, False)], 1.0)
        assert infer_reference(model, [90, 90]) == 1

    def test_ties_pick_lowest_class(self):
        model = QuantModel([QuantLayer(np.zeros((3, 4), dtype=np.int64), 1.0, False)], 1.0)
        assert infer_reference(model, [5, -5, 100, 1]) == 0

    def test_input_width(self, hand_model):
        with pytest.raises(ValueRangeError):
            infer_reference(hand_model, [1, 2, 3])

    def test_too_wide_for_one_macro(self):
        model = QuantModel([QuantLayer(np.zeros((1, 1153), dtype=np.int64), 1.0, False)], 1.0)
        with pytest.raises(TilingUnsupported):
            infer_reference(model, [0] * 1153)

    def test_arch(self, hand_model):
        assert hand_model.arch == (2, 3, 3)


class TestMacroInference:

    def test_ideal_macros_match_reference(self, hand_model):
        macros = build_macros(ideal_macros(hand_model))
        rng = np.random.default_rng(1)
        for x in rng.integers(-127, 128, (40, 2)):
            assert infer_on_macro(hand_model, list(x), macros) == infer_reference(hand_model, list(x))

    def test_distorted_macros_are_seeded(self, hand_model):
        first = distorted_macros(hand_model, 0.01, 4)
        second = distorted_macros(hand_model, 0.01, 4)
        assert [cfg.leafs[0] for cfg in first] == [cfg.leafs[0] for cfg in second]
        assert first[0].leafs[0] != first[1].leafs[0]

    def test_calibration_needs_samples(self, hand_model):
        macros = build_macros(distorted_macros(hand_model, 0.01, 0))
        with pytest.raises(DegenerateCalibration):
            calibrate_model(hand_model, np.ones((8, 2), dtype=np.int64), macros)


class LinearlyDistortedMacro(Macro):
    """Ideal macro whose codes come out as 2 * code + 3."""

    def mac_layer(self, A, weight_rows, relu=True):
        return [AdcResult(2 * r.code + 3, r.comparisons, r.early_stopped)
                for r in super().mac_layer(A, weight_rows, relu)]


class TestCalibrateModel:

    @pytest.fixture
    def x_calibration(self):
        return np.random.default_rng(12).integers(-127, 128, (40, 2))

    def test_ideal_macros_give_identity(self, hand_model, x_calibration):
        params = calibrate_model(hand_model, x_calibration, build_macros(ideal_macros(hand_model)))
        assert len(params) == 2
        for p in params:
            assert p.scale == pytest.approx(1.0)
            assert p.offset == pytest.approx(0.0, abs=1e-9)

    def test_linear_distortion_is_inverted(self, x_calibration):
        model = QuantModel([QuantLayer(W1, 1.0, False)], 0.05)
        macros = [LinearlyDistortedMacro(cfg) for cfg in ideal_macros(model)]
        params = calibrate_model(model, x_calibration, macros)
        assert params[0].scale == pytest.approx(0.5)
        assert params[0].offset == pytest.approx(-1.5)
        for x in x_calibration:
            measured = [r.code for r in macros[0].mac_layer(list(x), W1, relu=False)]
            assert apply(params[0], measured) == pytest.approx(reference_codes(W1, x, relu=False), abs=1e-9)
            assert infer_on_macro(model, list(x), macros, params) == infer_reference(model, list(x))

    def test_constant_layer_is_degenerate(self, x_calibration):
        model = QuantModel([QuantLayer(np.zeros((3, 2), dtype=np.int64), 1.0, False)], 0.05)
        with pytest.raises(DegenerateCalibration):
            calibrate_model(model, x_calibration, build_macros(ideal_macros(model)))

    def test_one_conversion_per_neuron(self, hand_model):
        macros = build_macros(ideal_macros(hand_model))
        infer_on_macro(hand_model, [127, 127], macros)
        assert sum(macro.conversions for macro in macros) == 6


class TestDocuments:

    def test_model_round_trip(self, hand_model):
        loaded = loads_model(dumps_model(hand_model))
        assert loaded.input_scale == hand_model.input_scale
        for original, layer in zip(hand_model.layers, loaded.layers):
            assert np.array_equal(original.weights, layer.weights)
            assert (original.output_scale, original.relu) == (layer.output_scale, layer.relu)

    def test_model_layers_must_chain(self, hand_model):
        document = hand_model.to_dict()
        document['layers'].reverse()
        with pytest.raises(ValueRangeError):
            QuantModel.from_dict(document)

    def test_malformed_model(self):
        with pytest.raises(ValueRangeError):
            loads_model('not json')

    def test_dataset_round_trip(self):
        dataset = make_synthetic_task(3, n_train=20, n_test=10)
        loaded = loads_dataset(dumps_dataset(dataset))
        for original, parsed in zip(dataset, loaded):
            assert np.array_equal(original, parsed)
        assert dataset_digest(loaded) == dataset_digest(dataset)

    def test_malformed_dataset(self):
        with pytest.raises(ValueRangeError):
            loads_dataset('split,f0,label\nvalidation,1.0,0\n')


class TestSyntheticTask:

    def test_shapes(self):
        dataset = make_synthetic_task(0)
        assert dataset.x_train.shape == (600, ARCH[0])
        assert dataset.x_test.shape == (200, ARCH[0])
        assert set(np.unique(dataset.y_train)) <= set(range(ARCH[-1]))

    def test_seeded(self):
        assert dataset_digest(make_synthetic_task(5)) == dataset_digest(make_synthetic_task(5))


@pytest.mark.slow
class TestAccuracyRecovery:

    def test_ideal_accuracy(self):
        _, model, _ = make_model_and_task(0)
        assert model.arch == ARCH

    def test_finetune_recovers(self):
        dataset, model, _ = make_model_and_task(0)
        result = evaluate(model, dataset, range(10), sigma_c=0.012)
        summary = summarize(result)
        assert result.ideal >= MIN_IDEAL_ACCURACY
        assert statistics.median(result.distorted) <= result.ideal
        assert statistics.median(result.finetuned) >= statistics.median(result.distorted)
        assert summary['accuracy']['ideal'] == result.ideal
        assert len(summary['accuracy']['finetuned']) == 10
        assert summary['finetuned_not_worse'] >= 8
