"""Quantized MLP inference on the macro: ideal, distorted and fine-tuned modes."""
import csv
import hashlib
import io
import json
import logging
import statistics
from collections import namedtuple
from typing import List, Optional, Sequence, Tuple

import numpy as np

from cdcim.exceptions import DegenerateCalibration, TilingUnsupported, ValueRangeError
from cdcim.finetune import FineTuneParams, apply, apply_requantize, calibrate
from cdcim.macro import Macro, MacroConfig
from cdcim.models import ChipFigures
from cdcim.runner import run_ordered
from cdcim.utils import INT8_MAX, INT8_MIN, base64_to_int8, dumps_csv, dumps_json, int8_to_base64

logger = logging.getLogger(__name__)

ARCH = (16, 16, 3)
MIN_IDEAL_ACCURACY = 0.9
MIN_CALIBRATION_SAMPLES = 32
DISTORTION_PARASITIC_C = 16
SCHEMA_VERSION = 1

Dataset = namedtuple('Dataset', ['x_train', 'y_train', 'x_test', 'y_test'])
QuantLayer = namedtuple('QuantLayer', ['weights', 'output_scale', 'relu'])
EvalResult = namedtuple('EvalResult', ['ideal', 'distorted', 'finetuned', 'seeds', 'sigma_c', 'parasitic_c'])


class QuantModel(namedtuple('_QuantModel', ['layers', 'input_scale'])):

    @property
    def arch(self) -> Tuple[int, ...]:
        return (self.layers[0].weights.shape[1],) + tuple(layer.weights.shape[0] for layer in self.layers)

    def quantize_inputs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.clip(np.rint(x / self.input_scale), -INT8_MAX, INT8_MAX).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            'schema_version': SCHEMA_VERSION,
            'arch': list(self.arch),
            'quantization': {'bits': 8, 'symmetric': True, 'input_scale': self.input_scale},
            'layers': [{
                'rows': int(layer.weights.shape[1]),
                'cols': int(layer.weights.shape[0]),
                'weights': int8_to_base64(layer.weights),
                'output_scale': layer.output_scale,
                'relu': layer.relu,
            } for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, document: dict) -> 'QuantModel':
        try:
            layers = [QuantLayer(base64_to_int8(layer['weights'], (layer['cols'], layer['rows'])),
                                 float(layer['output_scale']), bool(layer['relu'])) for layer in document['layers']]
            input_scale = float(document['quantization']['input_scale'])
        except (KeyError, TypeError, ValueError) as error:
            raise ValueRangeError('malformed model document: {}'.format(error))
        for previous, layer in zip(layers, layers[1:]):
            if layer.weights.shape[1] != previous.weights.shape[0]:
                raise ValueRangeError('layer widths do not chain: {} then {}'.format(
                    previous.weights.shape, layer.weights.shape))
        return cls(layers, input_scale)


def dumps_model(model: QuantModel) -> str:
    return dumps_json(model.to_dict())


def loads_model(text: str) -> QuantModel:
    try:
        document = json.loads(text)
    except ValueError as error:
        raise ValueRangeError('model file is not JSON: {}'.format(error))
    return QuantModel.from_dict(document)


def dumps_dataset(dataset: Dataset) -> str:
    n_features = dataset.x_train.shape[1]
    header = ['split'] + ['f{}'.format(i) for i in range(n_features)] + ['label']
    rows = []
    for split, xs, ys in (('train', dataset.x_train, dataset.y_train), ('test', dataset.x_test, dataset.y_test)):
        for x, y in zip(xs, ys):
            rows.append([split] + [repr(float(v)) for v in x] + [int(y)])
    return dumps_csv(header, rows)


def loads_dataset(text: str) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header or header[0] != 'split' or header[-1] != 'label':
        raise ValueRangeError('dataset CSV needs split, feature and label columns')
    parts = {'train': ([], []), 'test': ([], [])}
    for line_number, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise ValueRangeError('dataset line {}: expected {} fields, got {}'.format(line_number, len(header), len(row)))
        try:
            xs, ys = parts[row[0]]
            xs.append([float(v) for v in row[1:-1]])
            ys.append(int(row[-1]))
        except (KeyError, ValueError) as error:
            raise ValueRangeError('dataset line {}: {}'.format(line_number, error))
    width = len(header) - 2
    arrays = []
    for split in ('train', 'test'):
        xs, ys = parts[split]
        arrays.append(np.asarray(xs, dtype=float).reshape(-1, width))
        arrays.append(np.asarray(ys, dtype=np.int64))
    return Dataset(*arrays)


def dataset_digest(dataset: Dataset) -> str:
    return hashlib.sha256(dumps_dataset(dataset).encode('utf-8')).hexdigest()


def make_synthetic_task(seed: int, n_classes: int = ARCH[-1], n_features: int = ARCH[0], n_train: int = 600,
                        n_test: int = 200, separation: float = 3.0) -> Dataset:
    """Gaussian blobs with unit spread around random hypercube corners at +/-separation."""
    rng = np.random.default_rng(seed)
    centres = separation * rng.choice([-1.0, 1.0], size=(n_classes, n_features))

    def draw(count):
        labels = rng.integers(0, n_classes, size=count)
        return centres[labels] + rng.normal(0.0, 1.0, size=(count, n_features)), labels

    x_train, y_train = draw(n_train)
    x_test, y_test = draw(n_test)
    return Dataset(x_train, y_train, x_test, y_test)


def _train_float(dataset: Dataset, arch: Sequence[int], seed: int, epochs: int, learning_rate: float):
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_out, n_in)) for n_in, n_out in zip(arch, arch[1:])]
    x, y = dataset.x_train, dataset.y_train
    targets = np.eye(arch[-1])[y]
    for _ in range(epochs):
        activations = [x]
        for w in weights[:-1]:
            activations.append(np.maximum(activations[-1] @ w.T, 0.0))
        logits = activations[-1] @ weights[-1].T
        logits -= logits.max(axis=1, keepdims=True)
        probabilities = np.exp(logits)
        probabilities /= probabilities.sum(axis=1, keepdims=True)
        delta = (probabilities - targets) / x.shape[0]
        for index in range(len(weights) - 1, -1, -1):
            gradient = delta.T @ activations[index]
            if index:
                delta = (delta @ weights[index]) * (activations[index] > 0)
            weights[index] -= learning_rate * gradient
    return weights


def float_accuracy(weights, x, y) -> float:
    activations = np.asarray(x, dtype=float)
    for w in weights[:-1]:
        activations = np.maximum(activations @ w.T, 0.0)
    return float(np.mean(np.argmax(activations @ weights[-1].T, axis=1) == y))


def train_synthetic(dataset: Dataset, arch: Sequence[int] = ARCH, seed: int = 0, epochs: int = 300,
                    learning_rate: float = 0.01) -> QuantModel:
    """Gradient-descent MLP without biases, then symmetric 8b post-training quantization."""
    weights = _train_float(dataset, arch, seed, epochs, learning_rate)
    input_scale = float(np.max(np.abs(dataset.x_train))) / INT8_MAX
    layers = []
    scale = input_scale
    for index, w in enumerate(weights):
        weight_scale = float(np.max(np.abs(w))) / INT8_MAX
        quantized = np.clip(np.rint(w / weight_scale), -INT8_MAX, INT8_MAX).astype(np.int64)
        # real value of one output code: rows * 128 input-weight products
        scale = scale * weight_scale * w.shape[1] * 128
        layers.append(QuantLayer(quantized, scale, index < len(weights) - 1))
    model = QuantModel(layers, input_scale)
    logger.debug('trained %s, float test accuracy %.3f', arch, float_accuracy(weights, dataset.x_test, dataset.y_test))
    return model


def reference_codes(weights: np.ndarray, activations: Sequence[int], relu: bool) -> np.ndarray:
    """Per-neuron macro reference: round_half_away(dot / (rows * 128)), clamped to 8b, optional ReLU."""
    weights = np.asarray(weights, dtype=np.int64)
    dots = weights @ np.asarray(activations, dtype=np.int64)
    divisor = weights.shape[1] * 128
    magnitude = (2 * np.abs(dots) + divisor) // (2 * divisor)
    codes = np.clip(np.sign(dots) * magnitude, INT8_MIN, INT8_MAX)
    return np.maximum(codes, 0) if relu else codes


def _check_fits(model: QuantModel) -> None:
    for index, layer in enumerate(model.layers):
        if layer.weights.shape[1] > ChipFigures.ROWS:
            raise TilingUnsupported('layer {} has {} inputs; one macro holds {} rows'.format(
                index, layer.weights.shape[1], ChipFigures.ROWS))


def reference_layer_codes(model: QuantModel, x_q: Sequence[int]) -> List[np.ndarray]:
    outputs = []
    activations = np.asarray(x_q, dtype=np.int64)
    for layer in model.layers:
        activations = reference_codes(layer.weights, activations, layer.relu)
        outputs.append(activations)
    return outputs


def infer_reference(model: QuantModel, x_q: Sequence[int]) -> int:
    _check_fits(model)
    if len(x_q) != model.layers[0].weights.shape[1]:
        raise ValueRangeError('input width {} does not match layer 0 ({})'.format(
            len(x_q), model.layers[0].weights.shape[1]))
    return int(np.argmax(reference_layer_codes(model, x_q)[-1]))


def ideal_macros(model: QuantModel) -> List[MacroConfig]:
    return [MacroConfig.ideal(rows=layer.weights.shape[1]) for layer in model.layers]


def distorted_macros(model: QuantModel, sigma_c: float, seed: int,
                     parasitic_c: float = DISTORTION_PARASITIC_C) -> List[MacroConfig]:
    """One mismatched macro per layer, each drawn from its own child of seed."""
    children = np.random.SeedSequence(seed).generate_state(len(model.layers))
    return [MacroConfig.with_mismatch(sigma_c, int(child), rows=layer.weights.shape[1], parasitic=parasitic_c)
            for layer, child in zip(model.layers, children)]


def macro_layer_codes(model: QuantModel, x_q: Sequence[int], macros: Sequence[Macro],
                      params: Optional[Sequence[FineTuneParams]] = None) -> List[np.ndarray]:
    """Measured codes per layer; with params every layer output is corrected before it moves on."""
    outputs = []
    activations = np.asarray(x_q, dtype=np.int64)
    for index, (layer, macro) in enumerate(zip(model.layers, macros)):
        results = macro.mac_layer(activations, layer.weights, relu=layer.relu)
        codes = np.asarray([result.code for result in results], dtype=np.int64)
        outputs.append(codes)
        if params is not None and index < len(model.layers) - 1:
            activations = apply_requantize(params[index], codes, relu=layer.relu)
        else:
            activations = codes
    return outputs


def infer_on_macro(model: QuantModel, x_q: Sequence[int], macros: Sequence[Macro],
                   params: Optional[Sequence[FineTuneParams]] = None) -> int:
    _check_fits(model)
    logits = macro_layer_codes(model, x_q, macros, params)[-1]
    if params is not None:
        logits = apply(params[-1], logits)
    return int(np.argmax(logits))


def build_macros(configs: Sequence[MacroConfig]) -> List[Macro]:
    return [Macro(cfg) for cfg in configs]


def calibrate_model(model: QuantModel, x_calibration, macros: Sequence[Macro]) -> List[FineTuneParams]:
    """Per-layer correction, each layer fitted on inputs already corrected upstream."""
    if len(x_calibration) < MIN_CALIBRATION_SAMPLES:
        raise DegenerateCalibration('calibration needs at least {} samples, got {}'.format(
            MIN_CALIBRATION_SAMPLES, len(x_calibration)))
    references = [reference_layer_codes(model, x_q) for x_q in x_calibration]
    params = []
    for depth in range(len(model.layers)):
        ideal = np.concatenate([codes[depth] for codes in references])
        measured = np.concatenate([_measured_with(model, x_q, macros, params, depth) for x_q in x_calibration])
        params.append(calibrate(ideal, measured))
    return params


def _measured_with(model: QuantModel, x_q, macros: Sequence[Macro], params: Sequence[FineTuneParams],
                   depth: int) -> np.ndarray:
    activations = np.asarray(x_q, dtype=np.int64)
    for index in range(depth + 1):
        layer = model.layers[index]
        results = macros[index].mac_layer(activations, layer.weights, relu=layer.relu)
        codes = np.asarray([result.code for result in results], dtype=np.int64)
        if index == depth:
            return codes
        activations = apply_requantize(params[index], codes, relu=layer.relu)


def accuracy(model: QuantModel, x, y, macros: Optional[Sequence[Macro]] = None,
             params: Optional[Sequence[FineTuneParams]] = None) -> float:
    x_q = model.quantize_inputs(x)
    if macros is None:
        predictions = [infer_reference(model, sample) for sample in x_q]
    else:
        predictions = [infer_on_macro(model, sample, macros, params) for sample in x_q]
    return float(np.mean(np.asarray(predictions) == np.asarray(y))) if len(y) else 0.0


def make_model_and_task(seed: int = 0, max_attempts: int = 10) -> Tuple[Dataset, QuantModel, int]:
    """Synthetic task and its quantized model, moving to the next seed until the ideal accuracy is reached."""
    for attempt in range(max_attempts):
        task_seed = seed + attempt
        dataset = make_synthetic_task(task_seed)
        model = train_synthetic(dataset, seed=task_seed)
        ideal = accuracy(model, dataset.x_test, dataset.y_test)
        if ideal >= MIN_IDEAL_ACCURACY:
            logger.info('task seed %d: ideal quantized accuracy %.3f', task_seed, ideal)
            return dataset, model, task_seed
        logger.info('task seed %d reaches only %.3f, regenerating', task_seed, ideal)
    raise ValueRangeError('no task seed in [{}, {}) reaches {} ideal accuracy'.format(
        seed, seed + max_attempts, MIN_IDEAL_ACCURACY))


def _evaluate_seed(job) -> Tuple[float, float]:
    model, dataset, sigma_c, parasitic_c, seed, n_calibration = job
    macros = build_macros(distorted_macros(model, sigma_c, seed, parasitic_c))
    distorted = accuracy(model, dataset.x_test, dataset.y_test, macros)
    x_calibration = model.quantize_inputs(dataset.x_train[:n_calibration])
    params = calibrate_model(model, x_calibration, macros)
    finetuned = accuracy(model, dataset.x_test, dataset.y_test, macros, params)
    logger.info('seed %d: distorted %.3f, fine-tuned %.3f', seed, distorted, finetuned)
    return distorted, finetuned


def evaluate(model: QuantModel, dataset: Dataset, seeds: Sequence[int], sigma_c: float,
             parasitic_c: float = DISTORTION_PARASITIC_C, n_calibration: int = 64, workers: int = 1) -> EvalResult:
    """Ideal accuracy once, distorted and fine-tuned accuracy per mismatch seed."""
    ideal = accuracy(model, dataset.x_test, dataset.y_test)
    jobs = [(model, dataset, sigma_c, parasitic_c, seed, n_calibration) for seed in seeds]
    per_seed = run_ordered(_evaluate_seed, jobs, workers)
    return EvalResult(ideal, [d for d, _ in per_seed], [f for _, f in per_seed], list(seeds), sigma_c, parasitic_c)


def summarize(result: EvalResult) -> dict:
    wins = sum(1 for d, f in zip(result.distorted, result.finetuned) if f >= d)
    median_distorted = statistics.median(result.distorted) if result.distorted else None
    median_finetuned = statistics.median(result.finetuned) if result.finetuned else None
    return {
        'schema_version': SCHEMA_VERSION,
        'sigma_c': result.sigma_c,
        'parasitic_c': result.parasitic_c,
        'seeds': list(result.seeds),
        'accuracy': {'ideal': result.ideal, 'distorted': list(result.distorted),
                     'finetuned': list(result.finetuned)},
        'median': {'distorted': median_distorted, 'finetuned': median_finetuned},
        'effect_size': (median_finetuned - median_distorted) if result.distorted else None,
        'finetuned_not_worse': wins,
    }
