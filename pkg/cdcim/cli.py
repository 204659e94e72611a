"""Command-line experiment runner.

Every command takes an optional JSON config (flat, or keyed by command
name) and flag overrides. Results go to files or stdout; logs go to stderr.
Exit codes: 0 success, 1 experiment failure, 2 usage or input error.
"""
import argparse
import json
import logging
import os
import sys
from typing import Callable, Dict, List, Optional

from cdcim import __version__
from cdcim.adc import AdcConfig, build_sar_dac, find_inl_seed, inl_csv, measure_inl, msb_epsilon_for_inl, \
    with_msb_mismatch
from cdcim.capnet import inject_mismatch, montecarlo_leaf, sweep_sigma_for_yield
from cdcim.config import ExperimentConfig, load_config
from cdcim.costmodel import CostParams, comparative_report, operating_point_rows, operating_points_csv, report_csv
from cdcim.exceptions import CapacityError, TilingUnsupported
from cdcim.finetune import dumps_params
from cdcim.macro import Macro, MacroConfig, reference_mac_relu
from cdcim.nn import accuracy, build_macros, calibrate_model, dataset_digest, distorted_macros, evaluate, \
    loads_dataset, loads_model, make_model_and_task, summarize
from cdcim.utils import dumps_csv, dumps_json, parse_int8_csv

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
LOG_FORMAT = '%(asctime)s - %(funcName)s +%(lineno)s - %(levelname)s - %(message)s'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# ValueError covers the range, length, encoding, config and cost parameter errors
INPUT_ERRORS = (OSError, ValueError, CapacityError, TilingUnsupported)


class ExperimentFailed(Exception):
    pass


def _read(path: str) -> str:
    with open(path, encoding='utf-8') as handle:
        return handle.read()


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(text)
    logger.info('wrote %s', path)


def _summary(document: Dict, path: Optional[str] = None) -> None:
    _emit(dumps_json(dict(document, schema_version=SCHEMA_VERSION)), path)


def _load_task(cfg: ExperimentConfig):
    if (cfg['model'] is None) != (cfg['data'] is None):
        raise ValueError('give both a model and a dataset, or neither')
    if cfg['model'] is None:
        dataset, model, task_seed = make_model_and_task(cfg['task_seed'])
        return dataset, model, {'task_seed': task_seed}
    model = loads_model(_read(cfg['model']))
    dataset = loads_dataset(_read(cfg['data']))
    return dataset, model, {'model': cfg['model'], 'data': cfg['data']}


def cmd_mac(cfg: ExperimentConfig) -> None:
    if cfg['activations'] is None or cfg['weights'] is None:
        raise ValueError('mac needs an activation file and a weight file')
    A = parse_int8_csv(_read(cfg['activations']), cfg['activations'])
    W = parse_int8_csv(_read(cfg['weights']), cfg['weights'])
    if cfg['sigma_c'] > 0 or cfg['parasitic_c'] > 0:
        macro_cfg = MacroConfig.with_mismatch(cfg['sigma_c'], cfg['seed'], rows=cfg['rows'],
                                              parasitic=cfg['parasitic_c'])
    else:
        macro_cfg = MacroConfig.ideal(rows=cfg['rows'])
    nominal = cfg['sigma_c'] == 0 and cfg['parasitic_c'] == 0
    macro = Macro(macro_cfg)
    macro.load_weights(W)
    result = macro.mac_relu(A)
    reference = reference_mac_relu(A, W, cfg['rows'])
    _summary({
        'code': result.code,
        'comparisons': result.comparisons,
        'early_stop': result.early_stopped,
        'reference': reference,
        'match': result.code == reference,
        'ideal': nominal,
    }, cfg.output_path())
    if nominal and result.code != reference:
        raise ExperimentFailed('ideal macro returned {} against reference {}'.format(result.code, reference))


def cmd_montecarlo(cfg: ExperimentConfig) -> None:
    samples = montecarlo_leaf(cfg['sigma_c'], cfg['n_samples'], cfg['seed'], target_bits=cfg['target_bits'])
    rows = [(s.sample, '{:.6f}'.format(s.max_abs_inl), '{:.6f}'.format(s.effective_bits)) for s in samples]
    path = cfg.output_path()
    _emit(dumps_csv(['sample', 'max_abs_inl', 'effective_bits'], rows), path)
    if path is not None:
        passing = sum(1 for s in samples if s.effective_bits >= cfg['min_bits'])
        _summary({
            'sigma_c': cfg['sigma_c'],
            'n_samples': cfg['n_samples'],
            'seed': cfg['seed'],
            'min_bits': cfg['min_bits'],
            'yield': passing / len(samples),
            'output': path,
        })


def cmd_sweep(cfg: ExperimentConfig) -> None:
    sigma_c = sweep_sigma_for_yield(cfg['target'], cfg['n_samples'], cfg['seed'], low=cfg['low'], high=cfg['high'],
                                    iterations=cfg['iterations'])
    document = {'schema_version': SCHEMA_VERSION, 'target': cfg['target'], 'n_samples': cfg['n_samples'],
                'seed': cfg['seed'], 'sigma_c': sigma_c}
    _emit(dumps_json(document), cfg.output_path())


def _inl_adc(cfg: ExperimentConfig):
    if cfg['epsilon'] is not None:
        return with_msb_mismatch(cfg['epsilon']), {'source': 'msb_fixture', 'epsilon': cfg['epsilon']}
    if cfg['sigma_c'] > 0:
        if cfg['seed'] is not None:
            adc = AdcConfig(dac=inject_mismatch(build_sar_dac(), cfg['sigma_c'], cfg['seed']))
            return adc, {'source': 'seed', 'seed': cfg['seed'], 'sigma_c': cfg['sigma_c']}
        seed, adc, _ = find_inl_seed(cfg['target_inl'], cfg['sigma_c'], points_per_lsb=cfg['points_per_lsb'])
        return adc, {'source': 'seed_search', 'seed': seed, 'sigma_c': cfg['sigma_c']}
    epsilon = msb_epsilon_for_inl(cfg['target_inl'])
    return with_msb_mismatch(epsilon), {'source': 'msb_fixture', 'epsilon': epsilon}


def cmd_inl(cfg: ExperimentConfig) -> None:
    adc, origin = _inl_adc(cfg)
    profile = measure_inl(adc, cfg['points_per_lsb'])
    path = cfg.output_path()
    _emit(inl_csv(profile, adc), path)
    if path is not None:
        _summary(dict(origin, max_abs_inl=profile.max_abs_inl, effective_bits=profile.effective_bits,
                      monotone=profile.monotone, output=path))


def cmd_cost(cfg: ExperimentConfig) -> None:
    report = comparative_report(CostParams.from_dict(cfg['params']))
    if cfg['format'] == 'csv':
        text = report_csv(report)
    else:
        text = dumps_json(dict(report._asdict(), schema_version=SCHEMA_VERSION))
    _emit(text, cfg.output_path())


def cmd_table1(cfg: ExperimentConfig) -> None:
    table = operating_point_rows(cfg['rows'], cfg['cycles_per_op'])
    if cfg['format'] == 'json':
        text = dumps_json({'schema_version': SCHEMA_VERSION, 'rows': table})
    else:
        text = operating_points_csv(table)
    _emit(text, cfg.output_path())


def cmd_calibrate(cfg: ExperimentConfig) -> None:
    dataset, model, origin = _load_task(cfg)
    macros = build_macros(distorted_macros(model, cfg['sigma_c'], cfg['seed'], cfg['parasitic_c']))
    x_calibration = model.quantize_inputs(dataset.x_train[:cfg['n_calibration']])
    params = calibrate_model(model, x_calibration, macros)
    path = cfg.output_path()
    _emit(dumps_params(params), path)
    if path is not None:
        _summary(dict(origin, seed=cfg['seed'], sigma_c=cfg['sigma_c'], layers=len(params), output=path))


def cmd_nn(cfg: ExperimentConfig) -> None:
    dataset, model, origin = _load_task(cfg)
    modes = cfg['modes']
    if set(modes) == {'ideal'}:
        document = {'schema_version': SCHEMA_VERSION,
                    'accuracy': {'ideal': accuracy(model, dataset.x_test, dataset.y_test)}}
    else:
        result = evaluate(model, dataset, cfg['seeds'], cfg['sigma_c'], cfg['parasitic_c'], cfg['n_calibration'],
                          cfg['workers'])
        document = summarize(result)
        document['accuracy'] = {mode: document['accuracy'][mode] for mode in modes}
    document.update(origin, dataset_sha256=dataset_digest(dataset), modes=list(modes))
    _emit(dumps_json(document), cfg.output_path())


COMMANDS = {
    'mac': cmd_mac,
    'montecarlo': cmd_montecarlo,
    'sweep': cmd_sweep,
    'inl': cmd_inl,
    'cost': cmd_cost,
    'table1': cmd_table1,
    'calibrate': cmd_calibrate,
    'nn': cmd_nn,
}  # type: Dict[str, Callable[[ExperimentConfig], None]]


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('expected comma separated integers, got {!r}'.format(text))


def _str_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(',') if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='cdcim', description='Charge-domain CiM macro simulator.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-v', '--verbose', action='count', default=0, help='-v for INFO, -vv for DEBUG')
    common.add_argument('-c', '--config', help='JSON config file')
    common.add_argument('-o', '--output', help="output path, '-' for stdout")
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    mac = commands.add_parser('mac', parents=[common], help='one MAC with ReLU against the integer reference')
    mac.add_argument('activations', nargs='?', help='int8 CSV activation vector')
    mac.add_argument('weights', nargs='?', help='int8 CSV weight vector')
    mac.add_argument('--rows', type=int)
    mac.add_argument('--sigma-c', type=float)
    mac.add_argument('--parasitic-c', type=float)
    mac.add_argument('--seed', type=int)

    montecarlo = commands.add_parser('montecarlo', parents=[common], help='leaf INL Monte Carlo to CSV')
    montecarlo.add_argument('--sigma-c', type=float)
    montecarlo.add_argument('--n-samples', type=int)
    montecarlo.add_argument('--seed', type=int)
    montecarlo.add_argument('--target-bits', type=int)
    montecarlo.add_argument('--min-bits', type=int)

    sweep = commands.add_parser('sweep', parents=[common], help='largest sigma_c meeting a yield target')
    sweep.add_argument('--target', type=float)
    sweep.add_argument('--n-samples', type=int)
    sweep.add_argument('--seed', type=int)
    sweep.add_argument('--low', type=float)
    sweep.add_argument('--high', type=float)
    sweep.add_argument('--iterations', type=int)

    inl = commands.add_parser('inl', parents=[common], help='SAR ADC INL profile to CSV')
    inl.add_argument('--target-inl', type=float)
    inl.add_argument('--msb-epsilon', dest='epsilon', type=float)
    inl.add_argument('--sigma-c', type=float)
    inl.add_argument('--seed', type=int)
    inl.add_argument('--points-per-lsb', type=int)

    cost = commands.add_parser('cost', parents=[common], help='comparative cost report')
    cost.add_argument('params_file', nargs='?', help='JSON cost parameters')
    cost.add_argument('--format', choices=('json', 'csv'))

    table1 = commands.add_parser('table1', parents=[common], help='throughput and efficiency per operating point')
    table1.add_argument('--rows', type=int)
    table1.add_argument('--cycles-per-op', type=int)
    table1.add_argument('--format', choices=('json', 'csv'))

    for name, help_text in (('calibrate', 'fit per-layer fine-tune parameters on a distorted macro'),
                            ('nn', 'ideal, distorted and fine-tuned accuracy across mismatch seeds')):
        sub = commands.add_parser(name, parents=[common], help=help_text)
        sub.add_argument('--model', help='quantized model JSON')
        sub.add_argument('--data', help='dataset CSV')
        sub.add_argument('--task-seed', type=int, help='synthetic task seed when no model is given')
        sub.add_argument('--sigma-c', type=float)
        sub.add_argument('--parasitic-c', type=float)
        sub.add_argument('--n-calibration', type=int)
    commands.choices['calibrate'].add_argument('--seed', type=int)
    commands.choices['nn'].add_argument('--modes', type=_str_list, help='comma separated: ideal,distorted,finetuned')
    commands.choices['nn'].add_argument('--seeds', type=_int_list, help='comma separated mismatch seeds')
    commands.choices['nn'].add_argument('--workers', type=int)
    return parser


def _overrides(args: argparse.Namespace) -> Dict:
    overrides = dict(vars(args))
    for name in ('command', 'verbose', 'config', 'params_file'):
        overrides.pop(name, None)
    return overrides


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(format=LOG_FORMAT, level=level, stream=sys.stderr)


def run(args: argparse.Namespace) -> int:
    try:
        text = _read(args.config) if args.config else None
        overrides = _overrides(args)
        if args.command == 'cost' and args.params_file:
            try:
                overrides['params'] = json.loads(_read(args.params_file))
            except ValueError as error:
                raise ValueError('{} is not valid JSON: {}'.format(args.params_file, error))
        cfg = load_config(args.command, text, overrides)
        COMMANDS[args.command](cfg)
    except INPUT_ERRORS as error:
        logger.error('%s: %s', type(error).__name__, error)
        return EXIT_USAGE
    except Exception as error:
        logger.error('%s: %s', type(error).__name__, error)
        return EXIT_FAILURE
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    return run(args)


if __name__ == '__main__':
    sys.exit(main())
