"""Analytical throughput, energy and area model of the macro and the parallel-activation-input baseline.

Absolute energies are parameters; the comparisons are ratios of component
breakdowns, so only fractions and conversion counts matter for them.
"""
import logging
import math
from collections import namedtuple
from typing import Dict, List

from cdcim.capnet import build_binary_baseline, build_caat_leaf
from cdcim.exceptions import CostParamsError
from cdcim.models import ChipFigures, LeafConfig
from cdcim.utils import dumps_csv

logger = logging.getLogger(__name__)

CYCLES_PER_OP = 45
ADC_BITS = 8


class Breakdown(namedtuple('_Breakdown', ['array', 'caat', 'adc', 'digital'])):
    """Component shares of a total, each in [0, 1] and summing to 1."""

    def __new__(cls, array: float, caat: float, adc: float, digital: float):
        self = super().__new__(cls, float(array), float(caat), float(adc), float(digital))
        for name, share in self._asdict().items():
            if not 0 <= share <= 1:
                raise CostParamsError('{} share {} is outside [0, 1]'.format(name, share))
        if not math.isclose(sum(self), 1.0, abs_tol=1e-9):
            raise CostParamsError('breakdown shares sum to {}, not 1'.format(sum(self)))
        return self


ENERGY_BREAKDOWN = Breakdown(0.55, 0.22, ChipFigures.ADC_ENERGY_FRACTION, 0.15)
AREA_BREAKDOWN = Breakdown(0.80, 0.02, ChipFigures.ADC_AREA_FRACTION, 0.15)


class CostParams(namedtuple('_CostParams', [
        'rows', 'clock_hz', 'adc_clock_hz', 'cycles_per_op', 'energy_per_op_pj', 'energy', 'area',
        'adc_conversions_per_mac', 'baseline_conversions_per_mac', 'neg_output_prob',
        'capacitance_proposed_c', 'capacitance_baseline_c', 'baseline_adc_area_units'])):

    def __new__(cls, rows: int = ChipFigures.ROWS, clock_hz: float = 1e9, adc_clock_hz: float = 5e8,
                cycles_per_op: float = CYCLES_PER_OP, energy_per_op_pj: float = 1 / ChipFigures.TOPS_W_1GHZ,
                energy: Breakdown = ENERGY_BREAKDOWN, area: Breakdown = AREA_BREAKDOWN,
                adc_conversions_per_mac: int = 1, baseline_conversions_per_mac: int = ADC_BITS,
                neg_output_prob: float = 0.5, capacitance_proposed_c: float = None,
                capacitance_baseline_c: float = None, baseline_adc_area_units: float = 1):
        if capacitance_proposed_c is None:
            capacitance_proposed_c = float(build_caat_leaf(LeafConfig.HYBRID).total_capacitance())
        if capacitance_baseline_c is None:
            capacitance_baseline_c = float(build_binary_baseline(ADC_BITS).total_capacitance())
        self = super().__new__(cls, rows, clock_hz, adc_clock_hz, cycles_per_op, energy_per_op_pj,
                               Breakdown(*energy), Breakdown(*area), adc_conversions_per_mac,
                               baseline_conversions_per_mac, neg_output_prob, capacitance_proposed_c,
                               capacitance_baseline_c, baseline_adc_area_units)
        self.validate()
        return self

    def validate(self) -> None:
        positive = ('rows', 'clock_hz', 'adc_clock_hz', 'energy_per_op_pj', 'adc_conversions_per_mac',
                    'baseline_conversions_per_mac', 'capacitance_proposed_c', 'capacitance_baseline_c',
                    'baseline_adc_area_units')
        for name in positive:
            if not getattr(self, name) > 0:
                raise CostParamsError('{} must be positive, got {}'.format(name, getattr(self, name)))
        if not self.cycles_per_op >= 1:
            raise CostParamsError('cycles_per_op must be at least 1, got {}'.format(self.cycles_per_op))
        if not 0 <= self.neg_output_prob <= 1:
            raise CostParamsError('neg_output_prob must lie in [0, 1], got {}'.format(self.neg_output_prob))

    @classmethod
    def from_dict(cls, document: dict) -> 'CostParams':
        unknown = set(document) - set(cls._fields)
        if unknown:
            raise CostParamsError('unknown cost parameters: {}'.format(', '.join(sorted(unknown))))
        values = dict(document)
        for name in ('energy', 'area'):
            if name in values:
                share = values[name]
                try:
                    values[name] = Breakdown(**share) if isinstance(share, dict) else Breakdown(*share)
                except TypeError as error:
                    raise CostParamsError('malformed {} breakdown: {}'.format(name, error))
        return cls(**values)


CostReport = namedtuple('CostReport', [
    'gops', 'tops_per_watt', 'adc_energy_ratio_vs_baseline', 'relu_energy_factor', 'macro_efficiency_ratio',
    'area_ratio', 'capacitance_proposed_c', 'capacitance_baseline_c', 'capacitance_ratio',
    'adc_area_fraction', 'adc_energy_fraction', 'adc_cycles_per_conversion', 'reported_capacitance_ratio',
    'reported_macro_efficiency_ratio', 'reported_area_ratio', 'reported_adc_energy_ratio'])


def throughput_gops(rows: int, clock_hz: float, cycles_per_op: float) -> float:
    """One 8b MAC is two operations; a full-array MAC takes cycles_per_op clocks."""
    if rows <= 0 or clock_hz <= 0 or cycles_per_op <= 0:
        raise CostParamsError('rows, clock and cycles must be positive')
    return 2 * rows * clock_hz / cycles_per_op / 1e9


def tops_per_watt(energy_per_op_pj: float) -> float:
    if not energy_per_op_pj > 0:
        raise CostParamsError('energy per operation must be positive, got {}'.format(energy_per_op_pj))
    return 1 / energy_per_op_pj


def adc_energy_ratio(params: CostParams = None) -> float:
    params = params or CostParams()
    return params.adc_conversions_per_mac / params.baseline_conversions_per_mac


def relu_energy_factor(neg_output_prob: float, bits: int = ADC_BITS) -> float:
    """Expected fraction of SAR bit cycles executed with early stop on negative results."""
    if not 0 <= neg_output_prob <= 1:
        raise CostParamsError('neg_output_prob must lie in [0, 1], got {}'.format(neg_output_prob))
    return (neg_output_prob * 1 + (1 - neg_output_prob) * bits) / bits


def adc_cycles_per_conversion(params: CostParams, bits: int = ADC_BITS) -> float:
    """System clock cycles spent on one full conversion when the ADC runs on its own clock."""
    return bits * params.clock_hz / params.adc_clock_hz


def macro_efficiency_ratio(params: CostParams) -> float:
    """Baseline energy over proposed energy per MAC, the baseline paying more conversions."""
    energy = params.energy
    baseline = energy.array + energy.caat + energy.digital + energy.adc / adc_energy_ratio(params)
    return baseline / sum(energy)


def area_ratio(params: CostParams) -> float:
    """Baseline area over proposed area; the summation network scales with its capacitance."""
    area = params.area
    baseline = (area.array + area.digital
                + area.caat * params.capacitance_baseline_c / params.capacitance_proposed_c
                + area.adc * params.baseline_adc_area_units)
    return baseline / sum(area)


def comparative_report(params: CostParams = None) -> CostReport:
    params = params or CostParams()
    report = CostReport(
        gops=throughput_gops(params.rows, params.clock_hz, params.cycles_per_op),
        tops_per_watt=tops_per_watt(params.energy_per_op_pj),
        adc_energy_ratio_vs_baseline=adc_energy_ratio(params),
        relu_energy_factor=relu_energy_factor(params.neg_output_prob),
        macro_efficiency_ratio=macro_efficiency_ratio(params),
        area_ratio=area_ratio(params),
        capacitance_proposed_c=params.capacitance_proposed_c,
        capacitance_baseline_c=params.capacitance_baseline_c,
        capacitance_ratio=params.capacitance_baseline_c / params.capacitance_proposed_c,
        adc_area_fraction=params.area.adc,
        adc_energy_fraction=params.energy.adc,
        adc_cycles_per_conversion=adc_cycles_per_conversion(params),
        reported_capacitance_ratio=ChipFigures.CAPACITANCE_REDUCTION,
        reported_macro_efficiency_ratio=ChipFigures.MACRO_EFFICIENCY_RATIO,
        reported_area_ratio=ChipFigures.AREA_RATIO,
        reported_adc_energy_ratio=ChipFigures.ADC_ENERGY_RATIO,
    )
    logger.debug('cost report: %s', report)
    return report


def report_csv(report: CostReport) -> str:
    return dumps_csv(['metric', 'value'], [(name, repr(float(value))) for name, value in report._asdict().items()])


OperatingPoint = namedtuple('OperatingPoint', ['label', 'clock_hz', 'energy_per_op_pj', 'reported_gops',
                                                'reported_tops_per_watt'])

OPERATING_POINTS = (
    OperatingPoint('1GHz', 1e9, 1 / ChipFigures.TOPS_W_1GHZ, ChipFigures.GOPS_1GHZ, ChipFigures.TOPS_W_1GHZ),
    OperatingPoint('700MHz', 7e8, 1 / ChipFigures.TOPS_W_700MHZ, ChipFigures.GOPS_700MHZ,
                   ChipFigures.TOPS_W_700MHZ),
    OperatingPoint('240MHz', 2.4e8, 1 / ChipFigures.TOPS_W_240MHZ, None, ChipFigures.TOPS_W_240MHZ),
)


def operating_point_rows(rows: int = ChipFigures.ROWS, cycles_per_op: float = CYCLES_PER_OP) -> List[Dict]:
    """Throughput and efficiency per operating point, model next to the reported figure."""
    table = []
    for condition in OPERATING_POINTS:
        table.append({
            'condition': condition.label,
            'clock_hz': condition.clock_hz,
            'gops': throughput_gops(rows, condition.clock_hz, cycles_per_op),
            'reported_gops': condition.reported_gops,
            'energy_per_op_pj': condition.energy_per_op_pj,
            'tops_per_watt': tops_per_watt(condition.energy_per_op_pj),
            'reported_tops_per_watt': condition.reported_tops_per_watt,
        })
    return table


def operating_points_csv(table: List[Dict]) -> str:
    header = ['condition', 'clock_hz', 'gops', 'reported_gops', 'energy_per_op_pj', 'tops_per_watt',
              'reported_tops_per_watt']

    def cell(value):
        if value is None:
            return ''
        return value if isinstance(value, str) else '{:.6g}'.format(value)

    return dumps_csv(header, [[cell(row[name]) for name in header] for row in table])
