"""Successive-approximation ADC driven by a capacitive DAC, with ReLU early stop."""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from cdcim.capnet import OUTPUT, CapNetwork, NetworkBuilder, inject_mismatch, inl_profile
from cdcim.exceptions import AdcInputError, InlError, NetworkConstructionError
from cdcim.models import AdcResult, InlProfile, NodeRole, Switch
from cdcim.utils import dumps_csv

logger = logging.getLogger(__name__)

DEFAULT_POINTS_PER_LSB = 64


def build_sar_dac(bits: int = 8, unit_c=1) -> CapNetwork:
    """Binary-weighted charge-redistribution DAC.

    Port i drives a 2**i unit capacitor onto the output; a 1 unit termination
    capacitor is held at 0, so the ideal port weights are 2**i / 2**bits.
    """
    if bits < 1:
        raise NetworkConstructionError('a DAC needs at least one bit')
    builder = NetworkBuilder(unit_c)
    builder.node(OUTPUT, NodeRole.FLOATING)
    ports = [[builder.scl('d{}'.format(i), 2 ** i, OUTPUT, Switch.S2)] for i in range(bits)]
    builder.scl('term', 1, OUTPUT, Switch.S2)
    return CapNetwork(builder.nodes, builder.capacitors, builder.switches, ports, OUTPUT, Switch.S2, 'sar-dac')


@dataclass(frozen=True, eq=False)
class AdcConfig:
    bits: int = 8
    full_scale: float = 1.0
    dac: Optional[CapNetwork] = None
    relu_mode: bool = False

    def __post_init__(self):
        if self.bits < 1:
            raise NetworkConstructionError('ADC needs at least one bit, got {}'.format(self.bits))
        if not self.full_scale > 0:
            raise NetworkConstructionError('full scale must be positive, got {}'.format(self.full_scale))
        if self.dac is None:
            object.__setattr__(self, 'dac', build_sar_dac(self.bits))
        elif len(self.dac.ports) != self.bits:
            raise NetworkConstructionError('{}-bit ADC needs a {}-port DAC, got {}'.format(
                self.bits, self.bits, len(self.dac.ports)))

    @property
    def mid_code(self) -> int:
        return 1 << (self.bits - 1)

    @property
    def code_range(self) -> Tuple[int, int]:
        return -self.mid_code, self.mid_code - 1

    @cached_property
    def threshold_table(self) -> tuple:
        return tuple(thresholds(self))

    @cached_property
    def threshold_array(self) -> np.ndarray:
        return np.asarray([float(t) for t in self.threshold_table])

    def with_relu(self, relu_mode: bool = True) -> 'AdcConfig':
        if relu_mode == self.relu_mode:
            return self
        other = AdcConfig(self.bits, self.full_scale, self.dac, relu_mode)
        for name in ('threshold_table', 'threshold_array'):
            if name in self.__dict__:
                other.__dict__[name] = self.__dict__[name]
        return other


def thresholds(cfg: AdcConfig) -> List:
    """Comparator threshold for every offset-binary trial code u, normalized to full scale.

    T(u) = 2 * V_dac(u) - 1 - 2**-bits, which is (u - mid - 1/2) / mid for an
    ideal DAC. Exact Fractions for a mismatch-free DAC, floats otherwise.
    """
    weights = cfg.dac.weights()
    exact = isinstance(weights, tuple)
    offset = 1 + Fraction(1, 1 << cfg.bits)
    if not exact:
        offset = float(offset)
    table = []
    for u in range(1 << cfg.bits):
        level = sum((w for i, w in enumerate(weights) if (u >> i) & 1), Fraction(0) if exact else 0.0)
        table.append(2 * level - offset)
    return table


def _normalize(v, cfg: AdcConfig):
    if isinstance(v, Fraction):
        return v / Fraction(cfg.full_scale)
    v = float(v)
    if not math.isfinite(v):
        raise AdcInputError('cannot convert non-finite input {}'.format(v))
    return v / cfg.full_scale


def _passes(v, trial: int, cfg: AdcConfig) -> bool:
    threshold = cfg.threshold_table[trial]
    if isinstance(threshold, Fraction) and not isinstance(v, Fraction):
        v = Fraction(v)
    # ties resolve away from zero
    return v > threshold if trial <= cfg.mid_code else v >= threshold


def _sar(v, cfg: AdcConfig, start: int, first_bit: int) -> Tuple[int, int]:
    u, comparisons = start, 0
    for bit in range(first_bit, -1, -1):
        trial = u | (1 << bit)
        comparisons += 1
        if _passes(v, trial, cfg):
            u = trial
    return u, comparisons


def convert(v, cfg: AdcConfig) -> AdcResult:
    """Full conversion to a signed code; inputs beyond full scale saturate."""
    v = _normalize(v, cfg)
    u, comparisons = _sar(v, cfg, 0, cfg.bits - 1)
    return AdcResult(u - cfg.mid_code, comparisons, False)


def convert_relu(v, cfg: AdcConfig) -> AdcResult:
    """Conversion preceded by a sign decision at 0.

    Negative inputs stop after that single comparison with code 0; inputs at
    or above 0 run the full conversion and are clipped at 0.
    """
    v = _normalize(v, cfg)
    if v < 0:
        return AdcResult(0, 1, True)
    u, comparisons = _sar(v, cfg, 0, cfg.bits - 1)
    return AdcResult(max(0, u - cfg.mid_code), comparisons, False)


def convert_any(v, cfg: AdcConfig) -> AdcResult:
    return convert_relu(v, cfg) if cfg.relu_mode else convert(v, cfg)


def convert_many(values, cfg: AdcConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized conversion: (codes, comparisons) arrays, honoring cfg.relu_mode."""
    v = np.asarray(values, dtype=float).reshape(-1) / cfg.full_scale
    if not np.all(np.isfinite(v)):
        raise AdcInputError('cannot convert non-finite inputs')
    table = cfg.threshold_array
    mid = cfg.mid_code
    u = np.zeros(v.shape, dtype=np.int64)
    for bit in range(cfg.bits - 1, -1, -1):
        trial = u | (1 << bit)
        limit = table[trial]
        passed = np.where(trial <= mid, v > limit, v >= limit)
        u = np.where(passed, trial, u)
    codes = u - mid
    comparisons = np.full(v.shape, cfg.bits, dtype=np.int64)
    if cfg.relu_mode:
        negative = v < 0
        codes = np.where(negative, 0, np.maximum(codes, 0))
        comparisons[negative] = 1
    return codes, comparisons


def ramp(cfg: AdcConfig, points_per_lsb: int = DEFAULT_POINTS_PER_LSB) -> Tuple[np.ndarray, np.ndarray]:
    """Ramp grid indices and voltages spanning one LSB beyond each end of the range.

    Points sit half a grid step off the ideal thresholds.
    """
    mid = cfg.mid_code
    span = (mid + 1) * points_per_lsb
    index = np.arange(-span, span)
    voltages = (index + 0.5) / (mid * points_per_lsb) * cfg.full_scale
    return index, voltages


def code_edges(cfg: AdcConfig, points_per_lsb: int = DEFAULT_POINTS_PER_LSB) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Transition points for codes low+1..high: (grid indices, voltages, monotone)."""
    if cfg.relu_mode:
        raise InlError('INL needs the full transfer; measure with relu_mode off')
    index, voltages = ramp(cfg, points_per_lsb)
    codes, _ = convert_many(voltages, cfg)
    monotone = bool(np.all(np.diff(codes) >= 0))
    low, high = cfg.code_range
    edges = []
    for code in range(low + 1, high + 1):
        reached = np.nonzero(codes >= code)[0]
        edges.append(reached[0] if reached.size else index.size - 1)
    edges = np.asarray(edges)
    return index[edges], voltages[edges], monotone


def measure_inl(cfg: AdcConfig, points_per_lsb: int = DEFAULT_POINTS_PER_LSB) -> InlProfile:
    if points_per_lsb < 16:
        raise InlError('INL ramp needs at least 16 points per LSB, got {}'.format(points_per_lsb))
    edge_index, _, monotone = code_edges(cfg, points_per_lsb)
    profile = inl_profile(edge_index, cfg.bits)
    if not monotone:
        logger.warning('ADC transfer is not monotone')
    return profile._replace(monotone=monotone and profile.monotone)


def inl_csv(profile: InlProfile, cfg: AdcConfig) -> str:
    low, _ = cfg.code_range
    rows = [(low + 1 + k, '{:.6f}'.format(value)) for k, value in enumerate(profile.inl)]
    return dumps_csv(['code', 'inl_lsb'], rows)


def with_msb_mismatch(epsilon: float, bits: int = 8) -> AdcConfig:
    """ADC whose MSB DAC capacitor is off by epsilon; peak INL sits at the mid code.

    Peak INL = (2**(bits-2) * eps) * (2**bits - 2) / (2**bits - 2 + 2**(bits-1) * eps).
    """
    dac = build_sar_dac(bits)
    epsilons = [epsilon if cap.id == 'c_d{}'.format(bits - 1) else 0.0 for cap in dac.capacitors]
    return AdcConfig(bits, dac=dac.with_epsilons(epsilons))


def msb_epsilon_for_inl(target_inl: float, bits: int = 8) -> float:
    """Inverse of the peak-INL formula of with_msb_mismatch."""
    quarter, span, half = 2 ** (bits - 2), 2 ** bits - 2, 2 ** (bits - 1)
    return target_inl * span / (quarter * span - target_inl * half)


def find_inl_seed(target_inl: float = 1.2, sigma_c: float = 0.01, tolerance: float = 0.05, bits: int = 8,
                  first_seed: int = 0, max_tries: int = 2000,
                  points_per_lsb: int = DEFAULT_POINTS_PER_LSB) -> Tuple[int, AdcConfig, InlProfile]:
    """First seed whose randomly mismatched DAC peaks within tolerance of target_inl."""
    nominal = build_sar_dac(bits)
    for seed in range(first_seed, first_seed + max_tries):
        cfg = AdcConfig(bits, dac=inject_mismatch(nominal, sigma_c, seed))
        profile = measure_inl(cfg, points_per_lsb)
        if abs(profile.max_abs_inl - target_inl) <= tolerance:
            logger.info('seed %d gives max INL %.3f LSB', seed, profile.max_abs_inl)
            return seed, cfg, profile
    raise InlError('no seed in [{}, {}) reaches {} +/- {} LSB at sigma_c={}'.format(
        first_seed, first_seed + max_tries, target_inl, tolerance, sigma_c))


def mean_comparisons(values: Sequence[float], cfg: AdcConfig) -> float:
    _, comparisons = convert_many(values, cfg)
    return float(np.mean(comparisons)) if comparisons.size else 0.0
