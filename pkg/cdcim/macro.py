import logging
from collections import namedtuple
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from cdcim import caat
from cdcim.adc import AdcConfig, build_sar_dac, convert, convert_relu
from cdcim.capnet import CapNetwork, build_caat_leaf, build_caat_root, inject_mismatch
from cdcim.exceptions import CapacityError, LengthMismatchError, NetworkConstructionError, WeightsNotLoaded
from cdcim.models import AdcResult, ChipFigures, LeafConfig
from cdcim.numeric import decode, encode
from cdcim.utils import INT8_MAX, INT8_MIN, check_int8, clamp, round_half_away

logger = logging.getLogger(__name__)


class MacroState(namedtuple('_MacroState', ['words'])):
    @property
    def values(self) -> List[int]:
        return [decode(word) for word in self.words]


def weights_required(func):
    def func_wrapper(self, *args, **kwargs):
        if self.state is None:
            raise WeightsNotLoaded('Use load_weights method first')
        return func(self, *args, **kwargs)

    func_wrapper.__name__ = func.__name__
    func_wrapper.__doc__ = func.__doc__
    return func_wrapper


@dataclass(frozen=True, eq=False)
class MacroConfig:
    banks: int = ChipFigures.BANKS
    rows: int = ChipFigures.ROWS
    cols_per_bank: int = ChipFigures.COLS_PER_BANK
    leafs: Tuple[CapNetwork, ...] = ()
    root: Optional[CapNetwork] = None
    adc: AdcConfig = field(default_factory=lambda: AdcConfig(relu_mode=True))
    seed: Optional[int] = None

    def __post_init__(self):
        if self.banks != caat.COLUMNS or self.cols_per_bank != caat.COLUMNS:
            raise NetworkConstructionError('an 8b macro needs {0} banks of {0} columns, got {1} x {2}'.format(
                caat.COLUMNS, self.banks, self.cols_per_bank))
        if self.rows < 1:
            raise NetworkConstructionError('macro needs at least one row, got {}'.format(self.rows))
        if not self.leafs:
            leaf = build_caat_leaf(LeafConfig.HYBRID)
            object.__setattr__(self, 'leafs', (leaf,) * self.banks)
        elif len(self.leafs) != self.banks:
            raise NetworkConstructionError('expected {} leaf networks, got {}'.format(self.banks, len(self.leafs)))
        else:
            object.__setattr__(self, 'leafs', tuple(self.leafs))
        if self.root is None:
            object.__setattr__(self, 'root', build_caat_root(self.banks))

    @property
    def is_ideal(self) -> bool:
        return self.root.is_ideal and self.adc.dac.is_ideal and all(leaf.is_ideal for leaf in self.leafs)

    @classmethod
    def ideal(cls, rows: int = ChipFigures.ROWS) -> 'MacroConfig':
        return cls(rows=rows)

    @classmethod
    def with_mismatch(cls, sigma_c: float, seed: int, rows: int = ChipFigures.ROWS, parasitic=0,
                      leaf_cfg: LeafConfig = LeafConfig.HYBRID) -> 'MacroConfig':
        """Every leaf, the root and the ADC DAC get independent mismatch draws from one seed."""
        children = np.random.SeedSequence(seed).spawn(caat.COLUMNS + 2)
        leaf = build_caat_leaf(leaf_cfg, parasitic=parasitic)
        leafs = tuple(inject_mismatch(leaf, sigma_c, child) for child in children[:caat.COLUMNS])
        root = inject_mismatch(build_caat_root(caat.COLUMNS, leaf_cfg, parasitic=parasitic), sigma_c,
                               children[caat.COLUMNS])
        dac = inject_mismatch(build_sar_dac(), sigma_c, children[caat.COLUMNS + 1])
        return cls(rows=rows, leafs=leafs, root=root, adc=AdcConfig(dac=dac, relu_mode=True), seed=seed)


class Macro:
    """One CiM macro: weights stored once, shared by all banks, one conversion per MAC.

    Not safe to mutate from several threads; read-only evaluation is.
    """

    def __init__(self, cfg: Optional[MacroConfig] = None) -> None:
        self.cfg = cfg or MacroConfig()
        self.state = None
        self.conversions = 0

    def load_weights(self, W: Sequence[int]) -> MacroState:
        if len(W) > self.cfg.rows:
            raise CapacityError('{} weights do not fit {} rows'.format(len(W), self.cfg.rows))
        values = check_int8(W, 'weight')
        self.state = MacroState(tuple(encode(value) for value in values))
        self._values = values
        logger.debug('loaded %d weights', len(values))
        return self.state

    def _check(self, A: Sequence[int]) -> None:
        if len(A) != len(self._values):
            raise LengthMismatchError('{} activations against {} stored weights'.format(len(A), len(self._values)))

    @weights_required
    def analog_value(self, A: Sequence[int]):
        self._check(A)
        return caat.caat_mac(A, self._values, self.cfg.leafs, self.cfg.root, self.cfg.rows)

    @weights_required
    def mac(self, A: Sequence[int]) -> AdcResult:
        """Signed MAC code without ReLU."""
        value = self.analog_value(A)
        self.conversions += 1
        return convert(value, self.cfg.adc.with_relu(False))

    @weights_required
    def mac_relu(self, A: Sequence[int]) -> AdcResult:
        """MAC and ReLU in one conversion; codes land in [0, 127]."""
        value = self.analog_value(A)
        self.conversions += 1
        return convert_relu(value, self.cfg.adc)

    def mac_layer(self, A: Sequence[int], weight_rows, relu: bool = True) -> List[AdcResult]:
        """One conversion per weight row, all rows against the same activations."""
        weight_rows = np.asarray(weight_rows, dtype=np.int64)
        if weight_rows.ndim == 1:
            weight_rows = weight_rows.reshape(1, -1)
        if weight_rows.size and weight_rows.shape[1] != len(A):
            raise LengthMismatchError('{} activations against rows of {} weights'.format(len(A), weight_rows.shape[1]))
        if weight_rows.shape[1] > self.cfg.rows:
            raise CapacityError('{} weights per row do not fit {} rows'.format(weight_rows.shape[1], self.cfg.rows))
        values = caat.caat_layer(A, weight_rows, self.cfg.leafs, self.cfg.root, self.cfg.rows)
        self.conversions += len(values)
        adc = self.cfg.adc
        if relu:
            return [convert_relu(value, adc) for value in values]
        adc = adc.with_relu(False)
        return [convert(value, adc) for value in values]


def mac_relu(A: Sequence[int], state: MacroState, cfg: MacroConfig) -> AdcResult:
    macro = Macro(cfg)
    macro.load_weights(state.values)
    return macro.mac_relu(A)


def _reference_value(A: Sequence[int], W: Sequence[int], rows: int) -> Fraction:
    if len(A) != len(W):
        raise LengthMismatchError('activation and weight vectors differ in length ({} vs {})'.format(len(A), len(W)))
    if len(A) > rows:
        raise CapacityError('{} weights do not fit {} rows'.format(len(A), rows))
    dot = sum(a * w for a, w in zip(check_int8(A, 'activation'), check_int8(W, 'weight')))
    return Fraction(dot, rows * 128)


def reference_mac(A: Sequence[int], W: Sequence[int], rows: int = ChipFigures.ROWS) -> int:
    return clamp(round_half_away(_reference_value(A, W, rows)), INT8_MIN, INT8_MAX)


def reference_mac_relu(A: Sequence[int], W: Sequence[int], rows: int = ChipFigures.ROWS) -> int:
    """Digital ground truth, exact rational arithmetic end to end."""
    return max(0, reference_mac(A, W, rows))
