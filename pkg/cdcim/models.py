import enum
from collections import namedtuple


class Switch(enum.Enum):
    S1 = 'S1'
    S2 = 'S2'
    S3 = 'S3'


class Phase(enum.IntEnum):
    IN_COLUMN = 1
    IN_BANK = 2
    IN_ARRAY = 3


class PhaseSchedule:
    """Three-phase MAC schedule: exactly one switch group closed per phase."""

    CLOSED = {
        Phase.IN_COLUMN: Switch.S1,
        Phase.IN_BANK: Switch.S2,
        Phase.IN_ARRAY: Switch.S3,
    }

    ORDER = (Phase.IN_COLUMN, Phase.IN_BANK, Phase.IN_ARRAY)

    @classmethod
    def closed_switch(cls, phase: Phase) -> Switch:
        return cls.CLOSED[Phase(phase)]

    @classmethod
    def states(cls, phase: Phase) -> dict:
        closed = cls.closed_switch(phase)
        return {switch: switch is closed for switch in Switch}


class NodeRole(enum.Enum):
    DRIVEN = 'driven'
    FLOATING = 'floating'


class LeafConfig(namedtuple('_LeafConfig', ['n_bits', 'binary_high_bits', 'msb_split', 'unit_c', 'scl_load'])):
    """Hybrid binary-C-2C summation network parameters.

    n_bits counts weight positions including both half-weighted sign digits,
    so an 8b word uses 9. scl_load=None sizes every ScL to the largest
    per-ScL coupling capacitor plus one unit.
    """

    def __new__(cls, n_bits: int = 9, binary_high_bits: int = 4, msb_split: bool = True,
                unit_c: float = 1, scl_load=None):
        return super().__new__(cls, n_bits, binary_high_bits, msb_split, unit_c, scl_load)


LeafConfig.HYBRID = LeafConfig(9, 4, True, 1, 9)
LeafConfig.UNSPLIT = LeafConfig(9, 4, False, 1, 17)
LeafConfig.FULL_BINARY = LeafConfig(9, 7, False, 1, None)


AdcResult = namedtuple('AdcResult', ['code', 'comparisons', 'early_stopped'])

BankState = namedtuple('BankState', ['scl', 'leaf_out'])

InlProfile = namedtuple('InlProfile', ['inl', 'max_abs_inl', 'effective_bits', 'dnl', 'monotone'])


class ChipFigures:
    CAPACITANCE_REDUCTION = 10.8
    ADC_MAX_INL_LSB = 1.2
    CAAT_7B_YIELD = 0.70
    ADC_AREA_FRACTION = 0.03
    ADC_ENERGY_FRACTION = 0.08
    MACRO_EFFICIENCY_RATIO = 1.6
    AREA_RATIO = 1.2
    ADC_ENERGY_RATIO = 1 / 8
    GOPS_1GHZ = 51.2
    GOPS_700MHZ = 35.8
    TOPS_W_1GHZ = 3.53
    TOPS_W_700MHZ = 10.1
    TOPS_W_240MHZ = 10.3
    ROWS = 1152
    BANKS = 9
    COLS_PER_BANK = 9
