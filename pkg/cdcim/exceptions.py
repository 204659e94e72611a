class EncodingRangeError(ValueError):
    pass


class BitIndexError(IndexError):
    pass


class NetworkConstructionError(Exception):
    pass


class SolverError(Exception):
    pass


class InlError(ValueError):
    pass


class LengthMismatchError(ValueError):
    pass


class ValueRangeError(ValueError):
    pass


class CapacityError(Exception):
    pass


class WeightsNotLoaded(Exception):
    pass


class AdcInputError(ValueError):
    pass


class DegenerateCalibration(Exception):
    pass


class InvertedDistortion(Exception):
    pass


class CostParamsError(ValueError):
    pass


class TilingUnsupported(Exception):
    pass


class ConfigError(ValueError):
    pass
