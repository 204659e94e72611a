import base64
import csv
import io
import json
import math
from fractions import Fraction
from typing import List, Sequence

import numpy as np

from cdcim.exceptions import ValueRangeError

INT8_MIN = -128
INT8_MAX = 127


def round_half_away(value) -> int:
    """Round to the nearest integer, ties away from zero. Exact for Fraction and int."""
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        magnitude = abs(value)
        rounded = int(magnitude + Fraction(1, 2))
        return rounded if value >= 0 else -rounded
    magnitude = math.floor(abs(value) + 0.5)
    return int(magnitude) if value >= 0 else -int(magnitude)


def round_half_away_array(values: np.ndarray) -> np.ndarray:
    return (np.sign(values) * np.floor(np.abs(values) + 0.5)).astype(np.int64)


def clamp(value: int, low: int, high: int) -> int:
    return max(low, min(high, value))


def check_int8(values: Sequence[int], what: str = 'value') -> List[int]:
    checked = []
    for position, value in enumerate(values):
        if int(value) != value or not INT8_MIN <= value <= INT8_MAX:
            raise ValueRangeError('{} #{} = {} is not an 8b signed integer'.format(what, position, value))
        checked.append(int(value))
    return checked


def parse_int8_csv(text: str, source: str = '<input>') -> List[int]:
    """Read an int8 vector from CSV text: comma and/or newline separated, '#' comments."""
    values = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        for field in line.split(','):
            field = field.strip()
            if not field:
                continue
            try:
                value = int(field)
            except ValueError:
                raise ValueRangeError('{}:{}: {!r} is not an integer'.format(source, line_number, field))
            if not INT8_MIN <= value <= INT8_MAX:
                raise ValueRangeError('{}:{}: {} is outside [-128, 127]'.format(source, line_number, value))
            values.append(value)
    return values


def int8_to_base64(matrix: np.ndarray) -> str:
    return base64.b64encode(np.asarray(matrix, dtype=np.int8).tobytes()).decode('ascii')


def base64_to_int8(text: str, shape) -> np.ndarray:
    flat = np.frombuffer(base64.b64decode(text), dtype=np.int8)
    return flat.reshape(shape).astype(np.int64)


def dumps_json(document) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + '\n'


def dumps_csv(header: Sequence[str], rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()
