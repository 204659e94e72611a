"""Balanced N+1-bit encoding of signed N-bit integers.

x = sum(n_i * 2**(i-1), i=1..N-1) + (n0p + n0m) / 2, every digit in {-1, +1}.
Columns are ordered (n0p, n0m, n_1, ..., n_{N-1}) wherever digits are laid
out side by side.
"""
from fractions import Fraction
from typing import List, Sequence, Tuple, Union

import numpy as np

from cdcim.exceptions import BitIndexError, EncodingRangeError

HALF_DIGITS = ('n0p', 'n0m')

BitIndex = Union[str, int]


class BalancedWord:
    __slots__ = ('n', 'n0p', 'n0m')

    def __init__(self, n: Sequence[int], n0p: int, n0m: int) -> None:
        digits = tuple(int(d) for d in n)
        for digit in digits + (n0p, n0m):
            if digit not in (-1, 1):
                raise EncodingRangeError('balanced digits must be -1 or +1, got {}'.format(digit))
        self.n = digits
        self.n0p = int(n0p)
        self.n0m = int(n0m)

    @property
    def width(self) -> int:
        return len(self.n) + 1

    def digit(self, k: BitIndex) -> int:
        if k == 'n0p':
            return self.n0p
        if k == 'n0m':
            return self.n0m
        if isinstance(k, (int, np.integer)) and not isinstance(k, bool) and 1 <= k <= len(self.n):
            return self.n[k - 1]
        raise BitIndexError('bit index {!r} is not one of n0p, n0m, 1..{}'.format(k, len(self.n)))

    def columns(self) -> Tuple[int, ...]:
        return (self.n0p, self.n0m) + self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, BalancedWord) and self.columns() == other.columns()

    def __hash__(self) -> int:
        return hash(self.columns())

    def __repr__(self) -> str:
        return 'BalancedWord(n={}, n0p={}, n0m={})'.format(self.n, self.n0p, self.n0m)


def value_range(width: int) -> Tuple[int, int]:
    return -2 ** (width - 1), 2 ** (width - 1)


def digit_weights(width: int) -> List[Fraction]:
    """Weights of the N+1 columns: (1/2, 1/2, 1, 2, ..., 2**(N-2))."""
    return [Fraction(1, 2), Fraction(1, 2)] + [Fraction(2 ** i) for i in range(width - 1)]


def weight_of(k: BitIndex, width: int) -> Fraction:
    return digit_weights(width)[column_of(k, width)]


def column_of(k: BitIndex, width: int) -> int:
    if k in HALF_DIGITS:
        return HALF_DIGITS.index(k)
    if isinstance(k, (int, np.integer)) and not isinstance(k, bool) and 1 <= k <= width - 1:
        return int(k) + 1
    raise BitIndexError('bit index {!r} is not one of n0p, n0m, 1..{}'.format(k, width - 1))


def bit_indices(width: int) -> List[BitIndex]:
    return list(HALF_DIGITS) + list(range(1, width))


def decode(word: BalancedWord) -> int:
    integer_part = sum(digit << (i - 1) for i, digit in enumerate(word.n, start=1))
    # n0p + n0m is -2, 0 or 2
    return integer_part + (word.n0p + word.n0m) // 2


def _half_offset(x: int) -> int:
    if x % 2:
        return 0
    return 1 if x >= 0 else -1


def encode(x: int, width: int = 8) -> BalancedWord:
    low, high = value_range(width)
    if int(x) != x or not low <= x <= high:
        raise EncodingRangeError('{} is outside the {}-bit balanced range [{}, {}]'.format(x, width, low, high))
    x = int(x)
    c = _half_offset(x)
    if c == 0:
        n0p, n0m = 1, -1
    else:
        n0p = n0m = c
    positive_sum = (x - c + 2 ** (width - 1) - 1) // 2
    n = [1 if (positive_sum >> (i - 1)) & 1 else -1 for i in range(1, width)]
    return BalancedWord(n, n0p, n0m)


def encode_array(values, width: int = 8) -> np.ndarray:
    """Vectorized encode: returns an int8 digit matrix of shape (len(values), width + 1)."""
    x = np.asarray(values, dtype=np.int64).reshape(-1)
    low, high = value_range(width)
    if x.size and (x.min() < low or x.max() > high):
        raise EncodingRangeError('values outside the {}-bit balanced range [{}, {}]'.format(width, low, high))
    odd = (x % 2) != 0
    c = np.where(odd, 0, np.where(x >= 0, 1, -1))
    digits = np.empty((x.size, width + 1), dtype=np.int8)
    digits[:, 0] = np.where(odd, 1, c)
    digits[:, 1] = np.where(odd, -1, c)
    positive_sum = (x - c + 2 ** (width - 1) - 1) // 2
    shifts = np.arange(width - 1)
    digits[:, 2:] = ((positive_sum[:, None] >> shifts) & 1) * 2 - 1
    return digits


def decode_array(digits: np.ndarray) -> np.ndarray:
    digits = np.asarray(digits, dtype=np.int64)
    width = digits.shape[1] - 1
    integer_weights = 2 ** np.arange(width - 1, dtype=np.int64)
    return digits[:, 2:] @ integer_weights + (digits[:, 0] + digits[:, 1]) // 2


def bit_plane(words: Sequence[BalancedWord], k: BitIndex) -> List[int]:
    if not words:
        return []
    width = words[0].width
    if any(word.width != width for word in words):
        raise EncodingRangeError('all words of a bit plane must share one width')
    column_of(k, width)
    return [word.digit(k) for word in words]
