"""Three-phase charge-domain MAC: in-column, in-bank and in-array summation.

All analog quantities are normalized to [-1, 1]; full scale corresponds to
dot(A, W) = rows * 128**2. Inactive rows carry no signal but still load the
ScL, so short vectors are attenuated by the total row count.
"""
import logging
from fractions import Fraction
from math import lcm
from typing import List, Sequence, Tuple, Union

import numpy as np

from cdcim.capnet import CapNetwork
from cdcim.exceptions import LengthMismatchError, ValueRangeError
from cdcim.models import BankState
from cdcim.numeric import encode_array
from cdcim.utils import check_int8

logger = logging.getLogger(__name__)

WORD_BITS = 8
COLUMNS = WORD_BITS + 1

Voltage = Union[Fraction, float]


def in_column_sum(a_bits: Sequence[int], w_bits: Sequence[int], r_total: int) -> Fraction:
    """Average of the 1b products over every row of the column, used or not."""
    if len(a_bits) != len(w_bits):
        raise LengthMismatchError('activation and weight bit planes differ in length ({} vs {})'.format(
            len(a_bits), len(w_bits)))
    if r_total < 1 or len(a_bits) > r_total:
        raise ValueRangeError('{} rows do not fit a {}-row column'.format(len(a_bits), r_total))
    total = 0
    for a, w in zip(a_bits, w_bits):
        if a not in (-1, 0, 1) or w not in (-1, 0, 1):
            raise ValueRangeError('bit-plane entries must be -1, 0 or +1, got ({}, {})'.format(a, w))
        total += a * w
    return Fraction(total, r_total)


def _weighted_sum(values: Sequence[Voltage], net: CapNetwork, what: str) -> Voltage:
    weights = net.weights()
    if len(values) != len(weights):
        raise LengthMismatchError('{} expects {} inputs, got {}'.format(what, len(weights), len(values)))
    if isinstance(weights, tuple):
        return sum((w * v for w, v in zip(weights, values)), Fraction(0))
    return float(np.dot(weights, np.asarray([float(v) for v in values])))


def in_bank_sum(scl: Sequence[Voltage], leaf: CapNetwork) -> Voltage:
    return _weighted_sum(scl, leaf, 'bank leaf network')


def in_array_sum(leaf_outs: Sequence[Voltage], root: CapNetwork) -> Voltage:
    return _weighted_sum(leaf_outs, root, 'root network')


def _as_leafs(leafs, n_banks: int) -> List[CapNetwork]:
    if isinstance(leafs, CapNetwork):
        return [leafs] * n_banks
    leafs = list(leafs)
    if len(leafs) != n_banks:
        raise LengthMismatchError('expected {} leaf networks, got {}'.format(n_banks, len(leafs)))
    return leafs


def _check_operands(A: Sequence[int], W: Sequence[int], r_total: int) -> Tuple[np.ndarray, np.ndarray]:
    if len(A) != len(W):
        raise LengthMismatchError('activation and weight vectors differ in length ({} vs {})'.format(len(A), len(W)))
    if len(A) > r_total:
        raise ValueRangeError('{} rows do not fit a {}-row macro'.format(len(A), r_total))
    return np.asarray(check_int8(A, 'activation'), dtype=np.int64), np.asarray(check_int8(W, 'weight'), dtype=np.int64)


def column_sums(A: Sequence[int], W: Sequence[int]) -> np.ndarray:
    """Integer 1b dot products: entry [k, i] pairs activation bit k with weight bit i."""
    digits_a = encode_array(A, WORD_BITS).astype(np.int64)
    digits_w = encode_array(W, WORD_BITS).astype(np.int64)
    return digits_a.T @ digits_w


def run_phases(A: Sequence[int], W: Sequence[int], leafs, root: CapNetwork,
               r_total: int) -> Tuple[Voltage, List[BankState]]:
    """Full MAC with the intermediate ScL and CAAT-L values of every bank."""
    A, W = _check_operands(A, W, r_total)
    sums = column_sums(A, W)
    leafs = _as_leafs(leafs, COLUMNS)
    banks = []
    for k in range(COLUMNS):
        scl = [Fraction(int(total), r_total) for total in sums[k]]
        banks.append(BankState(scl, in_bank_sum(scl, leafs[k])))
    value = in_array_sum([bank.leaf_out for bank in banks], root)
    return value, banks


def caat_mac(A: Sequence[int], W: Sequence[int], leafs, root: CapNetwork, r_total: int) -> Voltage:
    """Normalized analog MAC value; exactly dot(A, W) / (r_total * 128**2) for ideal networks."""
    value, _ = run_phases(A, W, leafs, root, r_total)
    return value


def _integer_weights(weights: Sequence[Fraction]) -> Tuple[np.ndarray, int]:
    denominator = lcm(*(w.denominator for w in weights))
    return np.asarray([int(w * denominator) for w in weights], dtype=np.int64), denominator


def caat_layer(A: Sequence[int], weight_rows, leafs, root: CapNetwork, r_total: int) -> List[Voltage]:
    """caat_mac of one activation vector against every row of a weight matrix."""
    weight_rows = np.asarray(weight_rows, dtype=np.int64)
    if weight_rows.ndim != 2:
        raise ValueRangeError('weight matrix must be 2-D, got shape {}'.format(weight_rows.shape))
    if weight_rows.shape[0] == 0:
        return []
    n_out, n_in = weight_rows.shape
    A, _ = _check_operands(A, weight_rows[0], r_total)
    check_int8(weight_rows.reshape(-1), 'weight')
    digits_a = encode_array(A, WORD_BITS).astype(np.int64)
    digits_w = encode_array(weight_rows.reshape(-1), WORD_BITS).astype(np.int64).reshape(n_out, n_in, COLUMNS)
    sums = np.einsum('mk,nmi->nki', digits_a, digits_w)
    leafs = _as_leafs(leafs, COLUMNS)
    leaf_weights = [leaf.weights() for leaf in leafs]
    root_weights = root.weights()

    if isinstance(root_weights, tuple) and all(isinstance(w, tuple) for w in leaf_weights):
        root_int, root_den = _integer_weights(root_weights)
        scaled = [_integer_weights(w) for w in leaf_weights]
        leaf_den = lcm(*(den for _, den in scaled))
        leaf_int = np.stack([ints * (leaf_den // den) for ints, den in scaled])
        numerators = np.einsum('k,ki,nki->n', root_int, leaf_int, sums)
        denominator = r_total * root_den * leaf_den
        return [Fraction(int(num), denominator) for num in numerators]

    root_f = np.asarray([float(w) for w in root_weights])
    leaf_f = np.asarray([[float(w) for w in weights] for weights in leaf_weights])
    values = np.einsum('k,ki,nki->n', root_f, leaf_f, sums.astype(float)) / r_total
    return [float(v) for v in values]
