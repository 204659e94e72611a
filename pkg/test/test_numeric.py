import numpy as np
import pytest

from cdcim.exceptions import BitIndexError, EncodingRangeError
from cdcim.numeric import BalancedWord, bit_plane, decode, decode_array, digit_weights, encode, encode_array, \
    value_range, weight_of


class TestBalancedWord:

    def test_all_plus_decodes_to_128(self):
        assert decode(BalancedWord([1] * 7, 1, 1)) == 128

    def test_all_minus_decodes_to_minus_128(self):
        assert decode(BalancedWord([-1] * 7, -1, -1)) == -128

    def test_subset_sum(self):
        # positive integer digits 64 and 2 sum to 66
        n = [-1, 1, -1, -1, -1, -1, 1]
        assert decode(BalancedWord(n, 1, -1)) == 5

    def test_rejects_zero_digit(self):
        with pytest.raises(EncodingRangeError):
            BalancedWord([0] * 7, 1, 1)

    def test_digit_lookup(self):
        word = encode(127)
        assert word.digit('n0p') == 1
        assert word.digit('n0m') == -1
        assert word.digit(7) == 1
        with pytest.raises(BitIndexError):
            word.digit(8)
        with pytest.raises(BitIndexError):
            word.digit('n0')


class TestEncode:

    def test_zero(self):
        word = encode(0)
        assert decode(word) == 0
        assert (word.n0p, word.n0m) == (1, 1)
        # positive set sums to 63
        assert sum(2 ** (i - 1) for i, d in enumerate(word.n, start=1) if d == 1) == 63

    def test_127(self):
        word = encode(127)
        assert decode(word) == 127
        assert word.n == (1,) * 7
        assert (word.n0p, word.n0m) == (1, -1)

    def test_minus_128(self):
        word = encode(-128)
        assert decode(word) == -128
        assert word.n == (-1,) * 7
        assert (word.n0p, word.n0m) == (-1, -1)

    def test_round_trip_full_range(self):
        low, high = value_range(8)
        assert [decode(encode(x)) for x in range(low, high + 1)] == list(range(low, high + 1))

    @pytest.mark.parametrize('x', [-129, 129, 1.5])
    def test_out_of_range(self, x):
        with pytest.raises(EncodingRangeError):
            encode(x)

    def test_array_matches_scalar(self):
        values = np.arange(-128, 129)
        digits = encode_array(values)
        assert digits.shape == (257, 9)
        assert digits.dtype == np.int8
        for x, row in zip(values, digits):
            assert tuple(row) == encode(int(x)).columns()
        assert list(decode_array(digits)) == list(values)

    def test_array_out_of_range(self):
        with pytest.raises(EncodingRangeError):
            encode_array([0, 200])


class TestWeights:

    def test_digit_weights(self):
        weights = digit_weights(8)
        assert [float(w) for w in weights] == [0.5, 0.5, 1, 2, 4, 8, 16, 32, 64]
        assert sum(weights) == 128

    def test_weight_of(self):
        assert weight_of('n0m', 8) == 0.5
        assert weight_of(7, 8) == 64


class TestBitPlane:

    def test_msb_of_127(self):
        assert bit_plane([encode(127)], 3) == [1]

    def test_bit_one_of_minus_128(self):
        assert bit_plane([encode(-128)], 1) == [-1]

    def test_empty(self):
        assert bit_plane([], 'n0p') == []

    def test_invalid_index(self):
        with pytest.raises(BitIndexError):
            bit_plane([encode(1)], 0)

    def test_planes_reconstruct_values(self):
        rng = np.random.default_rng(17)
        indices = ['n0p', 'n0m'] + list(range(1, 8))
        for _ in range(100):
            values = [int(x) for x in rng.integers(-128, 129, 100)]
            words = [encode(x) for x in values]
            planes = {k: bit_plane(words, k) for k in indices}
            rebuilt = [sum(weight_of(k, 8) * planes[k][j] for k in indices) for j in range(len(words))]
            assert rebuilt == values


class TestDigitLinearity:

    @staticmethod
    def flipped(word, column):
        columns = list(word.columns())
        columns[column] = -columns[column]
        return BalancedWord(columns[2:], columns[0], columns[1])

    def test_flip_moves_by_column_weight(self):
        for x in range(-128, 129):
            word = encode(x)
            for column, weight in enumerate(digit_weights(8)):
                step = 2 * weight * word.columns()[column]
                assert decode(self.flipped(word, column)) == x - step
