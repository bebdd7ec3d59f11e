import itertools
import math

import numpy as np
import pytest

from advlink.channel import ChannelModel
from advlink.classical import (
    analytic_bler,
    bit_error_probability,
    bits_to_index,
    bpsk_demodulate,
    bpsk_modulate,
    hamming_decode,
    hamming_encode,
    hamming_syndrome,
    index_to_bits,
    q_function,
    simulate_bler,
)
from advlink.rng import substream


def test_bpsk_mapping():
    np.testing.assert_array_equal(bpsk_modulate([0, 1]), [1.0, -1.0])
    np.testing.assert_array_equal(bpsk_demodulate([0.3, -0.0001]), [0, 1])
    bits = np.array(list(itertools.product([0, 1], repeat=4)))
    np.testing.assert_array_equal(bpsk_demodulate(bpsk_modulate(bits)), bits)


def test_hamming_examples():
    np.testing.assert_array_equal(hamming_encode([0, 0, 0, 0]), [0] * 7)
    np.testing.assert_array_equal(hamming_encode([1, 0, 1, 1]), [1, 0, 1, 1, 0, 0, 1])


def test_hamming_exhaustive_single_error():
    cases = 0
    for data in itertools.product([0, 1], repeat=4):
        code = hamming_encode(data)
        for flip in range(-1, 7):
            received = code.copy()
            if flip >= 0:
                received[flip] ^= 1
            np.testing.assert_array_equal(hamming_decode(received), data)
            cases += 1
    assert cases == 128


def test_hamming_code_properties():
    words = hamming_encode(np.array(list(itertools.product([0, 1], repeat=4))))
    assert len({tuple(w) for w in words}) == 16
    dists = [int(np.sum(a != b)) for a, b in itertools.combinations(words, 2)]
    assert min(dists) == 3
    assert not hamming_syndrome(words).any()
    syndromes = {tuple(hamming_syndrome(np.eye(7, dtype=int)[i])) for i in range(7)}
    assert len(syndromes) == 7 and (0, 0, 0) not in syndromes


def test_message_bits_round_trip():
    idx = np.arange(16)
    bits = index_to_bits(idx)
    np.testing.assert_array_equal(bits[5], [0, 1, 0, 1])
    np.testing.assert_array_equal(bits_to_index(bits), idx)


def test_q_function_oracle():
    assert q_function(math.sqrt(2)) == pytest.approx(0.07865, abs=1e-5)
    assert q_function(0.0) == 0.5


def test_bit_error_probability_convention():
    # unit-power symbols, noise variance 10^(-snr/10): p = Q(1/sigma)
    for snr in (0.0, 4.0, 8.0):
        sigma = math.sqrt(10 ** (-snr / 10))
        assert bit_error_probability(snr) == pytest.approx(float(q_function(1 / sigma)), rel=1e-14)


def test_analytic_limits_and_coding_gain():
    assert analytic_bler("uncoded", math.inf) == 0.0
    assert analytic_bler("hamming", 60.0) < 1e-100
    for snr in np.arange(3.0, 15.0, 0.5):
        assert analytic_bler("hamming", snr) < analytic_bler("uncoded", snr)
    with pytest.raises(ValueError):
        analytic_bler("uncoded", 4.0, channel="rayleigh")
    with pytest.raises(ValueError):
        analytic_bler("turbo", 4.0)


@pytest.mark.parametrize("scheme", ["uncoded", "hamming"])
@pytest.mark.parametrize("snr", [0.0, 4.0, 8.0])
def test_monte_carlo_matches_closed_form(scheme, snr):
    n = 1_000_000
    errors, blocks = simulate_bler(scheme, ChannelModel("awgn", snr), n,
                                   substream(0, "classical", scheme, repr(snr)))
    p = analytic_bler(scheme, snr)
    assert abs(errors / blocks - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_simulation_on_fading_runs_and_is_worse():
    rng = substream(1)
    errors_awgn, _ = simulate_bler("uncoded", ChannelModel("awgn", 8.0), 100_000, rng)
    errors_fade, _ = simulate_bler("uncoded", ChannelModel("rayleigh", 8.0), 100_000, rng)
    assert errors_fade > errors_awgn
