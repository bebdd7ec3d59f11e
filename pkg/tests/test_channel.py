import math

import numpy as np
import pytest
from scipy import stats

from advlink.channel import (
    BREAKPOINT_M,
    ChannelModel,
    draw_rayleigh_amplitude,
    draw_rician_amplitude,
    noise_variance,
    rician_k_factor,
    rician_k_factor_branches_db,
    rician_k_factor_db,
)
from advlink.rng import derive_seed, substream

N = 1_000_000
ALPHA = 0.01


def rice_reference(k):
    """scipy Rice distribution matching |h| with E|h|^2 = 1."""
    nu = math.sqrt(k / (k + 1.0))
    sigma = math.sqrt(1.0 / (2.0 * (k + 1.0)))
    return stats.rice(b=nu / sigma, scale=sigma)


def test_noise_variance_convention():
    assert noise_variance(0.0) == 1.0
    assert noise_variance(10.0) == pytest.approx(0.1, rel=1e-15)
    assert noise_variance(math.inf) == 0.0


def test_awgn_noiseless_limit_is_identity():
    s = np.random.default_rng(0).standard_normal((10, 7))
    r = ChannelModel("awgn", math.inf).apply(s, np.random.default_rng(1))
    np.testing.assert_array_equal(r, s)


@pytest.mark.parametrize("snr_db", [0.0, 8.0])
def test_awgn_empirical_variance(snr_db):
    ch = ChannelModel("awgn", snr_db)
    s = np.zeros((N // 7 + 1, 7))
    n = (ch.apply(s, substream(1, "awgn")) - s).ravel()
    var = ch.noise_var
    # 3 sigma of the sample-variance estimator
    assert abs(n.var() - var) < 3 * var * math.sqrt(2.0 / n.size)


@pytest.mark.parametrize("kind", ["rayleigh", "rician"])
def test_faded_noise_power(kind):
    ch = ChannelModel(kind, 4.0)
    s = substream(2, "s").choice([-1.0, 1.0], size=(N // 7 + 1, 7))
    r, amp = ch.transmit(s, substream(2, "ch"))
    n = (r - amp * s).ravel()
    assert abs(n.var() - ch.noise_var) < 3 * ch.noise_var * math.sqrt(2.0 / n.size)


def test_rayleigh_ks_and_power():
    h = draw_rayleigh_amplitude(substream(3, "rayleigh"), N)
    assert abs(np.mean(h**2) - 1.0) < 0.01
    assert stats.kstest(h, stats.rayleigh(scale=1 / math.sqrt(2)).cdf).pvalue > ALPHA


@pytest.mark.parametrize("k", [0.0, rician_k_factor(), 10.0])
def test_rician_ks_and_power(k):
    h = draw_rician_amplitude(k, substream(4, "rician", repr(k)), N)
    assert abs(np.mean(h**2) - 1.0) < 0.01
    assert stats.kstest(h, rice_reference(k).cdf).pvalue > ALPHA


def test_rician_los_limit():
    h = draw_rician_amplitude(1e6, substream(5), N)
    assert np.abs(h - 1.0).max() < 0.01


def test_k_factor_values():
    assert rician_k_factor() == pytest.approx(1.918, abs=1e-3)
    assert rician_k_factor_db(100.0) == pytest.approx(-2.7 + 8.48)
    assert rician_k_factor_db(400.0) == pytest.approx(-0.92 + 4.024)
    low, high = rician_k_factor_branches_db(BREAKPOINT_M)
    assert low == pytest.approx(3.08)
    assert high == pytest.approx(3.564)
    assert rician_k_factor_db(BREAKPOINT_M) == low
    with pytest.raises(ValueError):
        rician_k_factor_db(0.0)


def test_channel_k_override_and_distance():
    assert ChannelModel("rician", k_db=0.0).k_linear == 1.0
    assert ChannelModel("rician", distance_m=100.0).k_linear == pytest.approx(10 ** 0.578)
    with pytest.raises(ValueError):
        ChannelModel("nakagami")


@pytest.mark.parametrize("kind", ["awgn", "rayleigh", "rician"])
def test_channel_determinism(kind):
    s = np.ones((100, 7))
    ch = ChannelModel(kind, 2.0)
    a = ch.apply(s, substream(9, "x"))
    b = ch.apply(s, substream(9, "x"))
    assert a.tobytes() == b.tobytes()


def test_awgn_additivity():
    rng = np.random.default_rng(0)
    s1, s2 = rng.standard_normal((50, 7)), rng.standard_normal((50, 7))
    ch = ChannelModel("awgn", 3.0)
    lhs = ch.apply(s1 + s2, substream(1, "n"))
    rhs = ch.apply(s1, substream(1, "n")) + s2
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_per_row_snr():
    ch = ChannelModel("awgn", 0.0)
    s = np.zeros((200_000, 7))
    snrs = np.repeat([0.0, 10.0], 100_000)
    r, _ = ch.transmit(s, substream(0), snr_db=snrs)
    assert r[:100_000].var() == pytest.approx(1.0, rel=0.01)
    assert r[100_000:].var() == pytest.approx(0.1, rel=0.01)


def test_substreams_are_independent_and_stable():
    a = substream(1, "a").standard_normal(4)
    assert np.array_equal(a, substream(1, "a").standard_normal(4))
    assert not np.array_equal(a, substream(1, "b").standard_normal(4))
    assert not np.array_equal(a, substream(2, "a").standard_normal(4))
    seed = derive_seed(1, "snr", "8.0")
    assert seed == derive_seed(1, "snr", "8.0")
    assert 0 <= seed < 2**63
