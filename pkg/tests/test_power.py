import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advlink.power import mean_power, pnr_db, scale_to_pnr


def test_hand_example():
    p = np.full(7, math.sqrt(0.5))
    out = scale_to_pnr(p, 0.1, -3.0)
    target = 0.1 * 10 ** -0.3
    assert target == pytest.approx(0.05012, abs=1e-5)
    assert out[0] / p[0] == pytest.approx(0.3166, abs=1e-4)
    assert mean_power(out) == pytest.approx(target, rel=1e-12)


def test_zero_db_unit_noise():
    p = np.random.default_rng(0).standard_normal((10, 7))
    assert mean_power(scale_to_pnr(p, 1.0, 0.0)) == pytest.approx(1.0, rel=1e-12)


def test_direction_preserved():
    p = np.random.default_rng(1).standard_normal((4, 7))
    out = scale_to_pnr(p, 0.3, 2.0)
    ratio = out / p
    np.testing.assert_allclose(ratio, ratio.flat[0], rtol=1e-12)
    assert ratio.flat[0] > 0


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), noise=st.floats(1e-6, 1e3),
       target=st.floats(-40.0, 20.0), scale=st.floats(1e-6, 1e6))
def test_pnr_exactness(seed, noise, target, scale):
    p = scale * np.random.default_rng(seed).standard_normal((16, 7))
    out = scale_to_pnr(p, noise, target)
    expected = noise * 10 ** (target / 10)
    assert abs(mean_power(out) - expected) <= 1e-9 * expected
    assert pnr_db(out, noise) == pytest.approx(target, abs=1e-8)


def test_errors_and_limits():
    with pytest.raises(ValueError):
        scale_to_pnr(np.zeros(7), 1.0, 0.0)
    with pytest.raises(ValueError):
        scale_to_pnr(np.ones(7), 0.0, 0.0)
    np.testing.assert_array_equal(scale_to_pnr(np.ones(7), 1.0, -math.inf), np.zeros(7))
