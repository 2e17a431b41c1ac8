import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aspm.channel import ChannelConfig, awgn, matched_power, mix, scale_to_power
from aspm.filters import convolve
from aspm.metrics import DegenerateInputError, excess_kurtosis
from aspm.pulsegen import encode_equidistant, render


def test_config_validation_and_dict():
    with pytest.raises(ValueError):
        ChannelConfig(0.0, reference="antenna")
    c = ChannelConfig(3.0, seed=4)
    assert c.to_dict() == {"snr_db": 3.0, "seed": 4, "reference": "matched-output"}
    assert ChannelConfig(10.0).snr == pytest.approx(10.0)
    assert math.isinf(ChannelConfig(math.inf).snr)


def test_infinite_snr_is_identity(rng):
    x = rng.standard_normal(100)
    y, s = awgn(x, ChannelConfig(math.inf, reference="channel-input"))
    np.testing.assert_array_equal(x, y)
    assert s == 0.0


def test_unit_power_zero_db_sigma():
    x = np.where(np.arange(1000) % 2, 1.0, -1.0)
    _, s = awgn(x, ChannelConfig(0.0, reference="channel-input"))
    assert s == pytest.approx(1.0, abs=1e-12)


def test_calibration_within_0_1_db(rng):
    x = 0.3 * rng.standard_normal(1_000_000)
    for snr_db in (-20.0, 0.0, 13.0):
        y, _ = awgn(x, ChannelConfig(snr_db, seed=9, reference="channel-input"))
        measured = 10 * np.log10(np.mean(x * x) / np.mean((y - x) ** 2))
        assert measured == pytest.approx(snr_db, abs=0.1)


def test_matched_output_reference(pair21):
    train = encode_equidistant(np.random.default_rng(0).integers(0, 2, 4000), 32)
    tx = convolve(render(train), pair21.spread)
    y, s = awgn(tx, ChannelConfig(0.0, seed=1), matched=pair21.descramble)
    p = matched_power(tx, pair21.descramble) / pair21.descramble.energy
    assert s == pytest.approx(math.sqrt(p))
    # unit-energy descrambler leaves the noise variance unchanged
    nz = convolve(y - tx, pair21.descramble)[len(pair21.descramble) : tx.size]
    assert np.var(nz) == pytest.approx(s * s, rel=0.03)
    with pytest.raises(ValueError):
        awgn(tx, ChannelConfig(0.0))


def test_zero_db_baseband_then_matched_filter_restores_train(pair21):
    # noise and signal equal at channel input, pulses stand out after g
    n_p = 64
    bits = np.random.default_rng(3).integers(0, 2, 2000)
    tx = convolve(render(encode_equidistant(bits, n_p)), pair21.spread)
    rx, _ = awgn(tx, ChannelConfig(0.0, seed=5, reference="channel-input"))
    y = convolve(rx, pair21.descramble)
    k = n_p + pair21.delay + n_p * np.arange(bits.size)
    assert np.mean((y[k] < 0) != (bits == 1)) < 1e-3
    assert excess_kurtosis(y[pair21.delay : pair21.delay + bits.size * n_p]) > 5


def test_same_seed_same_noise(rng):
    x = rng.standard_normal(500)
    a, _ = awgn(x, ChannelConfig(-3.0, seed=11, reference="channel-input"))
    b, _ = awgn(x, ChannelConfig(-3.0, seed=11, reference="channel-input"))
    c, _ = awgn(x, ChannelConfig(-3.0, seed=12, reference="channel-input"))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_zero_power_rejected():
    with pytest.raises(DegenerateInputError):
        awgn(np.zeros(10), ChannelConfig(0.0, reference="channel-input"))


def test_mix_identity_and_errors(rng):
    x = rng.standard_normal(64)
    np.testing.assert_allclose(mix([(x, float(np.mean(x * x)))]), x, rtol=1e-12)
    with pytest.raises(ValueError):
        mix([])
    with pytest.raises(ValueError):
        mix([(x, -1.0)])
    with pytest.raises(DegenerateInputError):
        mix([(np.zeros(4), 1.0)])
    np.testing.assert_array_equal(mix([(x, 0.0)]), np.zeros(64))


def test_mix_power_ratio_20db(rng):
    a, b = rng.standard_normal(100_000), rng.standard_normal(100_000)
    ca = scale_to_power(a, 100.0)
    cb = scale_to_power(b, 1.0)
    assert 10 * np.log10(np.mean(ca**2) / np.mean(cb**2)) == pytest.approx(20.0, abs=1e-9)
    m = mix([(a, 100.0), (b, 1.0)])
    np.testing.assert_allclose(m, ca + cb)


def test_mix_of_gaussians_is_gaussian(rng):
    m = mix([(rng.standard_normal(1_000_000), 1.0), (rng.standard_normal(1_000_000), 1.0)])
    assert abs(excess_kurtosis(m)) < 0.03


@given(st.lists(st.tuples(st.integers(1, 50), st.floats(0.01, 10.0), st.integers(0, 99)), min_size=2, max_size=5),
       st.integers(1, 4))
def test_mix_is_linear_and_pads(parts, split):
    split = min(split, len(parts) - 1)
    comps = [(np.random.default_rng(s).standard_normal(n) + 0.1, w) for n, w, s in parts]
    n = max(c.size for c, _ in comps)
    whole = mix(comps)
    a, b = mix(comps[:split]), mix(comps[split:])
    assert whole.size == n
    np.testing.assert_allclose(whole, np.pad(a, (0, n - a.size)) + np.pad(b, (0, n - b.size)), atol=1e-12)
