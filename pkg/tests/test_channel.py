import numpy as np
import pytest

from slplab import channel
from slplab.errors import DimensionMismatch


def test_stream_determinism():
    a = channel.sample_rayleigh(3, 5, channel.stream_rng(42, 7))
    b = channel.sample_rayleigh(3, 5, channel.stream_rng(42, 7))
    assert np.array_equal(a, b)
    c = channel.sample_rayleigh(3, 5, channel.stream_rng(42, 8))
    assert not np.array_equal(a, c)


def test_rayleigh_unit_variance():
    rng = channel.stream_rng(1)
    h = channel.sample_rayleigh(1000, 1000, rng)
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) <= 0.01


def test_rayleigh_scalar_case():
    h = channel.sample_rayleigh(1, 1, channel.stream_rng(2))
    assert h.shape == (1, 1)


def test_transmit_identity_noiseless():
    x = np.array([1 + 2j, -0.5j, 3.0])
    y = channel.transmit(np.eye(3), x, 0.0)
    assert np.array_equal(y, x)


def test_transmit_noise_variance():
    rng = channel.stream_rng(3)
    sigma2 = 0.7
    y = channel.transmit(np.ones((1, 1)), np.zeros((1, 100_000)), sigma2, rng)
    assert abs(np.mean(np.abs(y) ** 2) - sigma2) <= 0.03 * sigma2


def test_transmit_destructive_superposition():
    a = 0.3 - 1.1j
    y = channel.transmit(np.array([[1.0, 1.0]]), np.array([a, -a]), 0.0)
    assert np.allclose(y, 0.0)


def test_transmit_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        channel.transmit(np.eye(3), np.ones(2), 0.0)


def test_channel_csv_round_trip(tmp_path):
    rng = channel.stream_rng(4)
    h = channel.sample_rayleigh(3, 4, rng)
    path = tmp_path / "h.csv"
    channel.save_channel_csv(path, h)
    assert np.array_equal(channel.load_channel_csv(path), h)
