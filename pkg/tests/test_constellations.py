import numpy as np
import pytest

from slplab import constellations as cst
from slplab.errors import UnsupportedOrder

ALL_IDS = ["psk2", "psk4", "psk8", "psk16", "qam16", "qam64", "qam256", "apsk16"]


def test_bpsk_points_on_real_axis():
    c = cst.make_constellation("psk", 2)
    assert np.allclose(sorted(c.points.real), [-1.0, 1.0])
    assert np.allclose(c.points.imag, 0.0)


def test_qpsk_points_rotated_grid():
    c = cst.make_constellation("psk", 4)
    expected = {(1, 1), (1, -1), (-1, 1), (-1, -1)}
    got = {(round(p.real * np.sqrt(2)), round(p.imag * np.sqrt(2))) for p in c.points}
    assert got == expected


def test_16qam_levels():
    # grid {+-1, +-3} per axis has mean energy 2*(1+9)/2 = 10, so levels
    # normalize by sqrt(10)
    c = cst.make_constellation("qam", 16)
    assert np.allclose(c.level_set * np.sqrt(10), [-3, -1, 1, 3])
    assert any(np.isclose(p, (3 + 3j) / np.sqrt(10)) for p in c.points)


@pytest.mark.parametrize("name", ALL_IDS)
def test_unit_energy_and_distinct(name):
    c = cst.from_name(name)
    assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) <= 1e-12
    assert len(np.unique(np.round(c.points, 9))) == c.order


@pytest.mark.parametrize("order", [2, 4, 8, 16, 32])
def test_psk_invariants(order):
    c = cst.make_constellation("psk", order)
    assert np.allclose(np.abs(c.points), 1.0)
    assert c.theta_th == np.pi / order


def test_psk_gray_adjacent_one_bit():
    c = cst.make_constellation("psk", 8)
    for m in range(8):
        diff = int(c.bit_labels[m]) ^ int(c.bit_labels[(m + 1) % 8])
        assert bin(diff).count("1") == 1


def test_qam_gray_per_axis_one_bit():
    c = cst.make_constellation("qam", 64)
    side = 8
    labels = c.bit_labels.reshape(side, side)
    for i in range(side):
        for j in range(side - 1):
            assert bin(int(labels[i, j] ^ labels[i, j + 1])).count("1") == 1
            assert bin(int(labels[j, i] ^ labels[j + 1, i])).count("1") == 1


def test_apsk_per_ring_gray():
    c = cst.make_constellation("apsk", 16)
    for ring in (range(4), range(4, 16)):
        ring = list(ring)
        for a, b in zip(ring, ring[1:] + ring[:1]):
            diff = int(c.bit_labels[a]) ^ int(c.bit_labels[b])
            assert bin(diff).count("1") == 1


def test_apsk_ring_geometry():
    c = cst.make_constellation("apsk", 16)
    r1, r2 = c.ring_radii
    assert np.isclose(r2 / r1, 2.57)
    assert np.allclose(np.abs(c.points[:4]), r1)
    assert np.allclose(np.abs(c.points[4:]), r2)
    assert c.theta_th == np.pi / 12


@pytest.mark.parametrize("bad", [("psk", 3), ("psk", 1), ("qam", 32),
                                 ("qam", 8), ("apsk", 32), ("nope", 4)])
def test_unsupported_orders(bad):
    with pytest.raises(UnsupportedOrder):
        cst.make_constellation(*bad)


@pytest.mark.parametrize("name", ALL_IDS)
@pytest.mark.parametrize("t", [1.0, 0.37, 2.5])
def test_detect_round_trip(name, t):
    c = cst.from_name(name)
    tx = np.arange(c.order)
    y = c.points if c.kind == cst.PSK else t * c.points
    assert np.array_equal(cst.detect(y, c, t), tx)


def test_detect_psk_scale_invariance():
    c = cst.make_constellation("psk", 8)
    for scale in (0.01, 1.0, 57.0):
        assert np.array_equal(cst.detect(scale * c.points, c), np.arange(8))


def test_detect_qpsk_nearest_angle():
    c = cst.make_constellation("psk", 4)
    idx = cst.detect(1 + 0.1j, c)
    assert np.isclose(c.points[idx], (1 + 1j) / np.sqrt(2))


def test_detect_16qam_perturbed_corner():
    c = cst.make_constellation("qam", 16)
    t = 1.7
    corner = t * (3 + 3j) / np.sqrt(10)
    y = corner + (0.3 + 0.4j) * t / np.sqrt(10)  # |perturbation| < t/sqrt(10)
    got = cst.detect(y, c, t)
    assert np.isclose(c.points[got], (3 + 3j) / np.sqrt(10))


def test_detect_16qam_matches_nearest_neighbor_oracle():
    c = cst.make_constellation("qam", 16)
    rng = np.random.default_rng(0)
    t = 1.3
    y = rng.normal(size=500) + 1j * rng.normal(size=500)
    got = cst.detect(y, c, t)
    oracle = np.argmin(np.abs(y[:, None] - t * c.points[None, :]), axis=1)
    assert np.array_equal(got, oracle)


def test_classify_psk_all_outer():
    cc = cst.classify_components(cst.make_constellation("psk", 4))
    assert cc.real_outer.all() and cc.imag_outer.all() and cc.point_outer.all()


def test_classify_16qam_point_types():
    c = cst.make_constellation("qam", 16)
    cc = cst.classify_components(c)
    idx_c = int(np.argmin(np.abs(c.points - (1 + 3j) / np.sqrt(10))))
    assert not cc.real_outer[idx_c] and cc.imag_outer[idx_c]
    idx_a = int(np.argmin(np.abs(c.points - (1 + 1j) / np.sqrt(10))))
    assert not cc.real_outer[idx_a] and not cc.imag_outer[idx_a]
    idx_d = int(np.argmin(np.abs(c.points - (3 + 3j) / np.sqrt(10))))
    assert cc.real_outer[idx_d] and cc.imag_outer[idx_d]


def test_classify_apsk_outer_ring():
    c = cst.make_constellation("apsk", 16)
    cc = cst.classify_components(c)
    assert not cc.point_outer[:4].any()
    assert cc.point_outer[4:].all()


def test_bit_errors_counts_hamming():
    c = cst.make_constellation("psk", 4)
    tx = np.array([0, 1, 2, 3])
    assert cst.bit_errors(tx, tx, c) == 0
    rx = np.array([1, 1, 2, 3])
    assert cst.bit_errors(tx, rx, c) == 1
