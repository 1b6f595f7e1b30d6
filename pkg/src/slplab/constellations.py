"""Modulation alphabets, detection rules, and outer/inner component classes.

Supported kinds: M-PSK (M a power of two), square M-QAM (M in {4, 16, 64,
256}), and 16-APSK with a 4+12 ring layout.  All alphabets are normalized to
unit average symbol energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedOrder

PSK = "psk"
QAM = "qam"
APSK = "apsk"

# DVB-S2 style 16-APSK: 4 inner + 12 outer points, outer/inner radius ratio.
APSK16_RINGS = ((4, 1.0), (12, 2.57))


def _gray(n: int) -> int:
    return n ^ (n >> 1)


@dataclass(frozen=True)
class Constellation:
    """Immutable modulation alphabet with Gray bit labels.

    points has unit average energy; theta_th is the half-angle of the
    constructive sector (pi/M for M-PSK, pi/N_outer for APSK).
    level_set holds the sorted per-axis amplitudes (QAM only) and
    ring_radii the sorted ring amplitudes (APSK only).
    """

    kind: str
    order: int
    points: np.ndarray
    bit_labels: np.ndarray
    theta_th: float
    ring_radii: np.ndarray = field(default_factory=lambda: np.empty(0))
    level_set: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    def __post_init__(self):
        energy = np.mean(np.abs(self.points) ** 2)
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"average symbol energy {energy} != 1")
        if len(np.unique(np.round(self.points, 12))) != self.order:
            raise ValueError("constellation points not pairwise distinct")


@dataclass(frozen=True)
class ComponentClass:
    """Which constellation-point components may be pushed outward.

    For QAM a per-axis component is outer iff its amplitude equals the
    largest level; for APSK a point is outer iff it lies on the largest
    ring; for PSK every component is outer.
    """

    real_outer: np.ndarray
    imag_outer: np.ndarray
    point_outer: np.ndarray


def _make_psk(order: int) -> Constellation:
    if order < 2 or order & (order - 1):
        raise UnsupportedOrder(f"PSK order must be a power of two >= 2, got {order}")
    if order == 2:
        # the pi/M offset is degenerate at M=2; keep BPSK on the real axis
        points = np.array([1.0 + 0j, -1.0 + 0j])
    else:
        ang = 2 * np.pi * np.arange(order) / order + np.pi / order
        points = np.exp(1j * ang)
    labels = np.array([_gray(m) for m in range(order)])
    return Constellation(PSK, order, points, labels, np.pi / order)


def _make_qam(order: int) -> Constellation:
    if order not in (4, 16, 64, 256):
        raise UnsupportedOrder(f"QAM order must be in {{4,16,64,256}}, got {order}")
    side = int(np.sqrt(order))
    raw = 2 * np.arange(side) - (side - 1)  # {-(side-1), ..., -1, 1, ..., side-1}
    scale = np.sqrt(2 * (order - 1) / 3.0)  # grid average energy
    levels = raw / scale
    re, im = np.meshgrid(levels, levels, indexing="ij")
    points = (re + 1j * im).ravel()  # index = re_idx * side + im_idx
    bpa = int(np.log2(side))
    ax_labels = np.array([_gray(i) for i in range(side)])
    labels = (ax_labels[:, None] << bpa | ax_labels[None, :]).ravel()
    return Constellation(QAM, order, points, labels, np.pi / order, level_set=levels)


# Cyclic Gray label sequences over the 4+12 APSK rings; inner uses the
# 2-bit Gray square, outer walks the remaining twelve 4-bit codes.
_APSK16_INNER_LABELS = (0b0000, 0b0001, 0b0011, 0b0010)
_APSK16_OUTER_LABELS = (
    0b0100, 0b0110, 0b0111, 0b0101, 0b1101, 0b1111,
    0b1110, 0b1010, 0b1011, 0b1001, 0b1000, 0b1100,
)


def _make_apsk(order: int, rings) -> Constellation:
    if rings is None:
        rings = APSK16_RINGS
    counts = tuple(int(c) for c, _ in rings)
    ratios = tuple(float(r) for _, r in rings)
    if order != 16 or counts != (4, 12):
        raise UnsupportedOrder(
            f"APSK supports order 16 with a 4+12 ring layout, got order {order}, rings {counts}"
        )
    base = np.sqrt(order / sum(c * r * r for c, r in zip(counts, ratios)))
    radii = base * np.asarray(ratios)
    points = []
    for count, radius in zip(counts, radii):
        ang = 2 * np.pi * np.arange(count) / count + np.pi / count
        points.append(radius * np.exp(1j * ang))
    points = np.concatenate(points)
    labels = np.array(_APSK16_INNER_LABELS + _APSK16_OUTER_LABELS)
    return Constellation(APSK, order, points, labels, np.pi / counts[-1], ring_radii=radii)


def make_constellation(kind: str, order: int, apsk_rings=None) -> Constellation:
    """Construct a unit-energy constellation of the given kind and order.

    kind is one of "psk", "qam", "apsk".  apsk_rings optionally overrides
    the ring layout as a sequence of (point count, relative radius) pairs.
    Raises UnsupportedOrder when the order is invalid for the kind.
    """
    kind = kind.lower()
    if kind == PSK:
        return _make_psk(order)
    if kind == QAM:
        return _make_qam(order)
    if kind == APSK:
        return _make_apsk(order, apsk_rings)
    raise UnsupportedOrder(f"unknown modulation kind {kind!r}")


def from_name(name: str) -> Constellation:
    """Parse a CLI-style constellation id such as "psk4", "qam16", "apsk16"."""
    name = name.strip().lower()
    for kind in (APSK, PSK, QAM):
        if name.startswith(kind):
            try:
                order = int(name[len(kind):])
            except ValueError:
                raise UnsupportedOrder(f"cannot parse constellation id {name!r}") from None
            return make_constellation(kind, order)
    raise UnsupportedOrder(f"cannot parse constellation id {name!r}")


def detect(y, const: Constellation, t: float = 1.0):
    """Map received samples to symbol indices.

    PSK decides by angle only (no scaling needed); QAM applies per-axis
    threshold tests at midpoints of the t-scaled levels; APSK picks the
    nearest point of the t-scaled constellation.  y may be a scalar or an
    ndarray; the result matches its shape.
    """
    y = np.asarray(y)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    if const.kind == PSK:
        m = const.order
        if m == 2:
            idx = (y.real < 0).astype(np.intp)
        else:
            sector = np.floor((np.angle(y) - 0.0) / (2 * np.pi / m)).astype(np.intp) % m
            # points sit mid-sector thanks to the pi/M offset, so the
            # floor of angle / sector width is already the index
            idx = sector
    elif const.kind == QAM:
        side = int(np.sqrt(const.order))
        mids = t * (const.level_set[:-1] + const.level_set[1:]) / 2
        re_idx = np.searchsorted(mids, y.real)
        im_idx = np.searchsorted(mids, y.imag)
        idx = re_idx * side + im_idx
    else:
        d = np.abs(y[..., None] - t * const.points)
        idx = np.argmin(d, axis=-1)
    return idx[0] if scalar else idx


def classify_components(const: Constellation) -> ComponentClass:
    """Classify per-symbol components as outer (CI-capable) or inner."""
    m = const.order
    if const.kind == PSK:
        ones = np.ones(m, dtype=bool)
        return ComponentClass(ones, ones.copy(), ones.copy())
    if const.kind == QAM:
        top = const.level_set[-1]
        real_outer = np.isclose(np.abs(const.points.real), top)
        imag_outer = np.isclose(np.abs(const.points.imag), top)
        return ComponentClass(real_outer, imag_outer, real_outer & imag_outer)
    outer = np.isclose(np.abs(const.points), const.ring_radii[-1])
    return ComponentClass(outer.copy(), outer.copy(), outer)


def bit_errors(tx_idx, rx_idx, const: Constellation) -> int:
    """Total Hamming distance between the Gray labels of two index arrays."""
    diff = const.bit_labels[np.asarray(tx_idx)] ^ const.bit_labels[np.asarray(rx_idx)]
    table = np.array([bin(v).count("1") for v in range(int(const.bit_labels.max()) + 1)])
    return int(table[diff].sum()) if diff.size else 0
