"""Constructive-interference geometry: per-user interference scalars,
margin evaluation for every supported CI metric, and the noise-robust /
symbol-error-probability threshold shifts.

Metrics
-------
strict rotation      received signal exactly phase-aligned, gain >= t
non-strict rotation  received signal inside the sector of half-angle
                     theta_th around the symbol, at depth t
symbol scaling       per-component real gains along the two detection
                     boundary directions; outer components >= t, inner
                     components pinned to t
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import constellations as cst
from .errors import (DegenerateBasis, MetricMismatch, OutOfRange,
                     SingularDecomposition, ZeroSymbol)

STRICT = "strict"
NONSTRICT = "nonstrict"
SYMBOL_SCALING = "symbol-scaling"
METRICS = (STRICT, NONSTRICT, SYMBOL_SCALING)

ROBUST_NONE = "none"
ROBUST_NOISE = "noise-robust"
ROBUST_SEP = "sep"

ALIGN_TOL = 1e-9  # |Im(gain)| tolerance for the strict metric


@dataclass(frozen=True)
class CiSpec:
    """CI metric selection plus the operating mode of a precoder.

    mode "power-min" carries per-user SINR targets and the noise variance;
    mode "balancing" carries the symbol-slot power budget p0.
    """

    metric: str
    mode: str
    targets: np.ndarray | None = None
    sigma2: float | None = None
    p0: float | None = None
    robustness: str = ROBUST_NONE
    sep_p: float | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise MetricMismatch(f"unknown metric {self.metric!r}")
        if self.mode == "power-min":
            t = np.asarray(self.targets, dtype=float)
            if np.any(t < 0):
                raise OutOfRange("SINR targets must be nonnegative")
            if self.sigma2 is None or self.sigma2 <= 0:
                raise OutOfRange("power-min mode needs sigma2 > 0")
            object.__setattr__(self, "targets", t)
        elif self.mode == "balancing":
            if self.p0 is None or self.p0 <= 0:
                raise OutOfRange("balancing mode needs p0 > 0")
        else:
            raise OutOfRange(f"unknown mode {self.mode!r}")
        if self.robustness == ROBUST_SEP:
            if self.sep_p is None or not 0 < self.sep_p < 0.5:
                raise OutOfRange("SEP target p must lie in (0, 0.5)")
        elif self.robustness not in (ROBUST_NONE, ROBUST_NOISE):
            raise OutOfRange(f"unknown robustness {self.robustness!r}")

    @classmethod
    def power_min(cls, metric, targets, sigma2, robustness=ROBUST_NONE, sep_p=None):
        return cls(metric, "power-min", targets=np.atleast_1d(np.asarray(targets, float)),
                   sigma2=sigma2, robustness=robustness, sep_p=sep_p)

    @classmethod
    def balancing(cls, metric, p0):
        return cls(metric, "balancing", p0=p0)

    def levels(self, k: int, const: cst.Constellation) -> np.ndarray:
        """Per-user operating levels t_k for power-min mode."""
        targets = np.broadcast_to(self.targets, (k,))
        sigma = math.sqrt(self.sigma2)
        if self.robustness == ROBUST_NONE:
            return np.sqrt(targets * self.sigma2)
        if const.kind != cst.PSK:
            raise MetricMismatch("robust thresholds are defined for PSK only")
        if self.robustness == ROBUST_NOISE:
            return np.array([noise_robust_level(g, sigma, const.order) for g in targets])
        return np.full(k, sep_level(self.sep_p, sigma, const.order))


@dataclass(frozen=True)
class UserGains:
    """Per-user interference scalars of a transmit signal.

    Phase-rotation metrics use the complex gains lam (received = lam_k s_k);
    the symbol-scaling metric uses the real pair gains alpha of shape (K, 2)
    along the symbol decomposition, with symbol_idx recording which
    constellation point each user received (needed to classify components).
    """

    lam: np.ndarray | None = None
    alpha: np.ndarray | None = None
    symbol_idx: np.ndarray | None = None


def user_gains(H: np.ndarray, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Complex per-user gains lam_k = (h_k^T x) / s_k."""
    s = np.asarray(s)
    if np.any(s == 0):
        raise ZeroSymbol("data symbols must be nonzero")
    return (np.asarray(H) @ np.asarray(x)) / s


def decompose_symbol(s: complex, const: cst.Constellation) -> tuple[complex, complex]:
    """Split a constellation point along its two detection-boundary directions.

    QAM uses the real/imaginary split; M-PSK (M > 2) and APSK rotate the
    point by +-theta_th and scale by 1/(2 cos(theta_th)) so the parts lie
    on the sector edges.  BPSK falls back to the real/imag split (the
    rotation basis is degenerate there).  Always satisfies s_a + s_b = s.
    """
    if const.kind == cst.APSK or (const.kind == cst.PSK and const.order > 2):
        c = 2 * math.cos(const.theta_th)
        if abs(c) < 1e-15:
            raise DegenerateBasis("cos(theta_th) vanished")
        rot = np.exp(1j * const.theta_th)
        return s * rot / c, s / rot / c
    return complex(s.real), complex(1j * s.imag)


def _basis_matrix(s: complex, const: cst.Constellation) -> np.ndarray:
    sa, sb = decompose_symbol(s, const)
    return np.array([[sa.real, sb.real], [sa.imag, sb.imag]])


def component_gains(H: np.ndarray, x: np.ndarray, s: np.ndarray,
                    const: cst.Constellation) -> np.ndarray:
    """Real pair gains (alpha_a, alpha_b) per user, shape (K, 2).

    Solves the 2x2 real system alpha_a s_a + alpha_b s_b = h_k^T x for each
    user.  Raises SingularDecomposition when the basis is singular (BPSK).
    """
    r = np.asarray(H) @ np.asarray(x)
    s = np.atleast_1d(np.asarray(s))
    out = np.empty((len(s), 2))
    for k, (rk, sk) in enumerate(zip(np.atleast_1d(r), s)):
        m = _basis_matrix(complex(sk), const)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) < 1e-14:
            raise SingularDecomposition(f"degenerate decomposition for symbol {sk}")
        out[k, 0] = (m[1, 1] * rk.real - m[0, 1] * rk.imag) / det
        out[k, 1] = (-m[1, 0] * rk.real + m[0, 0] * rk.imag) / det
    return out


def _sector_margin(lam: np.ndarray, t, theta: float, order: int) -> np.ndarray:
    if order == 2:
        return lam.real - t
    return (lam.real - t) * math.tan(theta) - np.abs(lam.imag)


def ci_margin(gains: UserGains, const: cst.Constellation, spec: CiSpec, t) -> np.ndarray:
    """Signed per-user CI margins at operating level t (scalar or (K,)).

    margin_k >= 0 exactly when user k's CI condition for spec.metric holds.
    Inner components/points contribute -|gain - t| (their equality
    requirement), outer components their slack.
    """
    t = np.asarray(t, dtype=float)
    metric = spec.metric
    if metric in (STRICT, NONSTRICT):
        if gains.lam is None:
            raise MetricMismatch("phase-rotation metrics need complex gains")
        lam = np.atleast_1d(gains.lam)
        if const.kind == cst.QAM:
            raise MetricMismatch("phase-rotation metrics do not apply to QAM")
        if const.kind == cst.APSK:
            if metric == STRICT:
                raise MetricMismatch("strict rotation does not apply to APSK")
            return _apsk_margin(lam, gains, const, t)
        if metric == STRICT:
            slack = lam.real - t
            return np.where(np.abs(lam.imag) <= ALIGN_TOL, slack,
                            np.minimum(slack, -np.abs(lam.imag)))
        return _sector_margin(lam, t, const.theta_th, const.order)

    # symbol scaling
    if const.kind == cst.APSK:
        if gains.lam is None:
            raise MetricMismatch("APSK margins need complex gains")
        return _apsk_margin(np.atleast_1d(gains.lam), gains, const, t)
    if const.kind == cst.PSK and const.order == 2:
        if gains.lam is None:
            raise MetricMismatch("BPSK symbol scaling delegates to complex gains")
        return np.atleast_1d(gains.lam).real - t
    if gains.alpha is None:
        raise MetricMismatch("symbol scaling needs pair gains")
    alpha = np.atleast_2d(gains.alpha)
    tk = np.broadcast_to(t, (alpha.shape[0],))
    if const.kind == cst.PSK:
        return np.min(alpha, axis=1) - tk
    if gains.symbol_idx is None:
        raise MetricMismatch("QAM margins need the transmitted symbol indices")
    cls = cst.classify_components(const)
    idx = np.asarray(gains.symbol_idx)
    m_re = np.where(cls.real_outer[idx], alpha[:, 0] - tk, -np.abs(alpha[:, 0] - tk))
    m_im = np.where(cls.imag_outer[idx], alpha[:, 1] - tk, -np.abs(alpha[:, 1] - tk))
    return np.minimum(m_re, m_im)


def _apsk_margin(lam, gains: UserGains, const, t) -> np.ndarray:
    if gains.symbol_idx is None:
        raise MetricMismatch("APSK margins need the transmitted symbol indices")
    outer = cst.classify_components(const).point_outer[np.asarray(gains.symbol_idx)]
    sector = _sector_margin(lam, t, const.theta_th, const.order)
    return np.where(outer, sector, -np.abs(lam - t))


def noise_robust_level(gamma: float, sigma: float, order: int) -> float:
    """Threshold shift turning the noise-robust condition into the plain
    sector condition: gamma * sigma / sin(pi/M)."""
    if gamma < 0 or sigma <= 0 or order < 2:
        raise OutOfRange("need gamma >= 0, sigma > 0, M >= 2")
    return gamma * sigma / math.sin(math.pi / order)


def sep_level(p: float, sigma: float, order: int) -> float:
    """Threshold shift for a per-symbol error-probability target p."""
    if not 0 < p <= 0.5:
        raise OutOfRange("SEP target p must lie in (0, 0.5]")
    return erfinv(1 - 2 * p) * sigma / math.sin(math.pi / order)


def erfinv(y: float) -> float:
    """Inverse error function via Newton iteration on math.erf.

    Seeded with Winitzki's rational approximation; three to four Newton
    steps give relative error below 1e-14 on (-1, 1).
    """
    if not -1.0 < y < 1.0:
        if y == 1.0 or y == -1.0:
            raise OutOfRange("erfinv is unbounded at +-1")
        raise OutOfRange(f"erfinv domain is (-1, 1), got {y}")
    if y == 0.0:
        return 0.0
    a = 0.147
    ln1my2 = math.log1p(-y * y)
    u = 2.0 / (math.pi * a) + ln1my2 / 2.0
    x = math.copysign(math.sqrt(math.sqrt(u * u - ln1my2 / a) - u), y)
    two_over_sqrt_pi = 2.0 / math.sqrt(math.pi)
    for _ in range(6):
        err = math.erf(x) - y
        if err == 0.0:
            break
        step = err / (two_over_sqrt_pi * math.exp(-x * x))
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    return x
