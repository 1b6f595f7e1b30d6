"""Hardware-efficient transmit-signal design: 1-bit DAC precoding by LP
relaxation, B-bit cyclic coordinate descent on the MSE objective, and
constant-envelope interference minimization by coordinate descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ci
from . import constellations as cst
from . import solvers
from .errors import MetricMismatch, SolverFailure
from .precoding import ci_inverse

BETA_FLOOR = 1e-12  # keeps the MSE scaling factor strictly positive


@dataclass(frozen=True)
class QuantAlphabet:
    """Per-axis DAC output levels, symmetric about zero with peak bound."""

    bits: int
    levels: np.ndarray
    bound: float

    def __post_init__(self):
        lv = np.sort(np.asarray(self.levels, dtype=float))
        if lv.shape != (2 ** self.bits,):
            raise ValueError(f"need 2^{self.bits} levels, got {lv.shape}")
        if np.abs(lv + lv[::-1]).max() > 1e-12:
            raise ValueError("levels must be symmetric about zero")
        if abs(lv.max() - self.bound) > 1e-12:
            raise ValueError("largest level must equal the per-axis bound")
        object.__setattr__(self, "levels", lv)

    @classmethod
    def uniform(cls, bits: int, p0: float, nt: int) -> "QuantAlphabet":
        """2^B uniformly spaced symmetric levels with peak sqrt(p0/(2 Nt))."""
        a = math.sqrt(p0 / (2 * nt))
        half = np.arange(1, 2 ** (bits - 1) + 1)
        pos = (2 * half - 1) / (2 ** bits - 1) * a
        return cls(bits, np.concatenate([-pos[::-1], pos]), a)

    def nearest(self, v: np.ndarray) -> np.ndarray:
        """Elementwise nearest level; exact ties resolve to the upper level."""
        mids = (self.levels[:-1] + self.levels[1:]) / 2
        return self.levels[np.searchsorted(mids, np.asarray(v), side="right")]


def onebit_lp(H, s, p0: float, const: cst.Constellation,
              return_relaxed: bool = False):
    """1-bit DAC CI precoding via the box-relaxed linear program.

    Maximizes the sector level t subject to the PSK CI inequalities with
    the per-axis box |z_i| <= a replacing the 1-bit constraint, then maps
    each coordinate to sign(z_i) * a (zeros break toward +a).  Returns
    (x, achieved level of the quantized signal); with return_relaxed also
    the optimum of the relaxation, an upper bound on any alphabet point's
    level.
    """
    if const.kind != cst.PSK:
        raise MetricMismatch("1-bit LP precoding is defined for PSK")
    H = np.asarray(H)
    s = np.asarray(s)
    k, nt = H.shape
    a = math.sqrt(p0 / (2 * nt))
    n = 2 * nt + 1  # variables [z; t]
    rows, rhs = [], []
    tt = math.tan(const.theta_th)
    for j in range(k):
        c = H[j] / s[j]
        re = np.concatenate([c.real, -c.imag])
        im = np.concatenate([c.imag, c.real])
        if const.order == 2:
            rows.append(np.concatenate([-re, [1.0]]))
            rhs.append(0.0)
        else:
            rows.append(np.concatenate([im - tt * re, [tt]]))
            rhs.append(0.0)
            rows.append(np.concatenate([-im - tt * re, [tt]]))
            rhs.append(0.0)
    box = np.zeros((2 * (n - 1), n))
    box[: n - 1, : n - 1] = np.eye(n - 1)
    box[n - 1:, : n - 1] = -np.eye(n - 1)
    rows.extend(box)
    rhs.extend([a] * (2 * (n - 1)))
    c_obj = np.zeros(n)
    c_obj[-1] = -1.0
    prob = solvers.QpProblem(np.zeros((n, n)), c_obj,
                             Aineq=np.array(rows), bineq=np.array(rhs))
    z, report = solvers.solve_qp(prob)
    if report.status != solvers.OPTIMAL:
        raise SolverFailure(f"1-bit LP ended with status {report.status}")
    zq = np.where(z[: n - 1] >= 0, a, -a)
    x = zq[:nt] + 1j * zq[nt:]
    lam = ci.user_gains(H, x, s)
    if const.order == 2:
        level = float(lam.real.min())
    else:
        level = float((lam.real - np.abs(lam.imag) / tt).min())
    if return_relaxed:
        return x, level, float(z[-1])
    return x, level


def _mse_objective(s, Hx, beta: float, k: int, sigma2: float) -> float:
    return float(np.linalg.norm(s - beta * Hx) ** 2 + k * beta * beta * sigma2)


def bbit_ccd(H, s, p0: float, sigma2: float, alphabet: QuantAlphabet,
             x0: np.ndarray | None = None, max_sweeps: int = 100,
             return_history: bool = False):
    """B-bit DAC precoding by cyclic coordinate descent on the MSE
    ||s - beta H x||^2 + K beta^2 sigma^2.

    Each real coordinate is minimized exactly by enumerating the alphabet
    levels; after every full sweep beta is reset to its closed-form
    minimizer (floored at a tiny positive value).  Starts from the
    per-axis quantized channel-inversion signal unless x0 is given.
    Returns (x, beta, objective) plus the per-update objective log when
    return_history is set.
    """
    H = np.asarray(H)
    s = np.asarray(s)
    k, nt = H.shape
    if x0 is None:
        xt = ci_inverse(H) @ s
        xt = xt * math.sqrt(p0) / np.linalg.norm(xt)
        x0 = alphabet.nearest(xt.real) + 1j * alphabet.nearest(xt.imag)
    x = np.asarray(x0, dtype=complex).copy()
    Hx = H @ x

    def best_beta():
        num = float(np.real(np.vdot(s, Hx)))
        den = float(np.linalg.norm(Hx) ** 2 + k * sigma2)
        return max(BETA_FLOOR, num / den) if den > 0 else BETA_FLOOR

    beta = best_beta()
    obj = _mse_objective(s, Hx, beta, k, sigma2)
    history = [obj]
    levels = alphabet.levels
    for _ in range(max_sweeps):
        changed = False
        for n in range(nt):
            col = H[:, n]
            for part in (0, 1):
                unit = 1.0 if part == 0 else 1.0j
                old = x[n].real if part == 0 else x[n].imag
                resid = s - beta * (Hx - col * (old * unit))
                # ||resid - beta * col * unit * v||^2 over candidate levels v
                lin = -2 * beta * np.real(np.vdot(resid, col * unit))
                quad = beta * beta * float(np.linalg.norm(col) ** 2)
                vals = quad * levels * levels + lin * levels
                v = levels[int(np.argmin(vals))]
                if v != old:
                    Hx = Hx + col * ((v - old) * unit)
                    x[n] = complex(v, x[n].imag) if part == 0 else complex(x[n].real, v)
                    changed = True
                obj = _mse_objective(s, Hx, beta, k, sigma2)
                history.append(obj)
        beta = best_beta()
        obj = _mse_objective(s, Hx, beta, k, sigma2)
        history.append(obj)
        if not changed:
            break
    if return_history:
        return x, beta, obj, history
    return x, beta, obj


@dataclass(frozen=True)
class CePoint:
    """Constant-envelope transmit point: per-antenna phases, common gain."""

    thetas: np.ndarray
    gain: float

    def signal(self) -> np.ndarray:
        return self.gain * np.exp(1j * self.thetas)


def cep_descent(H, amp_targets, s, p0: float, with_gain: bool = False,
                max_sweeps: int = 200, rel_tol: float = 1e-10,
                return_history: bool = False):
    """Constant-envelope interference minimization by coordinate descent.

    Minimizes sum_k |h_k^T x - sqrt(E_k) s_k|^2 over x_n = c e^{j theta_n}
    with c = sqrt(p0 / Nt).  Each phase update is the exact per-coordinate
    minimizer; with_gain additionally refits the common gain by scalar
    least squares, capped at sqrt(p0 / Nt).  The problem is non-convex, so
    the descent runs from a small deterministic set of starting phases
    (matched filter, channel inversion, zero) and keeps the best endpoint.
    Antennas whose channel column is identically zero keep their phase.
    Returns (CePoint, objective).
    """
    H = np.asarray(H)
    s = np.asarray(s)
    k, nt = H.shape
    target = np.sqrt(np.broadcast_to(np.asarray(amp_targets, float), (k,))) * s
    starts = [H.conj().T @ target, np.ones(nt, dtype=complex)]
    if k <= nt:
        starts.insert(1, np.linalg.lstsq(H, target, rcond=None)[0])
    best = None
    for start in starts:
        point, obj, history = _cep_descent_from(
            H, target, p0, np.where(np.abs(start) > 0, np.angle(start), 0.0),
            with_gain, max_sweeps, rel_tol)
        if best is None or obj < best[1]:
            best = (point, obj, history)
    if return_history:
        return best
    return best[0], best[1]


def _cep_descent_from(H, target, p0, thetas, with_gain, max_sweeps, rel_tol):
    k, nt = H.shape
    c_max = math.sqrt(p0 / nt)
    gain = c_max
    v = np.exp(1j * thetas)
    Hv = H @ v

    def objective():
        return float(np.linalg.norm(gain * Hv - target) ** 2)

    obj = objective()
    history = [obj]
    for _ in range(max_sweeps):
        prev = obj
        for n in range(nt):
            col = H[:, n]
            r = target - gain * (Hv - col * v[n])
            w = np.vdot(col, r / gain) if gain > 0 else np.vdot(col, r)
            if np.abs(w) == 0:
                continue  # zero column (or orthogonal residual): phase kept
            new = w / np.abs(w)
            Hv = Hv + col * (new - v[n])
            v[n] = new
            obj = objective()
            history.append(obj)
        if with_gain:
            num = float(np.real(np.vdot(Hv, target)))
            den = float(np.linalg.norm(Hv) ** 2)
            if den > 0:
                gain = min(c_max, max(0.0, num / den))
            obj = objective()
            history.append(obj)
        if prev - obj <= rel_tol * max(prev, 1e-300):
            break
    return CePoint(np.angle(v), gain), obj, history
