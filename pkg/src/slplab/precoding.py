"""Transmit-signal constructions: symbol-level ZF/RZF/MRT baselines,
power minimization via uplink-downlink duality, constructive power
minimization (CPM), constructive SINR balancing through the symbol-scaling
NNLS route, strict-rotation CI vector perturbation, and the multicast
reformulation.

Every operation works on one symbol slot (one channel use) and is pure;
slots are independent and may run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ci
from . import constellations as cst
from . import solvers
from .errors import (InfeasibleTargets, MetricMismatch, NotConverged,
                     SingularChannel, SolverFailure, ZeroDirection)


@dataclass(frozen=True)
class PrecodeResult:
    """One precoded symbol slot.

    objective is the transmit power ||x||^2 for power-minimization
    precoders and the achieved CI level t for balancing precoders.
    """

    x: np.ndarray
    gains: ci.UserGains
    objective: float
    report: solvers.SolveReport


def ci_inverse(H: np.ndarray) -> np.ndarray:
    """Channel inversion operator G = H^H (H H^H)^{-1}, Nt x K.

    Falls back to the SVD pseudo-inverse (singular values below
    1e-12 * sigma_max truncated), which covers the overloaded K > Nt case.
    Raises SingularChannel when an expected-full-rank channel is too
    ill-conditioned.
    """
    H = np.asarray(H)
    k, nt = H.shape
    u, sv, vh = np.linalg.svd(H, full_matrices=False)
    if k <= nt and sv[-1] <= 1e-12 * sv[0]:
        raise SingularChannel(f"condition number {sv[0] / max(sv[-1], 1e-300):.3e}")
    keep = sv > 1e-12 * sv[0]
    return (vh[keep].conj().T / sv[keep]) @ u[:, keep].conj().T


def symbol_indices(s: np.ndarray, const: cst.Constellation) -> np.ndarray:
    """Indices of the constellation points closest to each entry of s."""
    return np.argmin(np.abs(np.asarray(s)[:, None] - const.points), axis=1)


def _re_row(c: np.ndarray) -> np.ndarray:
    return np.concatenate([c.real, -c.imag])


def _im_row(c: np.ndarray) -> np.ndarray:
    return np.concatenate([c.imag, c.real])


def _closed_form_report() -> solvers.SolveReport:
    return solvers.SolveReport(solvers.OPTIMAL, 0, kkt_residual=0.0)


def zf_sym(H, s, p0: float, G: np.ndarray | None = None) -> PrecodeResult:
    """Symbol-level zero forcing: x = sqrt(p0) G s / ||G s||."""
    if G is None:
        G = ci_inverse(H)
    xt = G @ np.asarray(s)
    beta = float(np.linalg.norm(xt))
    if beta == 0:
        raise ZeroDirection("G s vanished")
    x = math.sqrt(p0) * xt / beta
    lam = ci.user_gains(H, x, s)
    return PrecodeResult(x, ci.UserGains(lam=lam), float(lam.real.min()),
                         _closed_form_report())


def rzf_sym(H, s, p0: float, sigma2: float) -> PrecodeResult:
    """Regularized ZF: direction H^H (H H^H + (K sigma2/p0) I)^{-1} s."""
    H = np.asarray(H)
    k = H.shape[0]
    gram = H @ H.conj().T + (k * sigma2 / p0) * np.eye(k)
    xt = H.conj().T @ np.linalg.solve(gram, np.asarray(s))
    beta = float(np.linalg.norm(xt))
    if beta == 0:
        raise ZeroDirection("regularized direction vanished")
    x = math.sqrt(p0) * xt / beta
    lam = ci.user_gains(H, x, s)
    return PrecodeResult(x, ci.UserGains(lam=lam), float(lam.real.min()),
                         _closed_form_report())


def mrt_sym(H, s, p0: float) -> PrecodeResult:
    """Maximum ratio transmission: x = sqrt(p0) H^H s / ||H^H s||."""
    H = np.asarray(H)
    xt = H.conj().T @ np.asarray(s)
    beta = float(np.linalg.norm(xt))
    if beta == 0:
        raise ZeroDirection("H^H s = 0")
    x = math.sqrt(p0) * xt / beta
    lam = ci.user_gains(H, x, s)
    return PrecodeResult(x, ci.UserGains(lam=lam), float(lam.real.min()),
                         _closed_form_report())


def pm_duality(H, targets, sigma2: float, max_iter: int = 500,
               tol: float = 1e-10) -> tuple[np.ndarray, float]:
    """Block-level power minimization under per-user SINR targets.

    Solved through the virtual-uplink fixed point on powers q with the
    conjugated channels g_k = h_k^*, then the downlink powers from the
    K x K system that makes every SINR meet its target with equality.
    Returns (W, total transmit power) with W of shape (Nt, K).
    """
    H = np.asarray(H)
    k, nt = H.shape
    if k > nt:
        raise SingularChannel("power minimization needs K <= Nt")
    targets = np.broadcast_to(np.asarray(targets, dtype=float), (k,)).copy()
    if np.any(targets < 0):
        raise InfeasibleTargets("negative SINR target")
    active = targets > 0
    W = np.zeros((nt, k), dtype=complex)
    if not active.any():
        return W, 0.0
    G = H.conj()  # rows g_k^T; virtual uplink channel of user k is g_k
    q = np.zeros(k)
    for _ in range(max_iter):
        C = sigma2 * np.eye(nt) + (G.T * q) @ G.conj()
        cg = np.linalg.solve(C, G.T)          # columns C^{-1} g_k
        quad = np.einsum("ij,ji->i", G.conj(), cg).real
        # leave-one-out via Sherman-Morrison on the full covariance
        denom = 1.0 - q * quad
        loo = quad / np.where(denom > 1e-300, denom, 1e-300)
        q_new = np.where(active, targets / np.maximum(loo, 1e-300), 0.0)
        if not np.all(np.isfinite(q_new)) or q_new.max(initial=0.0) > 1e14:
            raise InfeasibleTargets("uplink power fixed point diverged")
        delta = np.linalg.norm(q_new - q) / max(np.linalg.norm(q_new), 1e-300)
        q = q_new
        if delta < tol:
            break
    else:
        raise NotConverged(f"no fixed point after {max_iter} iterations")

    C = sigma2 * np.eye(nt) + (G.T * q) @ G.conj()
    U = np.linalg.solve(C, G.T)
    U = U / np.linalg.norm(U, axis=0, keepdims=True)
    gains = np.abs(H @ U) ** 2                # gains[k, i] = |h_k^T u_i|^2
    idx = np.where(active)[0]
    a = gains[np.ix_(idx, idx)]
    m = -a.copy()
    np.fill_diagonal(m, np.diag(a) / targets[idx])
    p = np.linalg.solve(m, np.full(len(idx), sigma2))
    if np.any(p < -1e-9):
        raise InfeasibleTargets("negative downlink power")
    W[:, idx] = U[:, idx] * np.sqrt(np.maximum(p, 0.0))
    return W, float(np.maximum(p, 0.0).sum())


def _sector_rows(c: np.ndarray, theta: float, order: int):
    """Inequality rows (A z <= b per unit of level t) for the sector metric."""
    re, im = _re_row(c), _im_row(c)
    if order == 2:
        return np.array([-re]), np.array([-1.0])
    tt = math.tan(theta)
    return np.array([im - tt * re, -im - tt * re]), np.array([-tt, -tt])


def _alpha_rows(h_row: np.ndarray, sk: complex, const) -> np.ndarray:
    """Rows mapping z to the two component gains of user k."""
    m = np.linalg.inv(np.array(ci._basis_matrix(sk, const)))
    base = np.vstack([_re_row(h_row), _im_row(h_row)])
    return m @ base


def _cpm_constraints(H, s, const, metric: str, t: np.ndarray):
    """Assemble (Aineq, bineq, Aeq, beq) for the CPM program over z."""
    H = np.asarray(H)
    k = H.shape[0]
    idx = symbol_indices(s, const)
    cls = cst.classify_components(const)
    ineq_a, ineq_b, eq_a, eq_b = [], [], [], []
    for j in range(k):
        c = H[j] / s[j]
        if const.kind == cst.PSK and metric in (ci.STRICT, ci.NONSTRICT):
            if metric == ci.STRICT:
                eq_a.append(_im_row(c))
                eq_b.append(0.0)
                ineq_a.append(-_re_row(c))
                ineq_b.append(-t[j])
            else:
                rows, rhs = _sector_rows(c, const.theta_th, const.order)
                ineq_a.extend(rows)
                ineq_b.extend(t[j] * rhs)
        elif const.kind == cst.APSK:
            if metric == ci.STRICT:
                raise MetricMismatch("strict rotation does not apply to APSK")
            if cls.point_outer[idx[j]]:
                rows, rhs = _sector_rows(c, const.theta_th, const.order)
                ineq_a.extend(rows)
                ineq_b.extend(t[j] * rhs)
            else:
                eq_a.append(_re_row(c))
                eq_b.append(t[j])
                eq_a.append(_im_row(c))
                eq_b.append(0.0)
        elif metric == ci.SYMBOL_SCALING:
            if const.kind == cst.PSK and const.order == 2:
                ineq_a.append(-_re_row(c))
                ineq_b.append(-t[j])
                continue
            rows = _alpha_rows(H[j], complex(s[j]), const)
            outer = ((True, True) if const.kind == cst.PSK else
                     (cls.real_outer[idx[j]], cls.imag_outer[idx[j]]))
            for row, is_outer in zip(rows, outer):
                if is_outer:
                    ineq_a.append(-row)
                    ineq_b.append(-t[j])
                else:
                    eq_a.append(row)
                    eq_b.append(t[j])
        else:
            raise MetricMismatch(f"metric {metric!r} not valid for {const.kind}")
    pack = lambda rows, rhs: (np.array(rows), np.array(rhs)) if rows else (None, None)
    return *pack(ineq_a, ineq_b), *pack(eq_a, eq_b)


def _gains_for(H, x, s, const, metric: str) -> ci.UserGains:
    idx = symbol_indices(s, const)
    if metric == ci.SYMBOL_SCALING and const.kind != cst.APSK \
            and not (const.kind == cst.PSK and const.order == 2):
        return ci.UserGains(alpha=ci.component_gains(H, x, s, const), symbol_idx=idx)
    return ci.UserGains(lam=ci.user_gains(H, x, s), symbol_idx=idx)


def cpm(H, s, spec: ci.CiSpec, const: cst.Constellation) -> PrecodeResult:
    """Constructive power minimization for the metric selected in spec.

    Minimizes the symbol-slot transmit power subject to each user's CI
    condition at level t_k (SINR target and robustness mode folded into
    t_k).  Solved as a QP over the real-stacked transmit vector.
    """
    if spec.mode != "power-min":
        raise MetricMismatch("cpm needs a power-min CiSpec")
    H = np.asarray(H)
    s = np.asarray(s)
    k, nt = H.shape
    t = spec.levels(k, const)
    # solve at a normalized level and rescale (the program is positively
    # homogeneous in t); normalizing by the channel-inversion solution norm
    # keeps the solver's absolute certificates meaningful even on badly
    # conditioned channels, where the optimum dwarfs the targets
    zf_scale = float(np.linalg.norm(np.linalg.lstsq(H, t * s, rcond=None)[0]))
    t_scale = max(1.0, float(t.max(initial=0.0)), zf_scale)
    ineq_a, ineq_b, eq_a, eq_b = _cpm_constraints(H, s, const, spec.metric,
                                                  t / t_scale)
    prob = solvers.QpProblem(2 * np.eye(2 * nt), np.zeros(2 * nt),
                             Aeq=eq_a, beq=eq_b, Aineq=ineq_a, bineq=ineq_b)
    z, report = solvers.solve_qp(prob)
    if report.status != solvers.OPTIMAL:
        raise SolverFailure(f"cpm solve ended with status {report.status}")
    z = t_scale * z
    x = z[:nt] + 1j * z[nt:]
    return PrecodeResult(x, _gains_for(H, x, s, const, spec.metric),
                         float(z @ z), report)


def multicast_equivalent(H, s, targets, sigma2: float,
                         const: cst.Constellation) -> tuple[PrecodeResult, np.ndarray]:
    """Power minimization through the equivalent multicast program.

    Rewrites the non-strict PSK CPM over the modified channels h_k / s_k,
    solves it, and recovers the per-user precoder columns w_k = x / (K s_k),
    which satisfy sum_k w_k s_k = x exactly.
    """
    if const.kind != cst.PSK:
        raise MetricMismatch("multicast reformulation requires PSK")
    H = np.asarray(H)
    s = np.asarray(s)
    k, nt = H.shape
    t = np.sqrt(np.broadcast_to(np.asarray(targets, float), (k,)) * sigma2)
    zf_scale = float(np.linalg.norm(np.linalg.lstsq(H, t * s, rcond=None)[0]))
    t_scale = max(1.0, float(t.max(initial=0.0)), zf_scale)
    h_mod = H / s[:, None]
    ineq_a, ineq_b = [], []
    for j in range(k):
        rows, rhs = _sector_rows(h_mod[j], const.theta_th, const.order)
        ineq_a.extend(rows)
        ineq_b.extend(t[j] / t_scale * rhs)
    prob = solvers.QpProblem(2 * np.eye(2 * nt), np.zeros(2 * nt),
                             Aineq=np.array(ineq_a), bineq=np.array(ineq_b))
    z, report = solvers.solve_qp(prob)
    if report.status != solvers.OPTIMAL:
        raise SolverFailure(f"multicast solve ended with status {report.status}")
    z = t_scale * z
    x = z[:nt] + 1j * z[nt:]
    W = x[:, None] / (k * s[None, :])
    result = PrecodeResult(x, ci.UserGains(lam=ci.user_gains(H, x, s)),
                           float(z @ z), report)
    return result, W


def _scaling_design(G, s, const, alpha0: float):
    """Complex column design of the symbol-scaling perturbation problem.

    Returns (columns C of shape (Nt, 2K), free column flags).  Inner
    components and identically-zero columns are held at alpha0 (folded
    into the offset); the rest are the NNLS variables.
    """
    s = np.asarray(s)
    k = len(s)
    idx = symbol_indices(s, const)
    cls = cst.classify_components(const)
    cols = np.empty((G.shape[0], 2 * k), dtype=complex)
    free = np.zeros(2 * k, dtype=bool)
    for j in range(k):
        sa, sb = ci.decompose_symbol(complex(s[j]), const)
        cols[:, 2 * j] = G[:, j] * sa
        cols[:, 2 * j + 1] = G[:, j] * sb
        if const.kind == cst.QAM:
            out = (cls.real_outer[idx[j]], cls.imag_outer[idx[j]])
        elif const.kind == cst.APSK:
            out = (cls.point_outer[idx[j]],) * 2
        else:
            out = (True, True)
        free[2 * j] = out[0] and abs(sa) > 1e-14
        free[2 * j + 1] = out[1] and abs(sb) > 1e-14
    return cols, free


def csb_symbol_scaling(H, s, p0: float, const: cst.Constellation,
                       G: np.ndarray | None = None,
                       alpha0: float = 1.0) -> PrecodeResult:
    """Constructive SINR balancing via the symbol-scaling NNLS route.

    Builds the perturbed channel-inversion signal x~ = C (alpha0 + u) with
    u >= 0 over the outer components, minimizes ||x~|| by NNLS, and
    normalizes to the power budget.  The achieved level
    t = alpha0 sqrt(p0) / ||x~|| equals the optimum of the matching
    balancing problem.

    The fixed-reception design needs H G = I, so the overloaded K > Nt
    case goes through the inverse problem instead: minimum power at unit
    level, rescaled to the budget, which the balancing problem equals by
    positive homogeneity.
    """
    H = np.asarray(H)
    s = np.asarray(s)
    if H.shape[0] > H.shape[1]:
        return _csb_overloaded(H, s, p0, const)
    if G is None:
        G = ci_inverse(H)
    cols, free = _scaling_design(G, s, const, alpha0)
    offset = alpha0 * cols.sum(axis=1)
    if free.any():
        a_free = cols[:, free]
        A = np.vstack([a_free.real, a_free.imag])
        b = -np.concatenate([offset.real, offset.imag])
        u, report = solvers.solve_nnls(solvers.NnlsProblem(A, b))
        if report.status != solvers.OPTIMAL:
            raise SolverFailure(f"csb NNLS ended with status {report.status}")
    else:
        u = np.zeros(0)
        report = _closed_form_report()
    phi = np.full(2 * len(s), alpha0)
    phi[free] += u
    xt = cols @ phi
    beta = float(np.linalg.norm(xt))
    if beta == 0:
        raise ZeroDirection("scaling design collapsed to zero")
    x = math.sqrt(p0) * xt / beta
    t = alpha0 * math.sqrt(p0) / beta
    return PrecodeResult(x, _gains_for(H, x, s, const, ci.SYMBOL_SCALING),
                         t, report)


def _csb_overloaded(H, s, p0: float, const: cst.Constellation) -> PrecodeResult:
    """Balancing through its inverse problem: the minimum-power signal at
    unit level, scaled out to the power budget."""
    k, nt = H.shape
    ineq_a, ineq_b, eq_a, eq_b = _cpm_constraints(H, s, const,
                                                  ci.SYMBOL_SCALING, np.ones(k))
    prob = solvers.QpProblem(2 * np.eye(2 * nt), np.zeros(2 * nt),
                             Aeq=eq_a, beq=eq_b, Aineq=ineq_a, bineq=ineq_b)
    z, report = solvers.solve_qp(prob)
    if report.status != solvers.OPTIMAL:
        raise SolverFailure(f"overloaded csb ended with status {report.status}")
    beta = float(np.linalg.norm(z))
    if beta == 0:
        raise ZeroDirection("unit-level program collapsed to zero")
    x = math.sqrt(p0) / beta * (z[:nt] + 1j * z[nt:])
    return PrecodeResult(x, _gains_for(H, x, s, const, ci.SYMBOL_SCALING),
                         math.sqrt(p0) / beta, report)


def civp_strict(H, s, p0: float, G: np.ndarray | None = None) -> PrecodeResult:
    """Strict-rotation CI vector perturbation.

    Minimizes ||G diag(s) (1 + u)|| over u >= 0 by NNLS; the noiseless
    reception is (1 + u_k) s_k sqrt(p0) / beta, phase-aligned by
    construction.
    """
    H = np.asarray(H)
    s = np.asarray(s)
    if G is None:
        G = ci_inverse(H)
    cols = G * s[None, :]
    A = np.vstack([cols.real, cols.imag])
    offset = cols.sum(axis=1)
    b = -np.concatenate([offset.real, offset.imag])
    u, report = solvers.solve_nnls(solvers.NnlsProblem(A, b))
    if report.status != solvers.OPTIMAL:
        raise SolverFailure(f"ci-vp NNLS ended with status {report.status}")
    xt = cols @ (1.0 + u)
    beta = float(np.linalg.norm(xt))
    if beta == 0:
        raise ZeroDirection("perturbation design collapsed to zero")
    x = math.sqrt(p0) * xt / beta
    lam = ci.user_gains(H, x, s)
    return PrecodeResult(x, ci.UserGains(lam=lam), float(lam.real.min()), report)
