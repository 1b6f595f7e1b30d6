"""Small dense optimization kernels: nonnegative least squares and convex
quadratic programming with linear equality/inequality constraints (linear
programs run through the same path with zero curvature).

Both solvers are deterministic and return a KKT certificate with every
optimal solution; the certificates are part of the contract and are
verified by the test suite rather than treated as diagnostics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"


@dataclass(frozen=True)
class SolverTolerances:
    """All kernel tolerances in one place."""

    nnls_kkt: float = 1e-8          # gradient slack at the NNLS solution
    nnls_positive: float = 1e-10    # x_i above this counts as strictly positive
    qp_feas: float = 1e-9           # equality/inequality feasibility
    qp_stationarity: float = 1e-7   # dual residual at the QP solution
    qp_complementarity: float = 1e-7
    qp_converge: float = 1e-10      # interior-point duality/residual target
    ridge: float = 1e-12            # Tikhonov floor on the KKT system
    infeas_level: float = 1e-6      # primal residual that must eventually clear
    infeas_patience: int = 20       # iterations without progress before Infeasible
    qp_max_iter: int = 100


DEFAULT_TOL = SolverTolerances()


@dataclass(frozen=True)
class NnlsProblem:
    """min ||A x - b||_2 subject to x >= 0."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise ValueError(f"A is {A.shape}, b is {b.shape}")
        if not (np.isfinite(A).all() and np.isfinite(b).all()):
            raise ValueError("non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class QpProblem:
    """min (1/2) z^T Q z + c^T z  s.t.  Aeq z = beq, Aineq z <= bineq.

    Q must be symmetric positive semidefinite (floor -1e-9 on eigenvalues).
    """

    Q: np.ndarray
    c: np.ndarray
    Aeq: np.ndarray | None = None
    beq: np.ndarray | None = None
    Aineq: np.ndarray | None = None
    bineq: np.ndarray | None = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        c = np.asarray(self.c, dtype=float)
        n = c.shape[0]
        if Q.shape != (n, n):
            raise ValueError(f"Q is {Q.shape}, c is {c.shape}")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12:
            raise ValueError("Q not symmetric")
        try:
            sla.cholesky(Q + 1e-9 * np.eye(n), lower=True)
        except sla.LinAlgError:
            floor = float(np.min(sla.eigvalsh(Q)))
            if floor < -1e-9:
                raise ValueError(f"Q not PSD (eigenvalue floor {floor})") from None
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", c)
        for name, mat, vec in (("Aeq", self.Aeq, self.beq), ("Aineq", self.Aineq, self.bineq)):
            m = np.zeros((0, n)) if mat is None else np.atleast_2d(np.asarray(mat, float))
            v = np.zeros(0) if vec is None else np.atleast_1d(np.asarray(vec, float))
            if m.shape != (v.shape[0], n):
                raise ValueError(f"{name} is {m.shape}, rhs is {v.shape}")
            object.__setattr__(self, name, m)
            object.__setattr__(self, "beq" if name == "Aeq" else "bineq", v)

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass
class SolveReport:
    status: str
    iterations: int
    kkt_residual: float | None = None
    eq_dual: np.ndarray | None = None
    ineq_dual: np.ndarray | None = None


def solve_nnls(p: NnlsProblem, tol: SolverTolerances = DEFAULT_TOL,
               normal: tuple[np.ndarray, np.ndarray] | None = None):
    """Lawson-Hanson active set on the normal equations (fast updates).

    normal optionally supplies precomputed (A^T A, A^T b); callers that
    build many problems sharing structure can pass it to skip the Gram
    product.  Returns (x, SolveReport).
    """
    if normal is None:
        ata = p.A.T @ p.A
        atb = p.A.T @ p.b
    else:
        ata, atb = normal
    n = atb.shape[0]
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = atb.copy()  # gradient of -objective/2: A^T(b - Ax)
    grad_tol = max(tol.nnls_kkt * 1e-2, 1e-12 * max(1.0, np.abs(atb).max(initial=0.0)))
    max_iter = max(10 * n, 30)
    iters = 0
    while iters < max_iter:
        candidates = np.where(~passive & (w > grad_tol))[0]
        if candidates.size == 0:
            break
        iters += 1
        passive[candidates[np.argmax(w[candidates])]] = True
        while True:
            idx = np.where(passive)[0]
            s = _solve_psd(ata[np.ix_(idx, idx)], atb[idx])
            if np.all(s > 0):
                x[:] = 0.0
                x[idx] = s
                break
            # step toward s until the first passive coordinate hits zero
            xp = x[idx]
            mask = s <= 0
            ratios = xp[mask] / (xp[mask] - s[mask])
            step = ratios.min()
            x[idx] = xp + step * (s - xp)
            hit = idx[mask][ratios <= step]  # coordinates pinned at zero
            x[hit] = 0.0
            passive[hit] = False
            iters += 1
            if iters >= max_iter:
                return x, SolveReport(MAX_ITER, iters)
        w = atb - ata @ x
    grad = ata @ x - atb  # = A^T(Ax - b)
    res = max(np.abs(grad[x > tol.nnls_positive]).max(initial=0.0),
              float(np.maximum(-grad[x <= tol.nnls_positive], 0.0).max(initial=0.0)))
    return x, SolveReport(OPTIMAL, iters, kkt_residual=res)


def _solve_psd(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        c, low = sla.cho_factor(m, lower=True, check_finite=False)
        return sla.cho_solve((c, low), rhs, check_finite=False)
    except sla.LinAlgError:
        # rank-deficient passive set: ridge keeps the step well defined
        return np.linalg.solve(m + 1e-10 * np.trace(m) / max(len(rhs), 1) * np.eye(len(rhs)), rhs)


def solve_qp(p: QpProblem, tol: SolverTolerances = DEFAULT_TOL):
    """Primal-dual interior point with Mehrotra predictor-corrector.

    Equality constraints are eliminated through a null-space basis first,
    so the interior-point core only ever sees inequalities; equality duals
    are recovered from stationarity afterwards.  Zero-curvature problems
    (LPs) run through the same path with the Tikhonov floor keeping the
    reduced system factorizable.  Returns (z, SolveReport); optimal
    reports carry the duals and the realized KKT residual.
    """
    n, q, pe = p.n, p.bineq.shape[0], p.beq.shape[0]
    Q, c, G, h, A, b = p.Q, p.c, p.Aineq, p.bineq, p.Aeq, p.beq

    if q == 0:
        z, nu = _solve_kkt_eq(Q + tol.ridge * np.eye(n), c, A, b, tol)
        res = _kkt_residual(p, z, nu, np.zeros(0))
        return z, SolveReport(OPTIMAL, 1, kkt_residual=res, eq_dual=nu,
                              ineq_dual=np.zeros(0))

    if pe:
        z0, *_ = np.linalg.lstsq(A, b, rcond=None)
        if np.abs(A @ z0 - b).max(initial=0.0) > tol.qp_feas:
            return z0, SolveReport(INFEASIBLE, 0)
        _, sv, vh = np.linalg.svd(A)
        rank = int(np.sum(sv > 1e-12 * sv[0])) if sv.size else 0
        N = vh[rank:].T
        if N.shape[1] == 0:
            z = z0
            mu = np.zeros(q)
            if (G @ z - h).max(initial=0.0) > tol.qp_feas:
                return z, SolveReport(INFEASIBLE, 0)
            nu = _recover_eq_dual(p, z, mu)
            res = _kkt_residual(p, z, nu, mu)
            return z, SolveReport(OPTIMAL, 0, kkt_residual=res, eq_dual=nu,
                                  ineq_dual=mu)
        y, mu, status, iters = _ipm_ineq(N.T @ Q @ N, N.T @ (Q @ z0 + c),
                                         G @ N, h - G @ z0, tol)
        z = z0 + N @ y
    else:
        z, mu, status, iters = _ipm_ineq(Q, c, G, h, tol)

    nu = _recover_eq_dual(p, z, mu) if pe else np.zeros(0)
    res = _kkt_residual(p, z, nu, mu)
    eq_res = np.abs(A @ z - b).max(initial=0.0) if pe else 0.0
    ineq_res = (G @ z - h).max(initial=0.0)
    if res <= tol.qp_stationarity and eq_res <= tol.qp_feas and ineq_res <= tol.qp_feas:
        return z, SolveReport(OPTIMAL, iters, kkt_residual=res, eq_dual=nu,
                              ineq_dual=mu)
    # converged loosely but the certificate failed: report honestly
    return z, SolveReport(MAX_ITER if status == OPTIMAL else status, iters)


def _ipm_ineq(Q, c, G, h, tol: SolverTolerances):
    """Mehrotra core for min (1/2)z^T Q z + c^T z s.t. G z <= h.

    Uses separate primal/dual step lengths and falls back to a heavily
    centered direction whenever the second-order corrector would grow the
    duality gap (the classic cycling failure of the plain heuristic).
    Returns (z, mu, status, iterations), keeping the best iterate seen.
    """
    n, q = c.shape[0], h.shape[0]
    reg = tol.ridge * np.eye(n)
    z = np.linalg.solve(Q + np.eye(n), -c)
    s = h - G @ z
    s += max(0.0, -1.5 * s.min(initial=0.0)) + 1.0
    mu = np.ones(q)
    scale = 1.0 + max(np.abs(c).max(initial=0.0), np.abs(h).max(initial=0.0))
    best = (np.inf, z.copy(), mu.copy())
    best_primal = np.inf
    stall = 0
    status = MAX_ITER
    it = 0
    while it < tol.qp_max_iter:
        it += 1
        r_d = Q @ z + c + G.T @ mu
        r_g = G @ z + s - h
        gap = float(s @ mu) / q
        primal = np.abs(r_g).max(initial=0.0)
        dual = np.abs(r_d).max(initial=0.0)
        if not (np.isfinite(primal) and np.isfinite(dual) and np.isfinite(gap)):
            break
        merit = max(primal, dual, gap)
        if merit < best[0]:
            best = (merit, z.copy(), mu.copy())
        # the dual residual floors near eps * ||G^T mu|| no matter how small
        # the gap gets, so it is measured relative to the multipliers but
        # still has to clear the stationarity certificate
        dual_cap = max(tol.qp_converge * scale,
                       min(tol.qp_converge * scale * np.abs(mu).max(initial=0.0),
                           0.5 * tol.qp_stationarity))
        if primal <= tol.qp_converge * scale and gap <= tol.qp_converge * scale \
                and dual <= dual_cap:
            status = OPTIMAL
            break
        if np.abs(z).max(initial=0.0) > 1e12:
            status = UNBOUNDED
            break
        if primal > tol.infeas_level:
            stall = stall + 1 if primal > 0.9 * best_primal else 0
            if stall >= tol.infeas_patience:
                status = INFEASIBLE
                break
        best_primal = min(best_primal, primal)

        w = mu / s
        m = Q + (G.T * w) @ G + reg
        if not np.isfinite(m).all():
            break
        try:
            with warnings.catch_warnings():
                # exactly singular m is handled by the polish fallback
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu, piv = sla.lu_factor(m, check_finite=False)
        except sla.LinAlgError:
            break

        def direction(r_c):
            dz = sla.lu_solve((lu, piv), -r_d - G.T @ (w * r_g - r_c / s),
                              check_finite=False)
            ds = -r_g - G @ dz
            dmu = -(r_c + mu * ds) / s
            return dz, ds, dmu

        def gap_after(d, eta=0.995):
            dz, ds, dmu = d
            ap = eta * _max_step_one(s, ds)
            ad = eta * _max_step_one(mu, dmu)
            return float((s + ap * ds) @ (mu + ad * dmu)) / q, ap, ad

        d_aff = direction(mu * s)
        gap_aff, _, _ = gap_after(d_aff, eta=1.0)
        sigma = min((max(gap_aff, 0.0) / gap) ** 3, 0.99) if gap > 0 else 0.0
        d = direction(mu * s + d_aff[1] * d_aff[2] - sigma * gap)
        gap_new, ap, ad = gap_after(d)
        if gap_new > max(0.9 * gap, tol.qp_converge * scale):
            # corrector overshoot: retry with heavy centering, no cross term
            d = direction(mu * s - max(sigma, 0.8) * gap)
            gap_new, ap, ad = gap_after(d)
        dz, ds, dmu = d
        z = z + ap * dz
        s = s + ap * ds
        mu = mu + ad * dmu

    if status != OPTIMAL:
        _, z, mu = best
        if status == MAX_ITER and best_primal > tol.infeas_level:
            status = INFEASIBLE
    z, mu = _polish(Q, c, G, h, z, mu)
    return z, mu, status, it


def _ineq_measure(Q, c, G, h, z, mu) -> float:
    dual = np.abs(Q @ z + c + G.T @ mu).max(initial=0.0)
    r = G @ z - h
    viol = max(r.max(initial=0.0), 0.0)
    return max(dual, viol, abs(float(mu @ r)))


def _polish(Q, c, G, h, z, mu):
    """Active-set refinement: re-solve the KKT system of the constraints
    the interior point flagged active.  Adopted only when it improves the
    worst KKT measure; rescues the accuracy lost to ill-conditioned or
    nearly redundant active sets."""
    n = c.shape[0]
    act = mu > (h - G @ z)
    ga = G[act]
    na = int(act.sum())
    kkt = np.block([[Q, ga.T], [ga, np.zeros((na, na))]])
    rhs = np.concatenate([-c, h[act]])
    try:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    except np.linalg.LinAlgError:
        return z, mu
    z2 = sol[:n]
    mu2 = np.zeros_like(mu)
    mu2[act] = sol[n:]
    if mu2.min(initial=0.0) < -1e-9:
        return z, mu
    mu2 = np.maximum(mu2, 0.0)
    if _ineq_measure(Q, c, G, h, z2, mu2) < _ineq_measure(Q, c, G, h, z, mu):
        return z2, mu2
    return z, mu


def _max_step_one(v, dv) -> float:
    neg = dv < 0
    if neg.any():
        return min(1.0, float((-v[neg] / dv[neg]).min()))
    return 1.0


def _recover_eq_dual(p: QpProblem, z, mu) -> np.ndarray:
    r = p.Q @ z + p.c
    if p.bineq.shape[0]:
        r = r + p.Aineq.T @ mu
    nu, *_ = np.linalg.lstsq(p.Aeq.T, -r, rcond=None)
    return nu


def _solve_kkt_eq(Q, c, A, b, tol: SolverTolerances):
    pe = b.shape[0]
    n = c.shape[0]
    if pe == 0:
        return np.linalg.solve(Q, -c), np.zeros(0)
    kkt = np.block([[Q, A.T], [A, -tol.ridge * np.eye(pe)]])
    sol = np.linalg.solve(kkt, np.concatenate([-c, b]))
    return sol[:n], sol[n:]


def _kkt_residual(p: QpProblem, z, nu, mu) -> float:
    stat = p.Q @ z + p.c
    if p.beq.shape[0]:
        stat = stat + p.Aeq.T @ nu
    if p.bineq.shape[0]:
        stat = stat + p.Aineq.T @ mu
        compl = abs(float(mu @ (p.Aineq @ z - p.bineq)))
    else:
        compl = 0.0
    return max(float(np.abs(stat).max(initial=0.0)), compl)
