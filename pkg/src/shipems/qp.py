"""Dense convex quadratic programming with inequality constraints.

Solves

    min_x  1/2 x' M x + x' F      s.t.  A_ieq x <= b_ieq

for symmetric positive definite M.  The constrained path works on the dual

    min_{lam >= 0}  1/2 lam' H lam + lam' K,
    H = A_ieq M^-1 A_ieq',   K = b_ieq + A_ieq M^-1 F,

by cyclic coordinate ascent with per-component clipping at zero
(Hildreth / D'Esopo).  The primal point is recovered from the
stationarity condition x = -M^-1 (F + A_ieq' lam), so it satisfies
stationarity by construction; feasibility and complementary slackness
improve as the dual iteration converges.

Single-variable problems take a closed-form path: every constraint row
is a scalar bound, so the feasible set is an interval and the optimum
is the unconstrained minimizer clamped to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SingularMatrixError(ValueError):
    """Cost matrix is not symmetric positive definite."""


class InfeasibleProblemError(ValueError):
    """The constraints admit no solution (empty scalar interval)."""


def _as_matrix(a, name: str) -> np.ndarray:
    out = np.atleast_2d(np.asarray(a, dtype=float))
    if out.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array")
    return out


def _as_vector(a, name: str) -> np.ndarray:
    out = np.asarray(a, dtype=float).reshape(-1)
    return out


@dataclass(frozen=True)
class QuadraticProgram:
    """Problem data for min 1/2 x'Mx + x'F s.t. A_ieq x <= b_ieq.

    M must be symmetric (checked on construction, 1e-12 relative);
    positive definiteness surfaces as SingularMatrixError when the
    solver attempts the factorization.
    """

    M: np.ndarray
    F: np.ndarray
    A_ieq: np.ndarray
    b_ieq: np.ndarray

    def __post_init__(self):
        M = _as_matrix(self.M, "M")
        F = _as_vector(self.F, "F")
        A = _as_matrix(self.A_ieq, "A_ieq")
        b = _as_vector(self.b_ieq, "b_ieq")
        n = M.shape[0]
        if M.shape != (n, n):
            raise ValueError("M must be square")
        scale = max(1.0, float(np.abs(M).max()))
        if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * scale):
            raise ValueError("M must be symmetric")
        if F.shape != (n,):
            raise ValueError("F length must match M")
        if A.size == 0:
            A = A.reshape(0, n)
        if A.shape[1] != n:
            raise ValueError("A_ieq column count must match M")
        if b.shape != (A.shape[0],):
            raise ValueError("b_ieq length must match A_ieq rows")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "A_ieq", A)
        object.__setattr__(self, "b_ieq", b)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def m(self) -> int:
        return self.A_ieq.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(0.5 * x @ self.M @ x + x @ self.F)


@dataclass
class DualProblem:
    """Dual data: min over lam >= 0 of 1/2 lam'H lam + lam'K."""

    H: np.ndarray
    K: np.ndarray
    lam: np.ndarray

    def objective(self, lam=None) -> float:
        v = self.lam if lam is None else np.asarray(lam, dtype=float).reshape(-1)
        return float(0.5 * v @ self.H @ v + v @ self.K)


@dataclass(frozen=True)
class QpSolution:
    delta_p: np.ndarray
    lam: np.ndarray
    iterations: int
    converged: bool
    active_set: tuple[int, ...] = field(default=())
    state_rows_relaxed: bool = False


def _factor(M: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("cost matrix is not positive definite") from exc


def _chol_solve(L: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    y = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.T, y)


def solve_unconstrained(M, F) -> np.ndarray:
    """Return x = -M^-1 F for SPD M.

    Raises SingularMatrixError if M has no Cholesky factorization.
    The residual ||M x + F|| is driven to <= 1e-10 * (1 + ||F||) by one
    step of iterative refinement.
    """
    M = _as_matrix(M, "M")
    F = _as_vector(F, "F")
    L = _factor(M)
    x = _chol_solve(L, -F)
    # one refinement step keeps the residual at roundoff level
    r = M @ x + F
    x = x - _chol_solve(L, r)
    return x


def build_dual(qp: QuadraticProgram) -> DualProblem:
    """Assemble H = A M^-1 A', K = b + A M^-1 F with lam = 0."""
    L = _factor(qp.M)
    MinvAT = _chol_solve(L, qp.A_ieq.T)
    H = qp.A_ieq @ MinvAT
    K = qp.b_ieq + MinvAT.T @ qp.F
    return DualProblem(H=H, K=K, lam=np.zeros(qp.m))


def dual_objective(H, K, lam) -> float:
    lam = _as_vector(lam, "lam")
    return float(0.5 * lam @ _as_matrix(H, "H") @ lam + lam @ _as_vector(K, "K"))


def hildreth_iterate(H, K, tol: float = 1e-9, max_iter: int | None = None):
    """Cyclic coordinate ascent on the dual, clipped at zero.

    One sweep updates each multiplier in index order:

        lam_i <- max(0, -(K_i + sum_{j != i} H_ij lam_j) / H_ii)

    Rows with H_ii <= 1e-12 are skipped and their multiplier stays 0.
    Converged means the largest multiplier change in the final sweep
    was <= tol.  Non-convergence is reported through the flag, never
    raised.

    Returns (lam, converged, sweeps).
    """
    H = _as_matrix(H, "H")
    K = _as_vector(K, "K")
    m = K.shape[0]
    if H.shape != (m, m):
        raise ValueError("H shape must match K")
    if max_iter is None:
        max_iter = 50 * max(m, 1)
    lam = np.zeros(m)
    if m == 0:
        return lam, True, 0
    diag = np.diag(H).copy()
    live = diag > 1e-12
    rows = [(i, H[i]) for i in range(m) if live[i]]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        worst = 0.0
        for i, hrow in rows:
            w = K[i] + hrow @ lam - diag[i] * lam[i]
            new = -w / diag[i]
            if new < 0.0:
                new = 0.0
            change = abs(new - lam[i])
            if change > worst:
                worst = change
            lam[i] = new
        if worst <= tol:
            converged = True
            break
    return lam, converged, sweeps


def _solve_scalar(qp: QuadraticProgram, x0: float, tol: float) -> QpSolution:
    # every row a*x <= b is a one-sided bound; intersect them
    a = qp.A_ieq[:, 0]
    b = qp.b_ieq
    pos = a > 0.0
    neg = a < 0.0
    zero = ~pos & ~neg
    if bool(np.any(zero & (b < -tol))):
        raise InfeasibleProblemError("zero row with negative bound")
    lo, hi = -np.inf, np.inf
    lo_row = hi_row = -1
    if bool(pos.any()):
        idx = np.flatnonzero(pos)
        ratio = b[idx] / a[idx]
        j = int(np.argmin(ratio))
        hi, hi_row = float(ratio[j]), int(idx[j])
    if bool(neg.any()):
        idx = np.flatnonzero(neg)
        ratio = b[idx] / a[idx]
        j = int(np.argmax(ratio))
        lo, lo_row = float(ratio[j]), int(idx[j])
    if lo > hi + tol:
        raise InfeasibleProblemError(
            f"empty feasible interval: [{lo:.6g}, {hi:.6g}]"
        )
    x = min(max(x0, lo), hi)
    lam = np.zeros(qp.m)
    active: tuple[int, ...] = ()
    if x != x0:
        # stationarity M x + F + a_i lam_i = 0 on the binding row
        row = hi_row if x == hi else lo_row
        grad = qp.M[0, 0] * x + qp.F[0]
        lam[row] = max(0.0, -grad / a[row])
        if lam[row] > 0.0:
            active = (row,)
    return QpSolution(
        delta_p=np.array([x]),
        lam=lam,
        iterations=0,
        converged=True,
        active_set=active,
    )


def qp_solve(
    qp: QuadraticProgram,
    tol: float = 1e-9,
    max_iter: int | None = None,
    method: str = "auto",
) -> QpSolution:
    """Solve the inequality-constrained QP.

    Tries the unconstrained minimizer first and returns it when it is
    feasible.  A single-variable problem then takes the closed-form
    interval clamp; anything larger runs the Hildreth dual iteration.
    method="hildreth" forces the dual path (used to cross-check the
    scalar path), method="scalar" forces the clamp and rejects n > 1.

    Raises SingularMatrixError for non-SPD cost, InfeasibleProblemError
    when the scalar feasible interval is empty.  Dual non-convergence
    is reported via QpSolution.converged, never raised.
    """
    if method not in ("auto", "hildreth", "scalar"):
        raise ValueError(f"unknown method {method!r}")
    L = _factor(qp.M)
    x0 = _chol_solve(L, -qp.F)
    x0 = x0 - _chol_solve(L, qp.M @ x0 + qp.F)
    if qp.m == 0 or bool(np.all(qp.A_ieq @ x0 <= qp.b_ieq)):
        return QpSolution(
            delta_p=x0,
            lam=np.zeros(qp.m),
            iterations=0,
            converged=True,
            active_set=(),
        )
    if method == "scalar" or (method == "auto" and qp.n == 1):
        if qp.n != 1:
            raise ValueError("scalar path requires a single variable")
        return _solve_scalar(qp, float(x0[0]), tol)
    dual = build_dual(qp)
    lam, converged, sweeps = hildreth_iterate(dual.H, dual.K, tol, max_iter)
    x = _chol_solve(L, -(qp.F + qp.A_ieq.T @ lam))
    active = tuple(int(i) for i in np.nonzero(lam > 0.0)[0])
    return QpSolution(
        delta_p=x,
        lam=lam,
        iterations=sweeps,
        converged=converged,
        active_set=active,
    )


def kkt_residuals(qp: QuadraticProgram, sol: QpSolution) -> dict[str, float]:
    """Worst-case KKT residuals of a candidate solution.

    Returns primal feasibility max(A x - b), dual feasibility
    max(-lam), complementary slackness max |lam_i (A x - b)_i| scaled
    by 1 + |b_i|, and the stationarity norm ||M x + F + A' lam||
    scaled by 1 + ||F||.
    """
    x = sol.delta_p
    lam = sol.lam
    slack = qp.A_ieq @ x - qp.b_ieq if qp.m else np.zeros(0)
    stat = qp.M @ x + qp.F + (qp.A_ieq.T @ lam if qp.m else 0.0)
    comp = np.abs(lam * slack) / (1.0 + np.abs(qp.b_ieq)) if qp.m else np.zeros(0)
    return {
        "primal": float(slack.max()) if qp.m else 0.0,
        "dual": float((-lam).max()) if qp.m else 0.0,
        "complementarity": float(comp.max()) if qp.m else 0.0,
        "stationarity": float(np.linalg.norm(stat) / (1.0 + np.linalg.norm(qp.F))),
    }
