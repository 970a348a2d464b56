"""Independent reference answers used to verify the QP layer.

Two routes that share nothing with the production solver:

* multi-resolution grid search over a bounding box, refined until the
  grid step is below a target resolution;
* brute-force enumeration of candidate active sets, solving the
  equality-constrained stationarity system for every subset of rows
  and keeping the best feasible candidate with nonnegative
  multipliers.

The grid bounds the optimum from above (any feasible grid point is a
certificate); the enumeration is exact for nondegenerate problems.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .qp import QuadraticProgram


def grid_search_minimum(
    qp: QuadraticProgram,
    box: tuple[float, float],
    step: float = 1e-4,
    points_per_axis: int = 81,
    feas_tol: float = 1e-9,
):
    """Best feasible grid point, refined until the grid step <= step.

    box is the (lo, hi) range searched on every axis; it must contain
    the optimum.  Returns (x, objective).  Raises if no feasible grid
    point is ever seen.
    """
    n = qp.n
    lo = np.full(n, float(box[0]))
    hi = np.full(n, float(box[1]))
    best_x = None
    best_j = np.inf
    for _ in range(12):
        axes = [np.linspace(lo[k], hi[k], points_per_axis) for k in range(n)]
        h = float(max((hi - lo) / (points_per_axis - 1)))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
        if qp.m:
            feas = np.all(pts @ qp.A_ieq.T <= qp.b_ieq + feas_tol, axis=1)
            pts = pts[feas]
        if pts.shape[0]:
            obj = 0.5 * np.einsum("ij,jk,ik->i", pts, qp.M, pts) + pts @ qp.F
            k = int(np.argmin(obj))
            if obj[k] < best_j:
                best_j = float(obj[k])
                best_x = pts[k].copy()
        if best_x is None:
            raise RuntimeError("no feasible grid point in the search box")
        if h <= step:
            break
        lo = np.maximum(best_x - 2.0 * h, float(box[0]))
        hi = np.minimum(best_x + 2.0 * h, float(box[1]))
    return best_x, best_j


def active_set_minimum(qp: QuadraticProgram, feas_tol: float = 1e-8):
    """Exact minimum by enumerating candidate active sets.

    For every subset S of constraint rows with |S| <= n, solve

        [ M   A_S' ] [x ]   [ -F  ]
        [ A_S  0   ] [mu] = [ b_S ]

    and keep the candidate when it is feasible and mu >= 0.  Returns
    (x, objective) of the best candidate.
    """
    n, m = qp.n, qp.m
    best_x = None
    best_j = np.inf
    for size in range(0, min(n, m) + 1):
        for S in combinations(range(m), size):
            A_s = qp.A_ieq[list(S)]
            kkt = np.block(
                [
                    [qp.M, A_s.T],
                    [A_s, np.zeros((size, size))],
                ]
            )
            rhs = np.concatenate([-qp.F, qp.b_ieq[list(S)]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            x, mu = sol[:n], sol[n:]
            if size and mu.min() < -feas_tol:
                continue
            if m and (qp.A_ieq @ x - qp.b_ieq).max() > feas_tol:
                continue
            j = qp.objective(x)
            if j < best_j:
                best_j = j
                best_x = x
    if best_x is None:
        raise RuntimeError("no feasible KKT candidate found")
    return best_x, best_j


def random_box_qp(
    rng: np.random.Generator,
    n: int,
    extra_rows: int,
    box_half_width: float = 3.0,
) -> QuadraticProgram:
    """Random SPD instance with a guaranteed interior feasible ball.

    Constraints are the box |x_k| <= box_half_width plus extra_rows
    random halfspaces, each placed so a ball of radius 0.15 around a
    random interior point stays feasible.  Eigenvalues of M lie in
    [0.5, 4.0], so conditioning stays benign.
    """
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eigs = rng.uniform(0.5, 4.0, size=n)
    M = q @ np.diag(eigs) @ q.T
    M = 0.5 * (M + M.T)
    F = rng.normal(scale=2.0, size=n)
    rows = [np.eye(n), -np.eye(n)]
    b = [np.full(n, box_half_width), np.full(n, box_half_width)]
    x_feas = rng.uniform(-0.5 * box_half_width, 0.5 * box_half_width, size=n)
    for _ in range(extra_rows):
        a = rng.normal(size=n)
        norm = np.linalg.norm(a)
        if norm < 1e-9:
            a = np.ones(n)
            norm = np.sqrt(n)
        a = a / norm
        margin = rng.uniform(0.15, 1.0)
        rows.append(a.reshape(1, n))
        b.append(np.array([a @ x_feas + margin]))
    return QuadraticProgram(
        M=M,
        F=F,
        A_ieq=np.vstack(rows),
        b_ieq=np.concatenate(b),
    )
