"""Receding-horizon storage-power control.

The storage is described in increments so ramp limits become plain
input bounds.  With energy E (kJ), charge-positive storage power P
(kW) and sampling time T (s):

    E_{k+1} = E_k + T P_k,        dP_k = P_k - P_{k-1}

gives the augmented state x_k = [dE_k, E_k]':

    x_{k+1} = A x_k + B dP_k,     E_k = C x_k
    A = [[1, 0], [1, 1]],  B = [T, T]',  C = [0, 1].

Stacking predictions over Np steps with Nc free increments:

    Ebar = G x_k + Phi dPbar,
    G row i = C A^i,   Phi[i, j] = C A^(i-j) B  (i >= j, else 0).

The tracking cost  sum (Ebar - e_ref)^2 + ||dPbar||^2  is the QP

    min 1/2 dPbar' M dPbar + dPbar' F,
    M = 2 (Phi'Phi + I),   F = -2 Phi' (e_ref 1 - G x_k),

subject to power, ramp and energy bounds on the predicted trajectory.
Only the first increment is applied each step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .qp import InfeasibleProblemError, QpSolution, QuadraticProgram, qp_solve


class InvalidSamplingTimeError(ValueError):
    """Sampling time must be a finite positive number."""


class InvalidHorizonError(ValueError):
    """Horizons must satisfy Np >= Nc >= 1."""


class DimensionMismatchError(ValueError):
    """Matrix shapes are inconsistent with the stated horizons."""


class InfeasibleEnvelopeError(ValueError):
    """A storage operating envelope has an empty interval."""


@dataclass(frozen=True)
class AugmentedState:
    """Incremental storage state: last energy change and energy, kJ."""

    delta_e: float
    e: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.delta_e, self.e])


@dataclass(frozen=True)
class StorageEnvelope:
    """Charge-positive operating bounds handed to the controller.

    Power and ramp bounds apply to the charge-positive storage power
    p_chg = -p_es_bus; energy bounds to the stored energy.  p_chg_now
    is the power applied over the last step, the anchor for the
    cumulative power constraint.
    """

    p_chg_min: float
    p_chg_max: float
    r_chg_min: float
    r_chg_max: float
    e_min: float
    e_max: float
    e_ref: float
    p_chg_now: float

    def __post_init__(self):
        if self.p_chg_min > self.p_chg_max:
            raise InfeasibleEnvelopeError(
                f"power interval empty: [{self.p_chg_min:.6g}, {self.p_chg_max:.6g}]"
            )
        if self.r_chg_min > self.r_chg_max:
            raise InfeasibleEnvelopeError(
                f"ramp interval empty: [{self.r_chg_min:.6g}, {self.r_chg_max:.6g}]"
            )
        if not 0.0 <= self.e_min <= self.e_max:
            raise InfeasibleEnvelopeError(
                f"energy interval invalid: [{self.e_min:.6g}, {self.e_max:.6g}]"
            )
        if not self.e_min <= self.e_ref <= self.e_max:
            raise ValueError("e_ref must lie within the energy bounds")


def build_augmented_model(T: float):
    """Return (A, B, C) of the incremental model for sampling time T."""
    if not np.isfinite(T) or T <= 0.0:
        raise InvalidSamplingTimeError(f"sampling time must be > 0, got {T!r}")
    A = np.array([[1.0, 0.0], [1.0, 1.0]])
    B = np.array([[T], [T]])
    C = np.array([[0.0, 1.0]])
    return A, B, C


def build_prediction_matrices(A, B, C, Np: int, Nc: int):
    """Stack G (Np x n) and Phi (Np x Nc) for the given model."""
    if not (isinstance(Np, (int, np.integer)) and isinstance(Nc, (int, np.integer))):
        raise InvalidHorizonError("horizons must be integers")
    if Nc < 1 or Np < Nc:
        raise InvalidHorizonError(f"need Np >= Nc >= 1, got Np={Np}, Nc={Nc}")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    C = np.asarray(C, dtype=float).reshape(-1, A.shape[0])
    if C.shape[0] != 1 or B.shape[1] != 1:
        raise DimensionMismatchError("single-input single-output model expected")
    n = A.shape[0]
    G = np.zeros((Np, n))
    markov = np.zeros(Np)
    row = C[0].copy()
    for i in range(Np):
        markov[i] = row @ B[:, 0]  # C A^i B
        row = row @ A
        G[i] = row  # C A^(i+1)
    Phi = np.zeros((Np, Nc))
    for j in range(Nc):
        Phi[j:, j] = markov[: Np - j]
    return G, Phi


@dataclass
class PredictionModel:
    """Prebuilt prediction data for one controller configuration."""

    T: float
    Np: int
    Nc: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    G: np.ndarray
    Phi: np.ndarray
    cost_M: np.ndarray = field(repr=False, default=None)
    ieq_normals: np.ndarray = field(repr=False, default=None)

    @classmethod
    def build(cls, T: float, Np: int, Nc: int) -> "PredictionModel":
        A, B, C = build_augmented_model(T)
        G, Phi = build_prediction_matrices(A, B, C, Np, Nc)
        model = cls(T=T, Np=Np, Nc=Nc, A=A, B=B, C=C, G=G, Phi=Phi)
        model.cost_M = 2.0 * (Phi.T @ Phi + np.eye(Nc))
        tri = np.tril(np.ones((Nc, Nc)))
        eye = np.eye(Nc)
        model.ieq_normals = np.vstack([-tri, tri, -eye, eye, -Phi, Phi])
        return model


def build_cost(G, Phi, x, e_ref: float):
    """Return (M, F) of the tracking QP at state x."""
    G = np.asarray(G, dtype=float)
    Phi = np.asarray(Phi, dtype=float)
    if G.ndim != 2 or Phi.ndim != 2 or G.shape[0] != Phi.shape[0]:
        raise DimensionMismatchError("G and Phi must share their row count")
    xv = x.as_vector() if isinstance(x, AugmentedState) else np.asarray(x, dtype=float)
    if xv.shape != (G.shape[1],):
        raise DimensionMismatchError("state length must match G columns")
    Nc = Phi.shape[1]
    M = 2.0 * (Phi.T @ Phi + np.eye(Nc))
    F = -2.0 * (Phi.T @ (e_ref - G @ xv))
    return M, F


def build_constraints(x, envelope: StorageEnvelope, G, Phi, T: float, Np: int, Nc: int):
    """Stack the inequality rows: power band, ramp band, energy band.

    Power rows bound the cumulative sum of increments around
    p_chg_now, ramp rows bound each increment to [T r_min, T r_max],
    energy rows bound the predicted trajectory G x + Phi dPbar.
    Row count is 4 Nc + 2 Np.
    """
    G = np.asarray(G, dtype=float)
    Phi = np.asarray(Phi, dtype=float)
    if G.shape[0] != Np or Phi.shape != (Np, Nc):
        raise DimensionMismatchError("G/Phi shapes must match the horizons")
    xv = x.as_vector() if isinstance(x, AugmentedState) else np.asarray(x, dtype=float)
    env = envelope
    tri = np.tril(np.ones((Nc, Nc)))
    eye = np.eye(Nc)
    A_ieq = np.vstack([-tri, tri, -eye, eye, -Phi, Phi])
    ones = np.ones(Nc)
    gx = G @ xv
    b_ieq = np.concatenate(
        [
            (env.p_chg_now - env.p_chg_min) * ones,
            (env.p_chg_max - env.p_chg_now) * ones,
            (-T * env.r_chg_min) * ones,
            (T * env.r_chg_max) * ones,
            gx - env.e_min,
            env.e_max - gx,
        ]
    )
    return A_ieq, b_ieq


def mpc_step(
    model: PredictionModel,
    x: AugmentedState,
    envelope: StorageEnvelope,
    tol: float = 1e-9,
    max_iter: int | None = None,
) -> tuple[float, QpSolution]:
    """One receding-horizon update.

    Returns (r_chg, solution): the commanded charge-positive storage
    ramp in kW/s (first increment divided by T) and the QP diagnostics.
    QP errors propagate; dual non-convergence is reported on the
    solution, not raised.

    Exception: right after a saturated interval, the predicted-energy
    rows can demand more correction than one ramp-limited increment
    can deliver, leaving no feasible point.  Input bounds are physical
    and stay hard; the energy rows describe a forecast the receding
    horizon re-imposes every step, so they yield: the step is re-solved
    with the power and ramp rows only and the solution is marked
    state_rows_relaxed for the caller's diagnostics.
    """
    xv = x.as_vector() if isinstance(x, AugmentedState) else np.asarray(x, dtype=float)
    env = envelope
    T, Nc = model.T, model.Nc
    gx = model.G @ xv
    F = -2.0 * (model.Phi.T @ (env.e_ref - gx))
    ones = np.ones(Nc)
    b_ieq = np.concatenate(
        [
            (env.p_chg_now - env.p_chg_min) * ones,
            (env.p_chg_max - env.p_chg_now) * ones,
            (-T * env.r_chg_min) * ones,
            (T * env.r_chg_max) * ones,
            gx - env.e_min,
            env.e_max - gx,
        ]
    )
    qp = QuadraticProgram(M=model.cost_M, F=F, A_ieq=model.ieq_normals, b_ieq=b_ieq)
    try:
        sol = qp_solve(qp, tol=tol, max_iter=max_iter)
    except InfeasibleProblemError:
        n_input = 4 * Nc
        reduced = QuadraticProgram(
            M=model.cost_M,
            F=F,
            A_ieq=model.ieq_normals[:n_input],
            b_ieq=b_ieq[:n_input],
        )
        sol = replace(
            qp_solve(reduced, tol=tol, max_iter=max_iter),
            state_rows_relaxed=True,
        )
    return float(sol.delta_p[0]) / T, sol
