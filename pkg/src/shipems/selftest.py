"""Built-in verification suite.

Runs the packaged four-stage mission and checks each closed-loop
stage target, the bus-balance invariant, solver correctness against
independent oracles, prediction-model consistency, and the
performance/determinism budget. Each check returns a CheckResult so
the CLI can print one PASS/FAIL line per item.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .mission import MissionMetrics, run_mission, write_trace
from .mpc import PredictionModel
from .plant import TelemetryFrame
from .qp import QuadraticProgram, kkt_residuals, qp_solve
from .scenario import Scenario, default_scenario

QP_SEED = 987_2026
MODEL_SEED = 412_2026

KKT_TOL = 1e-6
SCALAR_VS_HILDRETH_TOL = 1e-8
OBJECTIVE_TOL = 1e-6
MODEL_TOL = 1e-10
RAMP_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.detail}"


@dataclass(frozen=True)
class MissionContext:
    """Two full default-mission runs plus a timed stage-1 segment."""

    scenario: Scenario
    frames: list[TelemetryFrame]
    metrics: MissionMetrics
    trace_first: str
    trace_second: str
    wall_second: float
    wall_stage1: float

    @classmethod
    def build(cls) -> "MissionContext":
        scenario = default_scenario()
        frames, metrics = run_mission(scenario)
        frames2, metrics2 = run_mission(scenario)
        texts = []
        for trace in (frames, frames2):
            buf = io.StringIO()
            write_trace(trace, buf)
            texts.append(buf.getvalue())
        t0 = time.perf_counter()
        run_mission(scenario.truncated(34.0))
        wall_stage1 = time.perf_counter() - t0
        return cls(
            scenario=scenario,
            frames=frames,
            metrics=metrics,
            trace_first=texts[0],
            trace_second=texts[1],
            wall_second=metrics2.wall_time,
            wall_stage1=wall_stage1,
        )

    def at(self, t: float) -> TelemetryFrame:
        return self.frames[round(t / self.scenario.controller.T)]

    def window(self, t0: float, t1: float) -> list[TelemetryFrame]:
        T = self.scenario.controller.T
        return self.frames[round(t0 / T) : round(t1 / T) + 1]


def _ramp_violations(ctx: MissionContext, t0: float, t1: float) -> int:
    """Generator steps outside [T r_min, T r_max] within [t0, t1]."""
    T = ctx.scenario.controller.T
    frames = ctx.window(t0, t1)
    count = 0
    for prev, cur in zip(frames, frames[1:]):
        for p0, p1, gen in (
            (prev.p_gen1, cur.p_gen1, ctx.scenario.generators[0]),
            (prev.p_gen2, cur.p_gen2, ctx.scenario.generators[1]),
        ):
            step = p1 - p0
            if step > T * gen.r_max + RAMP_TOL or step < T * gen.r_min - RAMP_TOL:
                count += 1
    return count


def _within(value: float, target: float, tol: float) -> bool:
    return abs(value - target) <= tol


def check_stage1(ctx: MissionContext) -> CheckResult:
    """Recharge at constant load: 3 -> 8 kJ, hold, steady 2:1 split."""
    end = ctx.at(34.0)
    hold_dev = max(abs(f.e_es - 8.0) for f in ctx.window(30.0, 34.0))
    ramps = _ramp_violations(ctx, 0.0, 34.0)
    ok = (
        ctx.frames[0].e_es == 3.0
        and _within(end.e_es, 8.0, 0.1)
        and hold_dev <= 0.1
        and _within(end.p_gen1, 2.0 / 3.0, 0.02 * (2.0 / 3.0))
        and _within(end.p_gen2, 1.0 / 3.0, 0.02 * (1.0 / 3.0))
        and ramps == 0
        and ctx.wall_stage1 < 2.0
    )
    detail = (
        f"e(34s)={end.e_es:.3f} kJ, hold dev {hold_dev:.3f}, "
        f"gens {end.p_gen1:.4f}/{end.p_gen2:.4f} kW, "
        f"ramp violations {ramps}, segment runtime {ctx.wall_stage1:.2f} s"
    )
    return CheckResult("stage1-recharge", ok, detail)


def check_stage2(ctx: MissionContext) -> CheckResult:
    """Up-ramp beyond generator capability: saturation, trough, recovery."""
    T = ctx.scenario.controller.T
    ramp_end = 34.0 + (4.0 - 1.0) / 0.375
    modes = {f.mode for f in ctx.window(34.0 + T, ramp_end)}
    trough = min(f.e_es for f in ctx.window(34.0, 55.0))
    end = ctx.at(70.0)
    ok = (
        modes == {"SaturatedUp"}
        and _within(trough, 5.0, 0.3)
        and _within(end.e_es, 8.0, 0.1)
        and _within(end.p_gen1, 8.0 / 3.0, 0.02 * 8.0 / 3.0)
        and _within(end.p_gen2, 4.0 / 3.0, 0.02 * 4.0 / 3.0)
    )
    detail = (
        f"ramp modes {sorted(modes)}, trough {trough:.3f} kJ, "
        f"e(70s)={end.e_es:.3f} kJ, gens {end.p_gen1:.4f}/{end.p_gen2:.4f} kW"
    )
    return CheckResult("stage2-up-ramp", ok, detail)


def check_stage3(ctx: MissionContext) -> CheckResult:
    """Down-ramp beyond capability: surplus peak and return to reference."""
    peak = max(f.e_es for f in ctx.window(70.0, 90.0))
    end = ctx.at(100.0)
    ok = (
        _within(peak, 8.6, 0.3)
        and _within(end.e_es, 8.0, 0.1)
        and _within(end.p_gen1, 2.0, 0.02 * 2.0)
        and _within(end.p_gen2, 1.0, 0.02 * 1.0)
    )
    detail = (
        f"peak {peak:.3f} kJ, e(100s)={end.e_es:.3f} kJ, "
        f"gens {end.p_gen1:.4f}/{end.p_gen2:.4f} kW"
    )
    return CheckResult("stage3-down-ramp", ok, detail)


@dataclass(frozen=True)
class Stage4Stats:
    energies: tuple[float, ...]
    dips: tuple[float, ...]
    pre_pulse: tuple[float, ...]
    final_e: float
    ramp_violations: int
    quantization: float


def stage4_measurements(ctx: MissionContext) -> Stage4Stats:
    """Per-pulse discrete energy, ES dip, and pre-pulse energy levels."""
    sc = ctx.scenario
    T = sc.controller.T
    pulse = next(ev for ev in sc.events if ev.action == "fire_pulse_train")
    period = pulse.args["period"]

    energies = []
    dips = []
    pre_pulse = []
    for k in range(pulse.args["count"]):
        t_k = pulse.t + k * period
        frames = ctx.window(t_k + T, t_k + period)
        energies.append(sum(f.p_ppl for f in frames) * T)
        dips.append(ctx.at(t_k).e_es - min(f.e_es for f in frames))
        if k > 0:
            pre_pulse.append(ctx.at(t_k).e_es)
    return Stage4Stats(
        energies=tuple(energies),
        dips=tuple(dips),
        pre_pulse=tuple(pre_pulse),
        final_e=ctx.at(sc.t_end).e_es,
        ramp_violations=_ramp_violations(ctx, pulse.t, sc.t_end),
        quantization=T * pulse.args["peak"],
    )


def check_stage4(ctx: MissionContext) -> CheckResult:
    """Pulse train: per-pulse energy, dip band, sawtooth recovery."""
    s = stage4_measurements(ctx)
    energy_err = max(abs(e - 1.6) for e in s.energies)
    ok = (
        energy_err <= s.quantization
        and all(1.2 <= d <= 1.6 for d in s.dips)
        and min(s.pre_pulse) >= 7.5
        and _within(s.final_e, 8.0, 0.2)
        and s.ramp_violations == 0
    )
    detail = (
        f"pulse energy err {energy_err:.4f} kJ, dips "
        f"[{min(s.dips):.3f}, {max(s.dips):.3f}] kJ, min pre-pulse "
        f"{min(s.pre_pulse):.3f} kJ, e(180s)={s.final_e:.3f} kJ, "
        f"ramp violations {s.ramp_violations}"
    )
    return CheckResult("stage4-pulse-train", ok, detail)


def check_balance(ctx: MissionContext) -> CheckResult:
    """Bus power balance exact at every unclamped step; no ES power clamps."""
    clamped = sum(1 for f in ctx.frames if "es_power_clamped" in f.flags)
    ok = ctx.metrics.balance_violations == 0 and clamped == 0
    detail = (
        f"balance violations {ctx.metrics.balance_violations}/{len(ctx.frames) - 1}, "
        f"es_power_clamped frames {clamped}"
    )
    return CheckResult("bus-balance", ok, detail)


def _random_qp(rng: np.random.Generator) -> QuadraticProgram:
    """Random strictly convex QP with a known feasible point."""
    n = int(rng.integers(1, 3))
    m = int(rng.integers(1, 13))
    root = rng.uniform(-1.0, 1.0, size=(n, n))
    M = root @ root.T + (0.3 + rng.uniform()) * np.eye(n)
    F = rng.uniform(-2.0, 2.0, size=n)
    A = rng.uniform(-2.0, 2.0, size=(m, n))
    feasible = rng.uniform(-1.0, 1.0, size=n)
    b = A @ feasible + rng.uniform(0.0, 1.5, size=m)
    return QuadraticProgram(M=M, F=F, A_ieq=A, b_ieq=b)


def _oracle_objective(qp: QuadraticProgram) -> float:
    """Optimal objective by enumerating candidate active sets."""
    M, F, A, b = qp.M, qp.F, qp.A_ieq, qp.b_ieq
    n = M.shape[0]
    m = A.shape[0]

    def objective(x: np.ndarray) -> float:
        return float(0.5 * x @ M @ x + F @ x)

    best = np.inf
    free = np.linalg.solve(M, -F)
    if np.all(A @ free <= b + 1e-9):
        best = objective(free)
    for size in range(1, n + 1):
        for rows in combinations(range(m), size):
            sub = A[list(rows)]
            kkt = np.block([[M, sub.T], [sub, np.zeros((size, size))]])
            rhs = np.concatenate([-F, b[list(rows)]])
            try:
                cand = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            x, lam = cand[:n], cand[n:]
            if np.any(lam < -1e-9) or np.any(A @ x > b + 1e-8):
                continue
            best = min(best, objective(x))
    return best


@dataclass(frozen=True)
class QpSuiteStats:
    instances: int
    kkt_failures: int
    scalar_vs_hildreth: float
    objective_error: float


def qp_suite(instances: int = 1000) -> QpSuiteStats:
    """Solve random instances; collect worst residuals against oracles."""
    rng = np.random.default_rng(QP_SEED)
    kkt_failures = 0
    pair_worst = 0.0
    objective_worst = 0.0
    # nearly parallel constraint pairs need far more dual sweeps than the
    # default 50 m budget, so the suite grants a generous cap
    max_iter = 50_000
    for _ in range(instances):
        qp = _random_qp(rng)
        sol = qp_solve(qp, max_iter=max_iter)
        res = kkt_residuals(qp, sol)
        if max(res.values()) > KKT_TOL:
            kkt_failures += 1
        if qp.n == 1:
            alt = qp_solve(qp, method="hildreth", max_iter=max_iter)
            pair_worst = max(
                pair_worst, float(np.max(np.abs(sol.delta_p - alt.delta_p)))
            )
        value = float(0.5 * sol.delta_p @ qp.M @ sol.delta_p + qp.F @ sol.delta_p)
        objective_worst = max(objective_worst, abs(value - _oracle_objective(qp)))
    return QpSuiteStats(
        instances=instances,
        kkt_failures=kkt_failures,
        scalar_vs_hildreth=pair_worst,
        objective_error=objective_worst,
    )


def check_qp_correctness(instances: int = 1000) -> CheckResult:
    """KKT residuals, scalar-vs-Hildreth agreement, and objective oracle."""
    s = qp_suite(instances)
    ok = (
        s.kkt_failures == 0
        and s.scalar_vs_hildreth <= SCALAR_VS_HILDRETH_TOL
        and s.objective_error <= OBJECTIVE_TOL
    )
    detail = (
        f"{s.instances} instances, KKT failures {s.kkt_failures}, "
        f"scalar-vs-Hildreth {s.scalar_vs_hildreth:.2e}, "
        f"objective error {s.objective_error:.2e}"
    )
    return CheckResult("qp-correctness", ok, detail)


def model_rollout_worst(sequences: int = 100) -> float:
    """Worst gap between stacked prediction and step-by-step rollout."""
    rng = np.random.default_rng(MODEL_SEED)
    worst = 0.0
    for i in range(sequences):
        if i % 10 == 0:
            Np, Nc = 500, 1
        else:
            Np = int(rng.integers(2, 41))
            Nc = int(rng.integers(1, min(Np, 8) + 1))
        T = float(rng.uniform(0.005, 0.05))
        model = PredictionModel.build(T=T, Np=Np, Nc=Nc)
        p0 = float(rng.uniform(-8.0, 8.0))
        e0 = float(rng.uniform(0.0, 10.0))
        du = rng.uniform(-0.5, 0.5, size=Nc)
        predicted = model.G @ np.array([T * p0, e0]) + model.Phi @ du

        p, e = p0, e0
        rolled = np.empty(Np)
        for k in range(Np):
            if k < Nc:
                p += du[k]
            e += T * p
            rolled[k] = e
        worst = max(worst, float(np.max(np.abs(predicted - rolled))))
    return worst


def check_model_consistency(sequences: int = 100) -> CheckResult:
    """Stacked prediction equals step-by-step rollout of the same plant."""
    worst = model_rollout_worst(sequences)
    ok = worst <= MODEL_TOL
    detail = f"{sequences} sequences, worst prediction error {worst:.2e} kJ"
    return CheckResult("model-consistency", ok, detail)


def check_performance(ctx: MissionContext) -> CheckResult:
    """Full-mission wall-time budget and byte-identical reruns."""
    identical = ctx.trace_first == ctx.trace_second
    slowest = max(ctx.metrics.wall_time, ctx.wall_second)
    ok = slowest < 10.0 and identical
    detail = (
        f"runs {ctx.metrics.wall_time:.2f} s / {ctx.wall_second:.2f} s, "
        f"reruns byte-identical: {identical}"
    )
    return CheckResult("performance-determinism", ok, detail)


def run_all() -> list[CheckResult]:
    ctx = MissionContext.build()
    return [
        check_stage1(ctx),
        check_stage2(ctx),
        check_stage3(ctx),
        check_stage4(ctx),
        check_balance(ctx),
        check_qp_correctness(),
        check_model_consistency(),
        check_performance(ctx),
    ]
