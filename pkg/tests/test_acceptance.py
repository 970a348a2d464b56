"""Acceptance gate: one test per headline mission or solver criterion.

Each test asserts the published target at its stated tolerance against
a shared pair of full default-mission runs, so `pytest -v` prints one
pass/fail line per criterion.
"""

import pytest

from shipems import selftest

G1 = 2.0 / 3.0
G2 = 1.0 / 3.0


@pytest.fixture(scope="module")
def ctx():
    return selftest.MissionContext.build()


def test_stage1_recharge_and_steady_split(ctx):
    assert ctx.frames[0].e_es == 3.0
    end = ctx.at(34.0)
    assert end.e_es == pytest.approx(8.0, abs=0.1)
    assert max(abs(f.e_es - 8.0) for f in ctx.window(30.0, 34.0)) <= 0.1
    assert end.p_gen1 == pytest.approx(G1, abs=0.02 * G1)
    assert end.p_gen2 == pytest.approx(G2, abs=0.02 * G2)
    assert selftest._ramp_violations(ctx, 0.0, 34.0) == 0
    assert ctx.wall_stage1 < 2.0


def test_stage2_up_ramp_saturation_and_recovery(ctx):
    T = ctx.scenario.controller.T
    ramp_end = 34.0 + (4.0 - 1.0) / 0.375
    assert {f.mode for f in ctx.window(34.0 + T, ramp_end)} == {"SaturatedUp"}
    trough = min(f.e_es for f in ctx.window(34.0, 55.0))
    assert trough == pytest.approx(5.0, abs=0.3)
    end = ctx.at(70.0)
    assert end.e_es == pytest.approx(8.0, abs=0.1)
    assert end.p_gen1 == pytest.approx(4.0 * G1, abs=0.02 * 4.0 * G1)
    assert end.p_gen2 == pytest.approx(4.0 * G2, abs=0.02 * 4.0 * G2)


def test_stage3_down_ramp_surplus_and_return(ctx):
    peak = max(f.e_es for f in ctx.window(70.0, 90.0))
    assert peak == pytest.approx(8.6, abs=0.3)
    end = ctx.at(100.0)
    assert end.e_es == pytest.approx(8.0, abs=0.1)
    assert end.p_gen1 == pytest.approx(2.0, abs=0.02 * 2.0)
    assert end.p_gen2 == pytest.approx(1.0, abs=0.02 * 1.0)


def test_stage4_pulse_train(ctx):
    s = selftest.stage4_measurements(ctx)
    assert len(s.energies) == 10
    for energy in s.energies:
        assert energy == pytest.approx(1.6, abs=s.quantization)
    for dip in s.dips:
        assert 1.2 <= dip <= 1.6
    assert min(s.pre_pulse) >= 7.5
    assert s.final_e == pytest.approx(8.0, abs=0.2)
    assert s.ramp_violations == 0


def test_bus_balance_invariant(ctx):
    # balance checked at 1e-9 kW on every frame without an ES power clamp
    assert ctx.metrics.balance_violations == 0
    assert sum(1 for f in ctx.frames if "es_power_clamped" in f.flags) == 0


def test_qp_correctness_against_oracles():
    s = selftest.qp_suite(1000)
    assert s.kkt_failures == 0
    assert s.scalar_vs_hildreth <= 1e-8
    assert s.objective_error <= 1e-6


def test_model_prediction_matches_rollout():
    assert selftest.model_rollout_worst(100) <= 1e-10


def test_performance_and_determinism(ctx):
    assert ctx.metrics.wall_time < 10.0
    assert ctx.wall_second < 10.0
    assert len(ctx.frames) == 18_001
    assert ctx.trace_first == ctx.trace_second
