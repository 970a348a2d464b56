"""Plant integration: load shapes, ramp clamps, slack storage, telemetry."""

import math

import numpy as np
import pytest

from shipems.dispatch import DispatchCommand, DispatchMode, GeneratorRating, StorageRating
from shipems.plant import (
    LoadModel,
    Plant,
    PlantFlags,
    PlantState,
    PulseTrain,
    TelemetryFrame,
    initial_state,
)

T = 0.01
GEN1 = GeneratorRating(id="gen1", p_min=0.0, p_max=4.0, r_min=-0.2, r_max=0.2)
GEN2 = GeneratorRating(id="gen2", p_min=0.0, p_max=2.0, r_min=-0.1, r_max=0.1)
ES = StorageRating(e_capacity=10.0, p_abs_max=8.0, e_ref=8.0, e_initial=8.0)


def make_plant() -> Plant:
    return Plant(gens=[GEN1, GEN2], storage=ES, v_bus_nominal=400.0, T=T)


def command(p_cmd, mode=DispatchMode.TRACKING) -> DispatchCommand:
    return DispatchCommand(
        mode=mode,
        r_gen=(0.0, 0.0),
        r_es_bus=0.0,
        p_gen_cmd=tuple(p_cmd),
        p_es_expected=0.0,
    )


def state(p_gen, e_es=8.0, p_pr=0.0, p_ppl=0.0, t=0.0) -> PlantState:
    return PlantState(
        t=t, p_gen=tuple(p_gen), p_es_bus=0.0, e_es=e_es, p_pr=p_pr, p_ppl=p_ppl
    )


class TestPulseTrain:
    def test_trapezoid_samples(self):
        # peak 2 at rate 10: 0.2 s rise, 0.6 s hold, 0.2 s fall
        tr = PulseTrain(t_start=0.0, count=1, period=5.0, peak=2.0, rate=10.0, hold=0.6)
        assert tr.rise == pytest.approx(0.2)
        assert tr.width == pytest.approx(1.0)
        assert tr.power(0.1) == pytest.approx(1.0)
        assert tr.power(0.5) == pytest.approx(2.0)
        assert tr.power(0.95) == pytest.approx(0.5)
        assert tr.power(-0.01) == 0.0
        assert tr.power(1.0) == 0.0

    def test_repeats_with_period(self):
        tr = PulseTrain(t_start=4.0, count=3, period=2.0, peak=2.0, rate=10.0, hold=0.6)
        assert tr.t_end == pytest.approx(9.0)
        for k in range(3):
            assert tr.power(4.0 + 2.0 * k + 0.5) == pytest.approx(2.0)
        assert tr.power(4.0 + 1.5) == 0.0  # gap between pulses
        assert tr.power(9.5) == 0.0

    def test_discrete_energy_close_to_exact(self):
        # closed form: peak^2/rate + peak*hold = 0.4 + 1.2 = 1.6 kJ
        tr = PulseTrain(t_start=0.0, count=1, period=5.0, peak=2.0, rate=10.0, hold=0.6)
        total = sum(tr.power(k * T) * T for k in range(1, 201))
        assert abs(total - 1.6) <= 0.02

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            PulseTrain(t_start=0.0, count=2, period=0.9, peak=2.0, rate=10.0, hold=0.6)
        # a single pulse cannot overlap itself
        PulseTrain(t_start=0.0, count=1, period=0.9, peak=2.0, rate=10.0, hold=0.6)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(count=0),
            dict(peak=0.0),
            dict(rate=-1.0),
            dict(period=0.0),
            dict(hold=-0.1),
        ],
    )
    def test_bad_parameters(self, kwargs):
        base = dict(t_start=0.0, count=1, period=5.0, peak=2.0, rate=10.0, hold=0.6)
        base.update(kwargs)
        with pytest.raises(ValueError):
            PulseTrain(**base)


class TestLoadModel:
    def test_propulsion_ramp_arrives_exactly(self):
        loads = LoadModel(p_pr=1.0)
        loads.set_propulsion(4.0, 0.375)
        values = []
        for k in range(1, 1001):
            p_pr, _, _, _ = loads.advance(k * T, T)
            values.append(p_pr)
        assert values[0] == pytest.approx(1.00375, abs=1e-12)
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert all(v <= 4.0 for v in values)
        assert values[-1] == 4.0  # exact arrival, no overshoot
        # (4 - 1) / 0.375 = 8 s = 800 steps
        assert values[799] == 4.0
        assert values[798] < 4.0

    def test_propulsion_ramp_down(self):
        loads = LoadModel(p_pr=4.0)
        loads.set_propulsion(3.0, 0.5)
        for k in range(1, 300):
            p_pr, _, _, _ = loads.advance(k * T, T)
        assert p_pr == 3.0

    def test_holds_without_command(self):
        loads = LoadModel(p_pr=2.0)
        for k in range(1, 50):
            p_pr, p_ppl, d_pr, d_ppl = loads.advance(k * T, T)
            assert p_pr == 2.0 and p_ppl == 0.0
            assert d_pr == 0.0 and d_ppl == 0.0

    def test_deltas_sum_to_power(self):
        loads = LoadModel(p_pr=1.0)
        loads.set_propulsion(2.0, 0.375)
        loads.schedule_pulse_train(0.5, 2, 2.0, 2.0, 10.0, 0.6)
        acc_pr, acc_ppl = 1.0, 0.0
        for k in range(1, 500):
            p_pr, p_ppl, d_pr, d_ppl = loads.advance(k * T, T)
            acc_pr += d_pr
            acc_ppl += d_ppl
            assert acc_pr == pytest.approx(p_pr, abs=1e-12)
            assert acc_ppl == pytest.approx(p_ppl, abs=1e-12)

    def test_pulse_busy_window(self):
        loads = LoadModel()
        assert not loads.pulse_busy(0.0)
        loads.schedule_pulse_train(10.0, 6, 2.0, 2.0, 10.0, 0.6)
        assert loads.pulse_busy(10.0)
        assert loads.pulse_busy(20.9)
        assert not loads.pulse_busy(21.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            LoadModel(p_pr=-1.0)
        loads = LoadModel()
        with pytest.raises(ValueError):
            loads.set_propulsion(-1.0, 0.5)
        with pytest.raises(ValueError):
            loads.set_propulsion(2.0, 0.0)


class TestPlantStep:
    def test_balanced_bus_zero_slack(self):
        plant = make_plant()
        s = plant.step(state([0.6, 0.3], p_pr=0.9), command([0.6, 0.3]), 0.9, 0.0)
        assert s.p_es_bus == pytest.approx(0.0, abs=1e-15)
        assert s.e_es == pytest.approx(8.0, abs=1e-12)
        assert s.flags == PlantFlags()

    def test_slack_discharge_integrates_energy(self):
        plant = make_plant()
        s = plant.step(state([0.6, 0.3]), command([0.6, 0.3]), 1.0, 0.0)
        assert s.p_es_bus == pytest.approx(0.1, abs=1e-12)
        assert s.e_es == pytest.approx(7.999, abs=1e-12)

    def test_charge_raises_energy(self):
        plant = make_plant()
        s = plant.step(state([0.6, 0.3], e_es=5.0), command([0.6, 0.3]), 0.5, 0.0)
        assert s.p_es_bus == pytest.approx(-0.4, abs=1e-12)
        assert s.e_es == pytest.approx(5.004, abs=1e-12)

    def test_ramp_clamp_toward_large_command(self):
        plant = make_plant()
        s = plant.step(state([0.667, 0.0]), command([1.0, 0.0]), 0.667, 0.0)
        assert s.p_gen[0] == pytest.approx(0.669, abs=1e-12)
        assert s.flags.gen_limit_hit

    def test_ramp_clamp_downward(self):
        plant = make_plant()
        s = plant.step(state([1.0, 0.5]), command([0.0, 0.0]), 1.5, 0.0)
        assert s.p_gen == (pytest.approx(0.998), pytest.approx(0.499))
        assert s.flags.gen_limit_hit

    def test_power_cap(self):
        plant = make_plant()
        s = plant.step(state([3.9995, 0.0]), command([4.2, 0.0]), 4.0, 0.0)
        assert s.p_gen[0] == 4.0
        assert s.flags.gen_limit_hit

    def test_command_within_reach_hits_exactly(self):
        plant = make_plant()
        s = plant.step(state([0.6, 0.3]), command([0.6015, 0.3005]), 0.902, 0.0)
        assert s.p_gen == (0.6015, 0.3005)
        assert not s.flags.gen_limit_hit

    def test_es_power_clamp_and_imbalance(self):
        plant = make_plant()
        s = plant.step(state([0.0, 0.0]), command([0.0, 0.0]), 4.0, 16.0)
        assert s.p_es_bus == 8.0
        assert s.flags.es_power_clamped
        assert s.imbalance == pytest.approx(12.0, abs=1e-12)

    def test_es_energy_clamp_at_empty(self):
        plant = make_plant()
        s = plant.step(state([0.0, 0.0], e_es=0.0005), command([0.0, 0.0]), 0.1, 0.0)
        assert s.e_es == 0.0
        assert s.flags.es_energy_clamped

    def test_es_energy_clamp_at_full(self):
        plant = make_plant()
        s = plant.step(state([1.0, 0.5], e_es=9.9999), command([1.0, 0.5]), 0.5, 0.0)
        assert s.e_es == 10.0
        assert s.flags.es_energy_clamped

    def test_energy_conservation_unclamped_window(self):
        plant = make_plant()
        rng = np.random.default_rng(7)
        s = state([0.6, 0.3], e_es=5.0, p_pr=0.9)
        slack_sum = 0.0
        for _ in range(400):
            p_pr = float(rng.uniform(0.5, 1.5))
            cmd = command([float(rng.uniform(0.4, 0.8)), float(rng.uniform(0.2, 0.4))])
            s = plant.step(s, cmd, p_pr, 0.0)
            assert s.flags == PlantFlags(gen_limit_hit=s.flags.gen_limit_hit)
            slack_sum += s.p_es_bus
        assert abs((s.e_es - 5.0) + T * slack_sum) <= 1e-9

    def test_bus_balance_when_unclamped(self):
        plant = make_plant()
        rng = np.random.default_rng(11)
        s = state([0.6, 0.3], p_pr=0.9)
        for _ in range(200):
            p_pr = float(rng.uniform(0.0, 4.0))
            p_ppl = float(rng.uniform(0.0, 2.0))
            cmd = command([float(rng.uniform(0.0, 4.0)), float(rng.uniform(0.0, 2.0))])
            s = plant.step(s, cmd, p_pr, p_ppl)
            if not s.flags.es_power_clamped:
                assert abs(sum(s.p_gen) + s.p_es_bus - (p_pr + p_ppl)) <= 1e-9

    def test_gen_steps_respect_rated_ramps(self):
        plant = make_plant()
        rng = np.random.default_rng(3)
        s = state([1.0, 0.5], p_pr=1.5)
        for _ in range(300):
            cmd = command([float(rng.uniform(0.0, 4.0)), float(rng.uniform(0.0, 2.0))])
            prev = s.p_gen
            s = plant.step(s, cmd, 1.5, 0.0)
            for i, g in enumerate([GEN1, GEN2]):
                assert T * g.r_min - 1e-12 <= s.p_gen[i] - prev[i] <= T * g.r_max + 1e-12

    def test_time_advances_on_grid(self):
        plant = make_plant()
        s = state([0.6, 0.3])
        s = plant.step(s, command([0.6, 0.3]), 0.9, 0.0, t_next=T)
        assert s.t == T
        s = plant.step(s, command([0.6, 0.3]), 0.9, 0.0)
        assert s.t == pytest.approx(2 * T, abs=1e-15)


class TestTelemetry:
    def test_currents_at_nominal_voltage(self):
        plant = make_plant()
        s = PlantState(
            t=0.0,
            p_gen=(2.0, 1.0),
            p_es_bus=0.4,
            e_es=8.0,
            p_pr=3.0,
            p_ppl=0.4,
        )
        f = plant.to_telemetry(s, DispatchMode.TRACKING, step=0)
        assert f.i_gen1 == pytest.approx(5.0, abs=1e-12)
        assert f.i_gen2 == pytest.approx(2.5, abs=1e-12)
        assert f.i_es == pytest.approx(1.0, abs=1e-12)
        assert f.i_pr == pytest.approx(7.5, abs=1e-12)
        assert f.soc_pct == pytest.approx(80.0, abs=1e-12)
        assert f.mode == "Tracking"
        assert f.flags == ""

    def test_initial_frame_csv_row(self):
        plant = make_plant()
        s = initial_state([GEN1, GEN2], ES, p_pr=1.0)
        f = plant.to_telemetry(s, DispatchMode.TRACKING, step=0)
        assert f.csv_row() == (
            "0.000000,0.666667,0.333333,0.000000,8.000000,80.000000,"
            "1.000000,0.000000,1.666667,0.833333,0.000000,2.500000,"
            "0.000000,Tracking,"
        )

    def test_negative_zero_normalized(self):
        f = TelemetryFrame(
            step=0,
            t=0.0,
            p_gen1=-0.0,
            p_gen2=0.0,
            p_es_bus=-0.0,
            e_es=8.0,
            soc_pct=80.0,
            p_pr=0.0,
            p_ppl=0.0,
            i_gen1=-0.0,
            i_gen2=0.0,
            i_es=-0.0,
            i_pr=0.0,
            i_ppl=0.0,
            mode="Tracking",
            flags="",
        )
        row = f.csv_row()
        assert "-0.000000" not in row

    def test_flags_tokens_round_trip(self):
        for flags in [
            PlantFlags(),
            PlantFlags(es_power_clamped=True),
            PlantFlags(es_energy_clamped=True, gen_limit_hit=True),
            PlantFlags(True, True, True),
        ]:
            assert PlantFlags.from_tokens(flags.tokens()) == flags

    def test_flags_column_in_row(self):
        plant = make_plant()
        s = PlantState(
            t=1.0,
            p_gen=(4.0, 2.0),
            p_es_bus=8.0,
            e_es=1.0,
            p_pr=10.0,
            p_ppl=6.0,
            flags=PlantFlags(es_power_clamped=True, gen_limit_hit=True),
            imbalance=2.0,
        )
        f = plant.to_telemetry(s, DispatchMode.SATURATED_UP, step=100)
        assert f.csv_row().endswith("SaturatedUp,es_power_clamped;gen_limit_hit")


class TestInitialState:
    def test_upward_weights_split(self):
        s = initial_state([GEN1, GEN2], ES, p_pr=1.0)
        assert s.p_gen[0] == pytest.approx(2.0 / 3.0, abs=1e-15)
        assert s.p_gen[1] == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert s.e_es == 8.0
        assert s.p_es_bus == 0.0

    def test_zero_load(self):
        s = initial_state([GEN1, GEN2], ES, p_pr=0.0)
        assert s.p_gen == (0.0, 0.0)


def test_bad_plant_parameters():
    with pytest.raises(ValueError):
        Plant(gens=[GEN1, GEN2], storage=ES, v_bus_nominal=0.0, T=T)
    with pytest.raises(ValueError):
        Plant(gens=[GEN1, GEN2], storage=ES, v_bus_nominal=400.0, T=-0.01)
