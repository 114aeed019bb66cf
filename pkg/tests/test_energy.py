"""Energy model tests: storage integration, budgets, sizing."""

import math

import numpy as np
import pytest

from luxnet.channel import OpticalReceiver, PvCalibration
from luxnet.energy import (
    DEFAULT_PROFILE,
    AutonomyBudget,
    EtxBurstEntry,
    EtxBurstPlan,
    HarvesterArray,
    HarvesterCell,
    PowerProfile,
    StorageCapacitor,
    autonomy_margin,
    default_harvester,
    dynamic_power,
    min_capacitance,
    pv_open_voltage,
    recovery_time,
    scavenged_energy,
    storage_step,
)


def make_cap(voltage=4.5, leak=10e-6, v_min=3.3):
    return StorageCapacitor(capacitance=0.4, voltage=voltage, v_min=v_min,
                            leak_power=leak)


def test_capacitor_energy_voltage_round_trip():
    cap = make_cap(voltage=3.7)
    assert cap.energy == pytest.approx(0.5 * 0.4 * 3.7 ** 2)
    assert cap.voltage_at(cap.energy) == pytest.approx(3.7, abs=1e-12)
    assert cap.energy_full == pytest.approx(0.5 * 0.4 * 4.5 ** 2)


def test_capacitor_invariants():
    with pytest.raises(ValueError):
        StorageCapacitor(capacitance=0.0)
    with pytest.raises(ValueError):
        StorageCapacitor(voltage=4.6)
    with pytest.raises(ValueError):
        StorageCapacitor(voltage=-0.1)
    with pytest.raises(ValueError):
        StorageCapacitor(v_ovdis=3.9, v_chrdy=3.8)
    with pytest.raises(ValueError):
        StorageCapacitor(v_min=3.0)  # below the hard undervoltage floor


def test_power_profile_invariants():
    with pytest.raises(ValueError):
        PowerProfile(sleep=600e-6, standby=550e-6, sense=3e-3,
                     data_tx=12e-3, etx=20e-3, decode=2e-3)
    with pytest.raises(ValueError):
        PowerProfile(sleep=15e-6, standby=0.95e-3, sense=3e-3,
                     data_tx=12e-3, etx=20e-3, decode=2e-3)
    with pytest.raises(ValueError):
        PowerProfile(sleep=-1e-6, standby=550e-6, sense=3e-3,
                     data_tx=12e-3, etx=20e-3, decode=2e-3)


def test_default_profile_idle_draws_below_single_cell_generation():
    assert DEFAULT_PROFILE.sleep < DEFAULT_PROFILE.standby < 0.9e-3


def test_storage_step_equilibrium():
    cap = make_cap(voltage=4.0, leak=0.0)
    stepped = storage_step(cap, p_in=1e-3, p_out=1e-3, dt=10.0)
    assert stepped.voltage == pytest.approx(4.0, abs=1e-12)


def test_storage_step_frozen_discharge():
    # 2.0025 J net drain from full is exactly the 4.5 -> 3.2 V span
    cap = make_cap(voltage=4.5, leak=0.0)
    stepped = storage_step(cap, p_in=0.0, p_out=2.0025, dt=1.0)
    assert stepped.voltage == pytest.approx(3.2, abs=1e-3)


def test_storage_step_clamps_at_v_max_and_zero():
    cap = make_cap(voltage=4.5, leak=0.0)
    assert storage_step(cap, p_in=1.0, p_out=0.0, dt=100.0).voltage == pytest.approx(4.5)
    cap_low = make_cap(voltage=0.5, leak=0.0)
    assert storage_step(cap_low, p_in=0.0, p_out=1.0, dt=100.0).voltage == 0.0


def test_storage_step_leak_only():
    cap = make_cap(voltage=4.5, leak=10e-6)
    stepped = storage_step(cap, p_in=0.0, p_out=0.0, dt=3600.0)
    expected_v = math.sqrt(2.0 * (cap.energy - 10e-6 * 3600.0) / 0.4)
    assert stepped.voltage == pytest.approx(expected_v, rel=1e-12)


def test_storage_step_matches_fine_integration_without_clamp():
    # the energy model is linear in time, so one coarse step equals
    # many fine ones exactly when no clamp fires
    rng = np.random.default_rng(31)
    for _ in range(20):
        v0 = float(rng.uniform(3.3, 4.4))
        p_in = float(rng.uniform(0.0, 3e-3))
        p_out = float(rng.uniform(0.0, 3e-3))
        cap = make_cap(voltage=v0)
        coarse = storage_step(cap, p_in, p_out, dt=10.0)
        fine = cap
        for _ in range(100):
            fine = storage_step(fine, p_in, p_out, dt=0.1)
        assert fine.voltage == pytest.approx(coarse.voltage, abs=1e-9)


def test_storage_step_validation():
    cap = make_cap()
    with pytest.raises(ValueError):
        storage_step(cap, p_in=0.0, p_out=0.0, dt=0.0)
    with pytest.raises(ValueError):
        storage_step(cap, p_in=-1.0, p_out=0.0, dt=1.0)


def test_recovery_time_frozen_value():
    cap = make_cap(leak=10e-6)
    # net climb power of 4.45 mW across the full hysteresis span
    t = recovery_time(cap, p_harvest=4.46e-3, p_sleep=0.0,
                      v_from=3.2, v_to=4.5)
    assert t == pytest.approx(449.888, rel=1e-4)


def test_recovery_time_edges():
    cap = make_cap()
    assert recovery_time(cap, 1e-3, 0.0, 3.5, 3.5) == 0.0
    with pytest.raises(ValueError):
        recovery_time(cap, 1e-5, 1e-5, 3.2, 4.5)  # net <= 0
    with pytest.raises(ValueError):
        recovery_time(cap, 1e-3, 0.0, 4.5, 3.2)
    # doubling net power halves the time
    t1 = recovery_time(cap, 2.01e-3, 1e-3, 3.2, 4.5)
    t2 = recovery_time(cap, 3.01e-3, 1e-3, 3.2, 4.5)
    assert t1 == pytest.approx(2.0 * t2, rel=1e-9)


def test_min_capacitance_frozen_value():
    c = min_capacitance(e_peak=2.0, eta_pmic_l=0.85, p_leak=10e-6,
                        t_peak=40.0, v_max=4.5, v_min=3.2)
    assert c == pytest.approx(0.4702, rel=1e-3)


def test_min_capacitance_edges():
    assert min_capacitance(0.0, 0.85, 0.0, 40.0, 4.5, 3.2) == 0.0
    base = min_capacitance(1.0, 0.9, 1e-5, 10.0, 4.5, 3.2)
    # halving the voltage-squared span doubles the result
    span = 4.5 ** 2 - 3.2 ** 2
    v_min2 = math.sqrt(4.5 ** 2 - span / 2.0)
    assert min_capacitance(1.0, 0.9, 1e-5, 10.0, 4.5, v_min2) == pytest.approx(
        2.0 * base, rel=1e-9)
    with pytest.raises(ValueError):
        min_capacitance(1.0, 0.85, 0.0, 1.0, 3.2, 4.5)
    with pytest.raises(ValueError):
        min_capacitance(1.0, 0.0, 0.0, 1.0, 4.5, 3.2)


def test_min_capacitance_cross_check_by_integration():
    # a capacitor of exactly C_min, drained by the peak plus leak,
    # lands on v_min
    c_min = min_capacitance(2.0, 0.85, 10e-6, 40.0, 4.5, 3.2)
    cap = StorageCapacitor(capacitance=c_min, voltage=4.5, v_min=3.2,
                           leak_power=10e-6)
    p_load = (2.0 / 0.85) / 40.0
    for _ in range(4000):
        cap = storage_step(cap, p_in=0.0, p_out=p_load, dt=0.01)
    assert cap.voltage == pytest.approx(3.2, abs=1e-6)


def test_dynamic_power_frozen_value():
    assert dynamic_power(1e-12, 3.3, 8e6) == pytest.approx(8.712e-5, rel=1e-9)
    assert dynamic_power(1e-12, 0.0, 8e6) == 0.0
    assert dynamic_power(1e-12, 6.6, 8e6) == pytest.approx(4 * 8.712e-5, rel=1e-9)


def test_scavenged_energy_frozen_example():
    cell = HarvesterCell(conversion_efficiency=0.2)
    harv = HarvesterArray(cells=(cell,))
    plan = EtxBurstPlan(entries=(
        EtxBurstEntry(n_bursts=6, p_receive_per_cell=(1e-3,), t_energy_net=40.0),
    ))
    e = scavenged_energy(3600.0, harv, plan, p_illum_per_cell=[4.5e-3])
    assert e == pytest.approx(3.288, rel=1e-9)


def test_scavenged_energy_zero_sources():
    harv = HarvesterArray(cells=(HarvesterCell(),))
    assert scavenged_energy(3600.0, harv, EtxBurstPlan(), [0.0]) == 0.0


def test_scavenged_energy_linearity():
    rng = np.random.default_rng(33)
    cells = tuple(HarvesterCell(conversion_efficiency=float(rng.uniform(0.1, 1.0)))
                  for _ in range(3))
    harv = HarvesterArray(cells=cells)
    n = int(rng.integers(1, 10))
    p_rx = tuple(float(x) for x in rng.uniform(0.0, 1e-3, size=3))
    plan1 = EtxBurstPlan(entries=(EtxBurstEntry(n, p_rx, 40.0),))
    plan2 = EtxBurstPlan(entries=(EtxBurstEntry(2 * n, p_rx, 40.0),))
    p_illum = [float(x) for x in rng.uniform(0.0, 5e-3, size=3)]
    e1 = scavenged_energy(3600.0, harv, plan1, p_illum)
    e2 = scavenged_energy(3600.0, harv, plan2, p_illum)
    e_amb = scavenged_energy(3600.0, harv, EtxBurstPlan(), p_illum)
    # doubling every burst count doubles only the burst term
    assert e2 - e_amb == pytest.approx(2.0 * (e1 - e_amb), rel=1e-9)
    # ambient term is linear in the interval
    assert scavenged_energy(7200.0, harv, EtxBurstPlan(), p_illum) == pytest.approx(
        2.0 * e_amb, rel=1e-9)


def test_scavenged_energy_length_mismatch():
    harv = HarvesterArray(cells=(HarvesterCell(), HarvesterCell()))
    with pytest.raises(ValueError):
        scavenged_energy(10.0, harv, EtxBurstPlan(), [1e-3])
    plan = EtxBurstPlan(entries=(EtxBurstEntry(1, (1e-3,), 1.0),))
    with pytest.raises(ValueError):
        scavenged_energy(10.0, harv, plan, [1e-3, 1e-3])


def test_autonomy_margin_examples():
    zero = AutonomyBudget(0, 0, 0, 0, 0, 0)
    assert autonomy_margin(zero) == 0.0
    b = AutonomyBudget(e_scavenge=3.288, e_store=2.0, e_oper=1.0,
                       e_sense=1.0, e_process=1.0, e_transmit=1.0)
    assert autonomy_margin(b) == pytest.approx(1.288, rel=1e-9)
    short = AutonomyBudget(e_scavenge=0.5, e_store=0.0, e_oper=1.0,
                           e_sense=0.0, e_process=0.0, e_transmit=0.0)
    assert autonomy_margin(short) < 0.0


def test_harvester_power_sums_cells():
    harv = default_harvester()
    assert len(harv) == 3
    p = harv.harvest_power([1000.0, 1000.0, 1000.0])
    assert p == pytest.approx(3 * 0.9e-3, rel=1e-9)
    assert harv.harvest_power([150.0, 0.0, 0.0]) == pytest.approx(0.135e-3, rel=1e-9)
    with pytest.raises(ValueError):
        harv.harvest_power([100.0])


def test_pv_open_voltage_shape():
    assert pv_open_voltage(0.0) == 0.0
    assert pv_open_voltage(350.0) == pytest.approx(2.2)
    assert pv_open_voltage(1000.0) == pytest.approx(3.2593, rel=1e-3)
    # strictly increasing, saturating below the asymptote
    lux = np.linspace(0.0, 5000.0, 50)
    v = [pv_open_voltage(float(x)) for x in lux]
    assert all(a < b for a, b in zip(v, v[1:]))
    assert v[-1] < 4.4
    # the 3.0 V threshold falls between dim and bright room light
    assert pv_open_voltage(150.0) < 3.0 < pv_open_voltage(1000.0)
