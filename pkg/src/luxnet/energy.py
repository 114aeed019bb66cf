"""Harvester, storage, and consumption models.

Storage is an ideal supercapacitor, E = 1/2 C V^2, drained by a constant
leak and clamped to [0, full].  The power-management hysteresis lives in
two thresholds: below v_ovdis the load must disconnect (deep undervoltage),
and it may only reconnect once the cell has climbed back past v_chrdy.
v_min is the software guard floor a node keeps above the hard v_ovdis so
that scheduled work never strands it in the dead band.

Harvest is a set of photovoltaic cells, each with its own geometry
(an OpticalReceiver face), one-point linear calibration, and a conversion
efficiency.  The scavenged-energy budget over an interval T is

    E = sum_i sum_j N_j * P_rx(i,j) * t_burst(j) * eta_i
      + sum_i P_illum(i) * T * eta_i

i.e. directed energy bursts from neighbours plus steady ambient input.

The default power profile was fit against three targets at once: standby
and sleep below what a single cell makes at full room light, an unassisted
node at 150 lx lasting on the order of a working day, and burst-assisted
recovery fitting inside one reporting interval.  See the calibration
module, which re-derives the numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Tuple

from .channel import OpticalReceiver, PvCalibration, pv_input_power

# hard undervoltage thresholds of the power-management front end
V_OVERDISCHARGE = 3.2
V_CHARGE_READY = 3.8
V_STORAGE_MAX = 4.5
STORAGE_CAPACITANCE_F = 0.4
LEAK_POWER_W = 10e-6
PMIC_EFFICIENCY_DEFAULT = 0.85

PV_CELL_AREA_M2 = 2.5e-3
PV_CELLS_PER_NODE = 3

# open-circuit voltage of one cell saturates with illuminance; used by the
# role self-assessment sampling, not by the power integration
PV_OPEN_VOLTAGE_MAX = 4.4
PV_OPEN_VOLTAGE_KNEE_LUX = 350.0


def pv_open_voltage(illuminance_lux: float) -> float:
    """Open-circuit voltage of one cell at the given illuminance."""
    if illuminance_lux < 0.0:
        raise ValueError("illuminance must be non-negative")
    return PV_OPEN_VOLTAGE_MAX * illuminance_lux / (illuminance_lux + PV_OPEN_VOLTAGE_KNEE_LUX)


def illuminance_for_open_voltage(volts: float) -> float:
    """Invert pv_open_voltage: the illuminance producing this reading.

    Valid for 0 <= volts < the saturation voltage.
    """
    if not 0.0 <= volts < PV_OPEN_VOLTAGE_MAX:
        raise ValueError("voltage outside the invertible range")
    return PV_OPEN_VOLTAGE_KNEE_LUX * volts / (PV_OPEN_VOLTAGE_MAX - volts)


@dataclass(frozen=True)
class StorageCapacitor:
    """Ideal supercapacitor state plus its management thresholds."""

    capacitance: float = STORAGE_CAPACITANCE_F
    voltage: float = 0.0
    v_max: float = V_STORAGE_MAX
    v_min: float = V_OVERDISCHARGE + 0.1
    v_ovdis: float = V_OVERDISCHARGE
    v_chrdy: float = V_CHARGE_READY
    leak_power: float = LEAK_POWER_W

    def __post_init__(self):
        if self.capacitance <= 0.0:
            raise ValueError("capacitance must be positive")
        if not 0.0 <= self.voltage <= self.v_max + 1e-9:
            raise ValueError(f"voltage {self.voltage} outside [0, v_max]")
        if not self.v_ovdis < self.v_chrdy <= self.v_max:
            raise ValueError("need v_ovdis < v_chrdy <= v_max")
        if self.v_min < self.v_ovdis:
            raise ValueError("v_min must not sit below v_ovdis")
        if self.leak_power < 0.0:
            raise ValueError("leak power must be non-negative")

    @property
    def energy(self) -> float:
        """Stored energy, 1/2 C V^2, joules."""
        return 0.5 * self.capacitance * self.voltage ** 2

    @property
    def energy_full(self) -> float:
        return 0.5 * self.capacitance * self.v_max ** 2

    def energy_at(self, voltage: float) -> float:
        return 0.5 * self.capacitance * voltage ** 2

    def voltage_at(self, energy_j: float) -> float:
        if energy_j < 0.0:
            raise ValueError("energy must be non-negative")
        return math.sqrt(2.0 * energy_j / self.capacitance)

    def with_voltage(self, voltage: float) -> "StorageCapacitor":
        return replace(self, voltage=voltage)


@dataclass(frozen=True)
class PowerProfile:
    """Electrical draw of each node activity, watts.

    Sleep and standby must both stay under the 0.9 mW a single cell
    produces at full room light, otherwise idle life is not sustainable.
    """

    sleep: float
    standby: float
    sense: float
    data_tx: float
    etx: float
    decode: float

    _SINGLE_CELL_BOUND_W = 0.9e-3

    def __post_init__(self):
        draws = (self.sleep, self.standby, self.sense, self.data_tx,
                 self.etx, self.decode)
        if any(p < 0.0 for p in draws):
            raise ValueError("power draws must be non-negative")
        if not self.sleep < self.standby:
            raise ValueError("sleep draw must sit below standby draw")
        if self.standby >= self._SINGLE_CELL_BOUND_W:
            raise ValueError("standby draw must stay below single-cell generation")


# Fit by the calibration module; see its docstring for the three targets.
DEFAULT_PROFILE = PowerProfile(
    sleep=180e-6,
    standby=550e-6,
    sense=11.0e-3,
    data_tx=12.0e-3,
    etx=52.7e-3,
    decode=2.0e-3,
)


@dataclass(frozen=True)
class HarvesterCell:
    """One photovoltaic face: efficiency, calibration, geometry."""

    conversion_efficiency: float = 1.0
    calibration: PvCalibration = field(default_factory=PvCalibration)
    receiver: OpticalReceiver = field(default_factory=lambda: OpticalReceiver(
        area_m2=PV_CELL_AREA_M2))

    def __post_init__(self):
        if not 0.0 < self.conversion_efficiency <= 1.0:
            raise ValueError("conversion efficiency must be in (0, 1]")

    def electrical_power(self, illuminance_lux: float) -> float:
        return self.conversion_efficiency * pv_input_power(
            illuminance_lux, self.calibration)


@dataclass(frozen=True)
class HarvesterArray:
    """The full set of cells on one node."""

    cells: Tuple[HarvesterCell, ...]

    def __post_init__(self):
        if len(self.cells) == 0:
            raise ValueError("harvester needs at least one cell")

    def __len__(self) -> int:
        return len(self.cells)

    def harvest_power(self, illuminance_per_cell: Sequence[float]) -> float:
        """Total electrical watts given per-face illuminance."""
        if len(illuminance_per_cell) != len(self.cells):
            raise ValueError("one illuminance value per cell required")
        return sum(c.electrical_power(lux)
                   for c, lux in zip(self.cells, illuminance_per_cell))


def default_harvester(cells: int = PV_CELLS_PER_NODE) -> HarvesterArray:
    return HarvesterArray(cells=tuple(HarvesterCell() for _ in range(cells)))


@dataclass(frozen=True)
class EtxBurstEntry:
    """Bursts expected from one neighbour over the budget interval."""

    n_bursts: int
    p_receive_per_cell: Tuple[float, ...]   # electrical-equivalent watts per cell
    t_energy_net: float                     # seconds one burst lasts

    def __post_init__(self):
        if self.n_bursts < 0:
            raise ValueError("burst count must be non-negative")
        if self.t_energy_net <= 0.0:
            raise ValueError("burst duration must be positive")
        if any(p < 0.0 for p in self.p_receive_per_cell):
            raise ValueError("received powers must be non-negative")


@dataclass(frozen=True)
class EtxBurstPlan:
    """All neighbours' planned bursts toward one node."""

    entries: Tuple[EtxBurstEntry, ...] = ()


@dataclass(frozen=True)
class AutonomyBudget:
    """Joules over one interval, income against the four consumption buckets."""

    e_scavenge: float
    e_store: float
    e_oper: float
    e_sense: float
    e_process: float
    e_transmit: float

    def __post_init__(self):
        for name in ("e_scavenge", "e_store", "e_oper", "e_sense",
                     "e_process", "e_transmit"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


def autonomy_margin(budget: AutonomyBudget) -> float:
    """Signed joules of headroom; positive means the node is autonomous."""
    income = budget.e_scavenge + budget.e_store
    outgo = (budget.e_oper + budget.e_sense + budget.e_process
             + budget.e_transmit)
    return income - outgo


def scavenged_energy(interval_s: float, harvesters: HarvesterArray,
                     plan: EtxBurstPlan,
                     p_illum_per_cell: Sequence[float]) -> float:
    """Energy gathered over the interval: bursts plus ambient, joules.

    p_illum_per_cell is the pre-conversion input power on each cell from
    steady light; each burst entry carries its own per-cell received
    powers.  Both are scaled by the cell's conversion efficiency.
    """
    if interval_s <= 0.0:
        raise ValueError("interval must be positive")
    if len(p_illum_per_cell) != len(harvesters.cells):
        raise ValueError("one ambient power value per cell required")
    for entry in plan.entries:
        if len(entry.p_receive_per_cell) != len(harvesters.cells):
            raise ValueError("one received power value per cell per entry")

    burst = 0.0
    for entry in plan.entries:
        for cell, p_rx in zip(harvesters.cells, entry.p_receive_per_cell):
            burst += (entry.n_bursts * p_rx * entry.t_energy_net
                      * cell.conversion_efficiency)
    ambient = sum(cell.conversion_efficiency * p * interval_s
                  for cell, p in zip(harvesters.cells, p_illum_per_cell))
    return burst + ambient


def min_capacitance(e_peak: float, eta_pmic_l: float, p_leak: float,
                    t_peak: float, v_max: float, v_min: float) -> float:
    """Smallest capacitance that rides out a peak load of e_peak joules.

    C = 2 (e_peak / eta + p_leak t_peak) / (v_max^2 - v_min^2)
    """
    if not 0.0 < eta_pmic_l <= 1.0:
        raise ValueError("PMIC efficiency must be in (0, 1]")
    if e_peak < 0.0 or p_leak < 0.0 or t_peak < 0.0:
        raise ValueError("energy, leak, and duration must be non-negative")
    if not v_max > v_min >= 0.0:
        raise ValueError("need v_max > v_min >= 0")
    return 2.0 * (e_peak / eta_pmic_l + p_leak * t_peak) / (v_max ** 2 - v_min ** 2)


def dynamic_power(k: float, v_supply: float, f_operating: float) -> float:
    """Switching dissipation k V^2 f of a digital core, watts."""
    if k < 0.0 or v_supply < 0.0 or f_operating < 0.0:
        raise ValueError("arguments must be non-negative")
    return k * v_supply ** 2 * f_operating


def storage_step(cap: StorageCapacitor, p_in: float, p_out: float,
                 dt: float) -> StorageCapacitor:
    """Advance the capacitor by dt under net power p_in - p_out - leak.

    Energy clamps to [0, full]; the clamp is the contract, callers that
    care about the discarded amount should compare energies themselves.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if p_in < 0.0 or p_out < 0.0:
        raise ValueError("powers must be non-negative")
    e = cap.energy + (p_in - p_out - cap.leak_power) * dt
    e = min(max(e, 0.0), cap.energy_full)
    return cap.with_voltage(cap.voltage_at(e))


def recovery_time(cap: StorageCapacitor, p_harvest: float, p_sleep: float,
                  v_from: float, v_to: float) -> float:
    """Seconds to climb from v_from to v_to while sleeping, constant harvest."""
    if v_to < v_from:
        raise ValueError("v_to must not sit below v_from")
    net = p_harvest - p_sleep - cap.leak_power
    if v_to == v_from:
        return 0.0
    if net <= 0.0:
        raise ValueError("net power is non-positive, target voltage unreachable")
    return 0.5 * cap.capacitance * (v_to ** 2 - v_from ** 2) / net
