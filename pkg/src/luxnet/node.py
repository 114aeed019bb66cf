"""Sensor node state machine.

A node is a capacitor-backed microcontroller with photovoltaic faces, an
optical downlink receiver, an uplink LED, and (on well-lit nodes) a power
LED for energy transmission.  Its life is a loop over a handful of states:

    Init         boot, sample the PV terminal, pick a role
    Standby      receiver on, waiting for frames
    Decoding     a frame is being clocked in
    Sensing      measurement cycle, ends with one uplink report
    DataRelay    forwarding a neighbour's report toward the access point
    EnergyRelay  power LED on, draining the capacitor into a neighbour
    Sleep        everything off except the wake timer
    Depleted     undervoltage lockout, load disconnected

Role selection reads the PV terminal three times, 50 ms apart, and takes
the minimum; a node calls itself primary (PSN) only when that minimum
clears 3.0 V, which keeps one bright flicker from promoting a dim node.
Primary nodes keep their receiver on and serve requests; secondary nodes
(SSN) sleep and wake on an internal timer every t_int seconds to report.

Every task is gated by an energy guard: the stored energy after paying
for the task must not fall below the guard floor 1/2 C v_min^2.  A failed
guard forces sleep until the storage recovers.  Separately from v_min,
the hardware hysteresis pair (v_ovdis, v_chrdy) defines Depleted: load
cut below v_ovdis, reconnect only above v_chrdy.

Energy transmission is deliberately greedy: a session starts only from a
full capacitor and runs until the storage sags to v_min or the configured
burst length elapses, whichever is first, then the node sleeps back up to
full.  Requests that arrive before the capacitor is full stay pending and
fire as soon as it fills.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .channel import OpticalTransmitter
from .energy import (
    DEFAULT_PROFILE,
    HarvesterArray,
    PowerProfile,
    StorageCapacitor,
    default_harvester,
    pv_open_voltage,
    storage_step,
)
from .protocol import (
    Command,
    Frame44,
    NodeToOap,
    OapToNode,
    OAP_ADDRESS,
    BROADCAST_ADDRESS,
    DEFAULT_BITRATE_BPS,
    WORD_BITS,
    airtime_s,
    quantize_temperature,
    quantize_voltage,
)

PSN_PV_THRESHOLD_V = 3.0
ROLE_SAMPLE_COUNT = 3
# sampling finishes inside the first kernel step so a freshly booted node
# is already listening when the opening broadcast lands
ROLE_SAMPLE_SPACING_S = 0.03

# a node lingering in Standby with nothing to do for this long goes to
# sleep; primaries never do (their job is to listen)
STANDBY_IDLE_TIMEOUT_S = 30.0


class NodeMode(Enum):
    PSN = "PSN"
    SSN = "SSN"


class NodeState(Enum):
    INIT = "Init"
    STANDBY = "Standby"
    DECODING = "Decoding"
    SENSING = "Sensing"
    DATA_RELAY = "DataRelay"
    ENERGY_RELAY = "EnergyRelay"
    SLEEP = "Sleep"
    DEPLETED = "Depleted"


@dataclass(frozen=True)
class TimingParams:
    """Protocol timing constants shared by nodes and the access point."""

    t_int: float = 3600.0
    t_sense: float = 9.53
    t_energy_net: float = 40.0
    t_energy_net_rec: float = 450.0
    t_data_net_rec: float = 40.0
    t_standby: float = 600.94

    def __post_init__(self):
        for name in ("t_int", "t_sense", "t_energy_net", "t_energy_net_rec",
                     "t_data_net_rec", "t_standby"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


DEFAULT_TIMING = TimingParams()


def check_interval_consistency(timing: TimingParams, n: int) -> float:
    """Residual of the interval decomposition at burst count n, seconds.

    Zero when the standby figure, two sensing windows (one inside the
    data-networking block, one alongside it), the recovery allowance, and
    n full burst-plus-recovery slots tile the interval exactly.
    """
    used = (timing.t_standby + 2.0 * timing.t_sense + timing.t_data_net_rec
            + n * (timing.t_energy_net_rec + timing.t_energy_net))
    return timing.t_int - used


def select_role(pv_samples: Sequence[float]) -> NodeMode:
    """Role from three spaced PV terminal readings: primary iff min > 3.0 V."""
    if len(pv_samples) != ROLE_SAMPLE_COUNT:
        raise ValueError(f"exactly {ROLE_SAMPLE_COUNT} samples required")
    return NodeMode.PSN if min(pv_samples) > PSN_PV_THRESHOLD_V else NodeMode.SSN


@dataclass
class NodeRecord:
    """Full state of one node, owned and advanced by the simulation kernel."""

    node_id: int
    storage: StorageCapacitor
    harvesters: HarvesterArray = field(default_factory=default_harvester)
    profile: PowerProfile = DEFAULT_PROFILE
    timing: TimingParams = DEFAULT_TIMING
    mode: NodeMode = NodeMode.SSN
    state: NodeState = NodeState.INIT
    v_pv: float = 0.0
    pending_n: int = 0
    assigned_n: int = 0

    # geometry and policy
    led: Optional[OpticalTransmitter] = None   # energy-burst emitter, if fitted
    uplink_dest: int = OAP_ADDRESS
    etx_autonomous: bool = False
    sensing_enabled: bool = True
    pv_noise_v: float = 0.0
    sensor_base_c: float = 25.0
    sensor_noise_c: float = 0.0
    bitrate_bps: float = DEFAULT_BITRATE_BPS

    # bookkeeping, managed by step_node
    state_elapsed: float = 0.0
    next_report_s: float = 0.0
    reply_dest: Optional[int] = None
    instant_cost_j: float = 0.0
    led_active: bool = False
    # remaining seconds of the running burst session, and the on-air
    # share of the current step (1.0 mid-session, fractional on the
    # closing step so the emitted energy is exact at any step size)
    session_remaining_s: float = 0.0
    session_cause: str = ""
    led_fraction: float = 0.0

    def __post_init__(self):
        if not 1 <= self.node_id <= 15:
            raise ValueError("node id must be 1..15 (0 is the access point)")
        if self.pending_n < 0:
            raise ValueError("pending burst count must be non-negative")

    # -- energy helpers ------------------------------------------------

    @property
    def guard_floor_j(self) -> float:
        return self.storage.energy_at(self.storage.v_min)

    def frame_airtime_s(self) -> float:
        return airtime_s(WORD_BITS, self.bitrate_bps)

    def sense_cycle_cost_j(self) -> float:
        """Energy for one full measurement-and-report cycle."""
        return (self.profile.sense * self.timing.t_sense
                + self.profile.data_tx * self.frame_airtime_s())


def energy_guard(node: NodeRecord, task_cost: float) -> bool:
    """True when the storage can pay task_cost without breaching v_min."""
    if task_cost < 0.0:
        raise ValueError("task cost must be non-negative")
    return node.storage.energy - task_cost >= node.guard_floor_j - 1e-12


def etx_session(node: NodeRecord, harvest_power_w: float = 0.0
                ) -> Tuple[float, float]:
    """Planned energy-burst session from the node's current charge.

    Returns (duration_s, transmitted_energy_j).  The session ends when
    storage reaches v_min or after t_energy_net seconds, whichever comes
    first; transmitted energy is the drive power times the duration.
    """
    available = node.storage.energy - node.guard_floor_j
    if available <= 0.0:
        return 0.0, 0.0
    net_drain = node.profile.etx + node.storage.leak_power - harvest_power_w
    if net_drain <= 0.0:
        duration = node.timing.t_energy_net
    else:
        duration = min(node.timing.t_energy_net, available / net_drain)
    return duration, node.profile.etx * duration


@dataclass
class NodeInputs:
    """What the kernel hands a node for one integration step."""

    now: float
    lux_per_face: Tuple[float, ...]
    frames: List[Frame44] = field(default_factory=list)


@dataclass
class NodeStepResult:
    emitted: List[Frame44] = field(default_factory=list)
    events: List[str] = field(default_factory=list)
    dropped: List[Tuple[Frame44, str]] = field(default_factory=list)


# Sensing and burst sessions are metered exactly against their phase
# clocks through instant costs, so those states carry only the sleep
# baseline here; the metering adds (phase power - sleep) per in-phase
# second.  Totals then come out independent of the integration step.
_STATE_DRAW_ATTR = {
    NodeState.INIT: "standby",
    NodeState.STANDBY: "standby",
    NodeState.DECODING: "standby",
    NodeState.SENSING: "sleep",
    NodeState.DATA_RELAY: "standby",
    NodeState.ENERGY_RELAY: "sleep",
    NodeState.SLEEP: "sleep",
}


def state_draw_w(node: NodeRecord) -> float:
    """Baseline draw of the current state (Depleted draws nothing)."""
    if node.state is NodeState.DEPLETED:
        return 0.0
    return getattr(node.profile, _STATE_DRAW_ATTR[node.state])


def _sample_pv(node: NodeRecord, lux_per_face: Sequence[float],
               rng: np.random.Generator) -> float:
    """One PV terminal reading: brightest face sets the terminal."""
    v = pv_open_voltage(max(lux_per_face))
    if node.pv_noise_v > 0.0:
        v += float(rng.normal(0.0, node.pv_noise_v))
    return max(v, 0.0)


def _role_samples(node: NodeRecord, lux_per_face: Sequence[float],
                  rng: np.random.Generator) -> List[float]:
    # three reads spaced 50 ms; the field is static over that window in
    # this simulator, so the spacing matters only under configured noise
    return [_sample_pv(node, lux_per_face, rng)
            for _ in range(ROLE_SAMPLE_COUNT)]


def _enter(node: NodeRecord, state: NodeState) -> None:
    node.state = state
    node.state_elapsed = 0.0


def _schedule_next_report(node: NodeRecord, now: float) -> None:
    k = math.floor((now + 1e-9) / node.timing.t_int) + 1
    node.next_report_s = k * node.timing.t_int


def _build_report(node: NodeRecord, dest: int, sensor_c: float) -> Frame44:
    cap_v = min(node.storage.voltage, node.storage.v_max)
    payload = NodeToOap(
        sender_id=node.node_id,
        pv_level=quantize_voltage(min(max(node.v_pv, 0.0), 5.10)),
        cap_level=quantize_voltage(min(max(cap_v, 0.0), 5.10)),
        sensor=quantize_temperature(min(max(sensor_c, -40.0), 87.5)),
    )
    return Frame44(dest_address=dest, payload=payload)


def handle_frame(node: NodeRecord, frame: Frame44,
                 result: NodeStepResult, now: float = 0.0) -> None:
    """Dispatch one delivered frame.  The node must be listening.

    Address mismatch is a false wakeup: the decode energy is spent and
    nothing else happens.  A frame from the access point switches state
    by command; a frame from another node asks this one to relay it.
    """
    if node.state is NodeState.DEPLETED:
        result.dropped.append((frame, "depleted receiver"))
        return
    if node.state not in (NodeState.STANDBY, NodeState.DECODING):
        result.dropped.append((frame, "receiver not listening"))
        return

    decode_cost = node.profile.decode * node.frame_airtime_s()
    node.instant_cost_j += decode_cost

    if frame.dest_address not in (node.node_id, BROADCAST_ADDRESS):
        result.events.append("false wakeup")
        _enter(node, NodeState.STANDBY)
        return

    payload = frame.payload
    if isinstance(payload, OapToNode):
        command = payload.command
        if command == Command.INIT_CONFIG:
            if payload.param > 0:
                node.timing = replace(node.timing, t_int=float(payload.param))
            result.events.append(f"config t_int={payload.param}")
        elif command == Command.DATA_REQUEST:
            cost = node.sense_cycle_cost_j()
            if energy_guard(node, cost):
                node.reply_dest = OAP_ADDRESS
                _enter(node, NodeState.SENSING)
                result.events.append("data request accepted")
            else:
                # not enough margin: sleep it off rather than brown out
                result.events.append("data request refused (guard)")
                if node.mode is NodeMode.SSN:
                    _schedule_next_report(node, now)
                _enter(node, NodeState.SLEEP)
        elif command == Command.ETX_REQUEST:
            if node.mode is NodeMode.PSN and node.led is not None:
                node.pending_n = payload.param
                result.events.append(f"etx request pending_n={payload.param}")
            else:
                result.events.append("etx request ignored (no emitter)")
        elif command == Command.SET_N:
            node.assigned_n = payload.param
            result.events.append(f"assigned n={payload.param}")
        else:
            result.events.append(f"unknown command {int(command)}")
        return

    # a frame authored by another node: relay it toward the access point
    if node.mode is NodeMode.PSN:
        relay_cost = node.profile.data_tx * node.frame_airtime_s()
        if energy_guard(node, relay_cost):
            node.instant_cost_j += relay_cost
            result.emitted.append(Frame44(dest_address=OAP_ADDRESS,
                                          payload=payload))
            _enter(node, NodeState.DATA_RELAY)
            result.events.append(f"relayed from node {payload.sender_id}")
        else:
            result.dropped.append((frame, "relay refused (guard)"))
    else:
        result.dropped.append((frame, "not a relay node"))


def _session_tick(node: NodeRecord, dt: float, result: NodeStepResult) -> None:
    """Consume one step of the running burst session.

    The emitter is metered against the session clock, not the step
    grid: a closing step burns and radiates only the leftover fraction,
    so the session's total energy is exact at any step size.
    """
    take = min(dt, node.session_remaining_s)
    node.session_remaining_s -= take
    node.instant_cost_j += (node.profile.etx - node.profile.sleep) * take
    node.led_fraction = take / dt
    if node.session_remaining_s <= 1e-12:
        node.session_remaining_s = 0.0
        node.led_active = False
        _enter(node, NodeState.SLEEP)
        result.events.append(f"etx end ({node.session_cause})")


def _maybe_start_etx(node: NodeRecord, inputs: NodeInputs, dt: float,
                     result: NodeStepResult) -> None:
    if node.mode is not NodeMode.PSN or node.led is None:
        return
    wants = node.pending_n > 0 or node.etx_autonomous
    if not wants:
        return
    if node.storage.voltage < node.storage.v_max - 1e-9:
        return
    harvest = node.harvesters.harvest_power(inputs.lux_per_face)
    duration, _ = etx_session(node, harvest_power_w=harvest)
    if duration <= 0.0:
        return
    # storage cost of the planned session, never more than what sits
    # above the guard floor
    planned_drain = min(node.storage.energy - node.guard_floor_j,
                        (node.profile.etx + node.storage.leak_power) * duration)
    if not energy_guard(node, planned_drain):
        return
    if node.pending_n > 0:
        node.pending_n -= 1
    node.led_active = True
    node.session_remaining_s = duration
    node.session_cause = ("window" if duration
                          >= node.timing.t_energy_net - 1e-9 else "floor")
    _enter(node, NodeState.ENERGY_RELAY)
    result.events.append("etx start")
    _session_tick(node, dt, result)


def step_node(node: NodeRecord, dt: float, inputs: NodeInputs,
              rng: np.random.Generator) -> NodeStepResult:
    """Advance the node by one step: frames, state logic, energy.

    The kernel integrates storage separately (it owns the conservation
    audit); this function accumulates instantaneous costs on the record
    and performs every state transition.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    result = NodeStepResult()
    now = inputs.now
    if node.state is not NodeState.ENERGY_RELAY:
        # a closing step's fractional emission has been consumed by now
        node.led_fraction = 0.0

    entry_state = node.state
    for frame in inputs.frames:
        handle_frame(node, frame, result, now)
    if node.state is not entry_state:
        # decoding and switching consumed this step; the new state's
        # clock starts on the next one
        return result

    state = node.state
    if state is NodeState.DEPLETED:
        node.state_elapsed += dt
        return result

    if state is NodeState.INIT:
        if node.state_elapsed + dt >= ROLE_SAMPLE_COUNT * ROLE_SAMPLE_SPACING_S:
            samples = _role_samples(node, inputs.lux_per_face, rng)
            node.v_pv = min(samples)
            node.mode = select_role(samples)
            _enter(node, NodeState.STANDBY)
            result.events.append(f"role {node.mode.value}")
        else:
            node.state_elapsed += dt
        return result

    if state is NodeState.SENSING:
        # meter the sensing chain against its phase clock so the cycle
        # cost is exactly sense power times t_sense at any step size
        phase_before = min(node.state_elapsed, node.timing.t_sense)
        node.state_elapsed += dt
        phase_after = min(node.state_elapsed, node.timing.t_sense)
        node.instant_cost_j += ((node.profile.sense - node.profile.sleep)
                                * (phase_after - phase_before))
        if node.state_elapsed >= node.timing.t_sense:
            samples = _role_samples(node, inputs.lux_per_face, rng)
            node.v_pv = min(samples)
            tx_cost = node.profile.data_tx * node.frame_airtime_s()
            if energy_guard(node, tx_cost):
                node.instant_cost_j += tx_cost
                dest = node.reply_dest if node.reply_dest is not None \
                    else node.uplink_dest
                reading = node.sensor_base_c
                if node.sensor_noise_c > 0.0:
                    reading += float(rng.normal(0.0, node.sensor_noise_c))
                result.emitted.append(_build_report(node, dest, reading))
                result.events.append("report sent")
            else:
                result.events.append("report suppressed (guard)")
            node.reply_dest = None
            # end-of-cycle self-assessment
            new_mode = select_role(samples)
            if new_mode is not node.mode:
                node.mode = new_mode
                result.events.append(f"role {node.mode.value}")
            if node.mode is NodeMode.SSN:
                _schedule_next_report(node, now)
                _enter(node, NodeState.SLEEP)
            else:
                _enter(node, NodeState.STANDBY)
        return result

    if state is NodeState.ENERGY_RELAY:
        node.state_elapsed += dt
        drained_early = (node.storage.voltage <= node.storage.v_min + 1e-12
                         and node.session_remaining_s > 1e-9)
        if drained_early:
            # the light budget moved under us; cut the session short
            node.session_remaining_s = 0.0
            node.led_active = False
            node.led_fraction = 0.0
            _enter(node, NodeState.SLEEP)
            result.events.append("etx end (floor)")
        else:
            _session_tick(node, dt, result)
        return result

    if state is NodeState.DATA_RELAY:
        # one visible step, then back to listening
        _enter(node, NodeState.STANDBY)
        return result

    if state is NodeState.SLEEP:
        node.state_elapsed += dt
        if (node.mode is NodeMode.SSN and node.sensing_enabled
                and now + dt >= node.next_report_s - 1e-9):
            cost = node.sense_cycle_cost_j()
            if energy_guard(node, cost):
                node.reply_dest = None
                _enter(node, NodeState.SENSING)
                result.events.append("timer wake")
            else:
                node.next_report_s += node.timing.t_int
                result.events.append("sense skipped (guard)")
        elif node.mode is NodeMode.PSN:
            if node.storage.voltage >= node.storage.v_max - 1e-9:
                _enter(node, NodeState.STANDBY)
                result.events.append("recovered")
        return result

    if state is NodeState.STANDBY or state is NodeState.DECODING:
        node.state_elapsed += dt
        _maybe_start_etx(node, inputs, dt, result)
        if node.state is NodeState.STANDBY:
            idle_ssn = (node.mode is NodeMode.SSN
                        and node.state_elapsed >= STANDBY_IDLE_TIMEOUT_S)
            if idle_ssn:
                _schedule_next_report(node, now)
                _enter(node, NodeState.SLEEP)
                result.events.append("standby idle")
        return result

    return result


def apply_hysteresis(node: NodeRecord, result: NodeStepResult) -> None:
    """Depletion lockout, applied by the kernel after integration."""
    v = node.storage.voltage
    if node.state is NodeState.DEPLETED:
        if v >= node.storage.v_chrdy:
            node.pending_n = 0
            node.led_active = False
            _enter(node, NodeState.INIT)
            result.events.append("recovered from depletion")
    elif v < node.storage.v_ovdis:
        node.led_active = False
        node.led_fraction = 0.0
        node.session_remaining_s = 0.0
        node.pending_n = 0
        node.reply_dest = None
        _enter(node, NodeState.DEPLETED)
        result.events.append("depleted")
