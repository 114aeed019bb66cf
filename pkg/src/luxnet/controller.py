"""Access-point scheduling: registry, polling rounds, and sharing budgets.

The access point keeps a registry of every node it has heard from,
polls the well-lit ones for data on a fixed request period, and asks
them to light their sharing emitters in between.  The arithmetic that
ties the request period to the nodes' standby budgets lives here too,
as plain functions usable without a running network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .energy import illuminance_for_open_voltage
from .node import DEFAULT_TIMING, NodeMode, TimingParams
from .protocol import (
    BROADCAST_ADDRESS,
    Command,
    Frame44,
    NodeToOap,
    OapToNode,
    temperature_from_code,
    voltage_from_code,
)

REFERENCE_ILLUMINANCE_LUX = 1000.0


@dataclass(frozen=True)
class DutyCycle:
    """Fraction of the reporting interval a node spends powered down."""

    ratio: float
    feasible: bool


def duty_cycle(timing: TimingParams, n: int) -> DutyCycle:
    """Sleep fraction left after data traffic and n sharing sessions.

    The receive window, the sensing phase and each sharing session
    (recovery plus emission) all eat into the reporting interval; what
    remains, as a fraction, is the duty ratio.  A schedule that does
    not fit returns zero flagged infeasible rather than going negative.
    """
    if n < 0:
        raise ValueError("session count must be non-negative")
    data_share = (timing.t_data_net_rec + timing.t_sense) / timing.t_int
    share_share = n * (timing.t_energy_net_rec + timing.t_energy_net) / timing.t_int
    ratio = 1.0 - data_share - share_share
    if ratio < 0.0:
        return DutyCycle(ratio=0.0, feasible=False)
    return DutyCycle(ratio=min(ratio, 1.0), feasible=True)


def standby_time(timing: TimingParams, n: int) -> float:
    """Seconds of standby per interval once n sharing sessions are booked."""
    duty = duty_cycle(timing, n)
    if not duty.feasible:
        raise ValueError(f"no standby budget left with n={n}")
    return duty.ratio * timing.t_int - timing.t_sense


def reconstructed_data_window(timing: TimingParams, n: int) -> float:
    """Length of the data phase implied by the duty ratio.

    The duty formula books the sensing phase inside the receive
    window, so adding one sensing time back recovers the data-phase
    length; the full interval identity then closes exactly:
    window + receive + n * (recovery + emission) = interval.
    """
    return duty_cycle(timing, n).ratio * timing.t_int + timing.t_sense


def select_t_data_req(timings: Sequence[TimingParams],
                      preferred: Optional[float] = None) -> float:
    """Pick a request period every sharing node can keep up with.

    The period must exceed every node's recovery time (so a drained
    emitter can refill between rounds) while fitting inside every
    node's standby budget.  A preferred value is validated against the
    same bounds; otherwise the midpoint, rounded down to a whole
    second, is returned.
    """
    if not timings:
        raise ValueError("at least one node timing is required")
    lower = max(t.t_energy_net_rec for t in timings)
    upper = min(t.t_standby for t in timings)
    if lower >= upper:
        raise ValueError(
            f"request period infeasible: recovery bound {lower:.2f} s is not "
            f"below the standby bound {upper:.2f} s")
    if preferred is not None:
        if not lower < preferred <= upper:
            raise ValueError(
                f"preferred period {preferred:.2f} s violates "
                f"({lower:.2f}, {upper:.2f}]")
        return float(preferred)
    return float(math.floor((lower + upper) / 2.0))


@dataclass
class RegistryEntry:
    """Last known telemetry for one node, as decoded from its reports."""

    node_id: int
    last_pv: float = 0.0
    last_cap_voltage: float = 0.0
    last_sensor: float = 0.0
    role: NodeMode = NodeMode.SSN
    assigned_n: int = 0
    last_seen: float = float("-inf")


@dataclass(frozen=True)
class ControllerConfig:
    t_data_req: float = 600.0
    t_int: float = 3600.0
    n_min: int = 1
    timing: TimingParams = DEFAULT_TIMING
    psn_pv_threshold: float = 3.0
    slot_spacing_s: float = 10.0
    etx_offset_s: float = 30.0
    etx_spacing_s: float = 60.0
    etx_bursts_per_request: int = 1
    stale_after_rounds: float = 3.0

    def __post_init__(self):
        if self.t_data_req <= 0.0 or self.t_int <= 0.0:
            raise ValueError("periods must be positive")
        if self.n_min < 0:
            raise ValueError("n_min must be non-negative")
        if not (self.timing.t_energy_net_rec < self.t_data_req
                <= self.timing.t_standby):
            raise ValueError(
                f"t_data_req {self.t_data_req:.2f} s outside "
                f"({self.timing.t_energy_net_rec:.2f}, "
                f"{self.timing.t_standby:.2f}]")
        if self.slot_spacing_s <= 0.0 or self.etx_spacing_s <= 0.0:
            raise ValueError("slot spacings must be positive")


def assign_n(entry: RegistryEntry, config: ControllerConfig,
             observed_illuminance: float) -> int:
    """Sharing sessions per interval for one node.

    Brighter nodes recover faster, so their recovery time shrinks in
    proportion to the light above the reference level and they can
    afford more sessions.  The count is the largest one that leaves a
    standby budget of at least one request period, floored at the
    configured minimum.  Nodes without surplus light get zero.
    """
    if entry.role is not NodeMode.PSN:
        return 0
    timing = config.timing
    recovery = timing.t_energy_net_rec
    if observed_illuminance > REFERENCE_ILLUMINANCE_LUX:
        recovery = recovery * REFERENCE_ILLUMINANCE_LUX / observed_illuminance
    budget = (timing.t_int - timing.t_data_net_rec - 2.0 * timing.t_sense
              - config.t_data_req)
    per_session = recovery + timing.t_energy_net
    n = int(budget / per_session) if budget > 0.0 else 0
    return max(n, config.n_min)


@dataclass
class RoutePlan:
    """Roles plus the relay set serving each dim node."""

    roles: Dict[int, NodeMode]
    relays: Dict[int, Tuple[int, ...]]
    relay_shortage: bool


def classify_and_route(registry: Dict[int, RegistryEntry],
                       config: ControllerConfig) -> RoutePlan:
    """Split nodes into bright and dim and point every dim node at
    the full bright set.

    With a handful of nodes under one access point every well-lit node
    serves every dim one; the shortage flag reports the degenerate
    case of dim nodes with nobody to feed them.
    """
    roles: Dict[int, NodeMode] = {}
    for node_id in sorted(registry):
        entry = registry[node_id]
        if entry.last_pv > config.psn_pv_threshold:
            roles[node_id] = NodeMode.PSN
        else:
            roles[node_id] = NodeMode.SSN
    psns = tuple(i for i in sorted(roles) if roles[i] is NodeMode.PSN)
    ssns = [i for i in sorted(roles) if roles[i] is NodeMode.SSN]
    relays = {ssn: psns for ssn in ssns} if psns else {}
    shortage = bool(ssns) and not psns
    return RoutePlan(roles=roles, relays=relays, relay_shortage=shortage)


@dataclass
class Controller:
    """The access point's scheduling core.

    Drives the request timeline: one configuration broadcast at start,
    a staggered first poll of every known node, then data rounds on
    the request period with sharing requests in between.  Uplink
    reports keep the registry current and trigger session-count
    updates when a node's light budget moves.
    """

    config: ControllerConfig
    node_ids: Sequence[int]
    etx_enabled: bool = True
    registry: Dict[int, RegistryEntry] = field(default_factory=dict)
    events: List[str] = field(default_factory=list)
    _pending: List[Tuple[float, int, Frame44]] = field(default_factory=list)
    _seq: int = 0
    _started: bool = False
    _next_round: float = 0.0

    def __post_init__(self):
        self.node_ids = sorted(set(self.node_ids))
        if not self.node_ids:
            raise ValueError("controller needs at least one node id")
        self._next_round = self.config.t_data_req

    def _queue(self, due: float, frame: Frame44) -> None:
        self._pending.append((due, self._seq, frame))
        self._seq += 1

    def _fresh_psns(self, now: float) -> List[int]:
        limit = self.config.stale_after_rounds * self.config.t_data_req
        out = []
        for node_id in self.node_ids:
            entry = self.registry.get(node_id)
            if entry is None or entry.role is not NodeMode.PSN:
                continue
            if now - entry.last_seen <= limit:
                out.append(node_id)
        return out

    def _start(self, now: float) -> None:
        self._started = True
        self._queue(now, Frame44(
            dest_address=BROADCAST_ADDRESS,
            payload=OapToNode(command=Command.INIT_CONFIG,
                              param=int(self.config.t_int))))
        for rank, node_id in enumerate(self.node_ids):
            due = now + 1.0 + rank * self.config.slot_spacing_s
            self._queue(due, Frame44(
                dest_address=node_id,
                payload=OapToNode(command=Command.DATA_REQUEST, param=0)))
        self.events.append(f"{now:.1f}s start: config broadcast and "
                           f"{len(self.node_ids)} initial polls")

    def _schedule_round(self, boundary: float) -> None:
        psns = self._fresh_psns(boundary)
        for rank, node_id in enumerate(psns):
            due = boundary + rank * self.config.slot_spacing_s
            self._queue(due, Frame44(
                dest_address=node_id,
                payload=OapToNode(command=Command.DATA_REQUEST, param=0)))
        if self.etx_enabled:
            for rank, node_id in enumerate(psns):
                due = (boundary + self.config.etx_offset_s
                       + rank * self.config.etx_spacing_s)
                self._queue(due, Frame44(
                    dest_address=node_id,
                    payload=OapToNode(
                        command=Command.ETX_REQUEST,
                        param=self.config.etx_bursts_per_request)))
        if psns:
            self.events.append(
                f"{boundary:.1f}s round: polling {psns}"
                + (" with sharing requests" if self.etx_enabled else ""))

    def step(self, now: float) -> List[Frame44]:
        """Frames the access point puts on the air at this instant."""
        if not self._started:
            self._start(now)
        while now >= self._next_round - 1e-9:
            self._schedule_round(self._next_round)
            self._next_round += self.config.t_data_req
        if not self._pending:
            return []
        due_now = [item for item in self._pending if item[0] <= now + 1e-9]
        if not due_now:
            return []
        self._pending = [item for item in self._pending if item[0] > now + 1e-9]
        due_now.sort()
        return [frame for _, _, frame in due_now]

    def on_uplink(self, frame: Frame44, now: float) -> None:
        """Fold one node report into the registry."""
        payload = frame.payload
        if not isinstance(payload, NodeToOap):
            return
        node_id = payload.sender_id
        entry = self.registry.setdefault(node_id, RegistryEntry(node_id=node_id))
        entry.last_pv = voltage_from_code(payload.pv_level)
        entry.last_cap_voltage = voltage_from_code(payload.cap_level)
        entry.last_sensor = temperature_from_code(payload.sensor)
        entry.last_seen = now
        role = (NodeMode.PSN if entry.last_pv > self.config.psn_pv_threshold
                else NodeMode.SSN)
        if role is not entry.role:
            entry.role = role
            self.events.append(f"{now:.1f}s node {node_id} is {role.value}")
        if role is NodeMode.PSN:
            lux = illuminance_for_open_voltage(entry.last_pv)
            n = assign_n(entry, self.config, lux)
            if n != entry.assigned_n:
                entry.assigned_n = n
                self._queue(now + 0.5, Frame44(
                    dest_address=node_id,
                    payload=OapToNode(command=Command.SET_N, param=n)))
                self.events.append(f"{now:.1f}s node {node_id} gets n={n}")
        else:
            entry.assigned_n = 0

    def route_plan(self) -> RoutePlan:
        return classify_and_route(self.registry, self.config)
