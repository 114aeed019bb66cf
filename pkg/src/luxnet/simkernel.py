"""Deterministic scenario engine.

Control traffic is event-driven over a fixed integration grid: frames
land on the first grid tick after their airtime, nodes advance in
ascending id order, and storage is integrated once per tick from the
state draw plus any metered instantaneous costs.  Identical scenarios
with identical seeds reproduce byte-identical traces.

Burst light superposes onto the static ambient field through a gain
matrix precomputed from the scenario geometry, scaled per step by each
emitter's on-air fraction, so the radiated and harvested energies agree
exactly with the session accounting inside the nodes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .channel import (
    InterferenceModel,
    OpticalReceiver,
    OpticalTransmitter,
    frame_failure_probability,
    illuminance_at,
)
from .controller import Controller, ControllerConfig
from .energy import (
    DEFAULT_PROFILE,
    PV_CELL_AREA_M2,
    HarvesterArray,
    HarvesterCell,
    PowerProfile,
    StorageCapacitor,
    storage_step,
)
from .errors import InfeasibleError, ScenarioError
from .node import (
    NodeInputs,
    NodeRecord,
    NodeState,
    NodeStepResult,
    apply_hysteresis,
    state_draw_w,
    step_node,
)
from .protocol import (
    BROADCAST_ADDRESS,
    OAP_ADDRESS,
    Frame44,
    airtime_s,
)

Vec3 = Tuple[float, float, float]

ETX_POLICIES = ("disabled", "oap", "autonomous")

# handle_frame outcomes that mean the radio itself never took the frame;
# everything else it reports is an application-level refusal and still
# counts as a delivery
_RADIO_FAILURES = ("depleted receiver", "receiver not listening")


@dataclass(frozen=True)
class FaceSpec:
    """One harvesting face: outward normal and its static ambient light."""

    normal: Vec3
    ambient_lux: float


@dataclass(frozen=True)
class NodeSpec:
    """Scenario-level initializer for one node."""

    node_id: int
    position: Vec3
    faces: Tuple[FaceSpec, ...]
    start_voltage: float = 4.5
    v_min: float = 3.3
    led_power_w: float = 0.0
    led_half_angle_deg: float = 15.0
    led_aim: Optional[Vec3] = None
    sensing_enabled: bool = True
    sensor_base_c: float = 25.0


@dataclass(frozen=True)
class OapSpec:
    """Access point: controller settings plus its mounting position."""

    config: ControllerConfig = field(default_factory=ControllerConfig)
    position: Vec3 = (0.0, 0.0866, 0.4)


@dataclass(frozen=True)
class Scenario:
    name: str
    duration_s: float
    nodes: Tuple[NodeSpec, ...]
    oap: OapSpec = field(default_factory=OapSpec)
    step_s: float = 0.1
    seed: int = 0
    trace_interval_s: float = 10.0
    etx_policy: str = "disabled"
    interference: Optional[InterferenceModel] = None
    profile: PowerProfile = DEFAULT_PROFILE


@dataclass(frozen=True)
class Event:
    """One scheduled occurrence, totally ordered by (tick, sequence)."""

    tick: int
    sequence: int
    kind: str
    target: str
    frame: Frame44


@dataclass
class TraceRow:
    time_s: float
    node_id: int
    v_cap: float
    v_pv: float
    mode: str
    state: str
    lux: float
    event: str = ""


@dataclass
class FrameLogEntry:
    time_s: float
    outcome: str          # sent | delivered | failed
    origin: str
    dest: int
    cause: str = ""


@dataclass
class NodeAggregate:
    """Exact per-node tallies accumulated every tick."""

    node_id: int
    lux_integral: float = 0.0
    lux_min: float = float("inf")
    lux_max: float = 0.0
    time_by_state: Dict[str, float] = field(default_factory=dict)
    depleted_at: Optional[float] = None
    harvested_j: float = 0.0
    consumed_j: float = 0.0
    leaked_j: float = 0.0
    clamp_loss_j: float = 0.0
    start_energy_j: float = 0.0
    final_energy_j: float = 0.0
    final_voltage: float = 0.0


@dataclass
class TraceSet:
    scenario_name: str
    duration_s: float
    step_s: float
    seed: int
    rows: List[TraceRow]
    frame_log: List[FrameLogEntry]
    controller_log: List[str]
    aggregates: Dict[int, NodeAggregate]
    frames_sent: int
    deliveries_intended: int
    deliveries_made: int
    # cumulative harvested joules checkpointed at the trace instants,
    # for recharge-time questions that need a crossing, not a total
    harvest_samples: Dict[int, List[Tuple[float, float]]] = field(
        default_factory=dict)


def _as_vec(value, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{what} must be a finite 3-vector")
    return arr


def validate_scenario(scenario: Scenario) -> None:
    """Reject malformed scenarios before any work starts."""
    if scenario.duration_s <= 0.0:
        raise ScenarioError("duration_s must be positive")
    if scenario.step_s <= 0.0:
        raise ScenarioError("step_s must be positive")
    if scenario.duration_s < scenario.step_s - 1e-12:
        raise ScenarioError("duration_s must cover at least one step")
    if scenario.trace_interval_s < scenario.step_s - 1e-12:
        raise ScenarioError("trace_interval_s must be at least step_s")
    if scenario.etx_policy not in ETX_POLICIES:
        raise ScenarioError(
            f"etx_policy must be one of {ETX_POLICIES}, "
            f"got {scenario.etx_policy!r}")
    if not scenario.nodes:
        raise ScenarioError("at least one node is required")
    seen = set()
    for spec in scenario.nodes:
        label = f"node.{spec.node_id}"
        if not 1 <= spec.node_id <= 15:
            raise ScenarioError(f"{label}: node ids must be 1..15")
        if spec.node_id in seen:
            raise ScenarioError(f"{label}: duplicate node id")
        seen.add(spec.node_id)
        if len(spec.faces) != 3:
            raise ScenarioError(f"{label}: exactly three faces are required")
        for face in spec.faces:
            normal = _as_vec(face.normal, f"{label} face normal")
            if float(np.linalg.norm(normal)) <= 0.0:
                raise ScenarioError(f"{label}: face normal must be nonzero")
            if face.ambient_lux < 0.0:
                raise ScenarioError(f"{label}: ambient_lux must be >= 0")
        _as_vec(spec.position, f"{label} position")
        if not 0.0 < spec.start_voltage <= 4.5 + 1e-9:
            raise ScenarioError(f"{label}: start_voltage_v must be in (0, 4.5]")
        if spec.led_power_w < 0.0:
            raise ScenarioError(f"{label}: led_power_mw must be >= 0")
        if spec.led_power_w > 0.0:
            if spec.led_aim is None:
                raise ScenarioError(
                    f"{label}: led_aim is required when an emitter is fitted")
            aim = _as_vec(spec.led_aim, f"{label} led_aim")
            if float(np.linalg.norm(aim)) <= 0.0:
                raise ScenarioError(f"{label}: led_aim must be nonzero")
            if not 0.0 < spec.led_half_angle_deg < 90.0:
                raise ScenarioError(
                    f"{label}: led_half_angle_deg must be in (0, 90)")
    if scenario.oap.config.t_int > 65535:
        raise ScenarioError("oap t_int_s exceeds the 16-bit config field")
    _as_vec(scenario.oap.position, "oap position")


def _build_node(spec: NodeSpec, profile: PowerProfile) -> NodeRecord:
    cells = []
    for face in spec.faces:
        receiver = OpticalReceiver(
            area_m2=PV_CELL_AREA_M2,
            position=tuple(float(x) for x in spec.position),
            normal=tuple(float(x) for x in face.normal),
        )
        cells.append(HarvesterCell(receiver=receiver))
    led = None
    if spec.led_power_w > 0.0:
        led = OpticalTransmitter(
            optical_power_w=spec.led_power_w,
            half_angle_deg=spec.led_half_angle_deg,
            position=tuple(float(x) for x in spec.position),
            boresight=tuple(float(x) for x in spec.led_aim),
        )
    try:
        storage = StorageCapacitor(voltage=spec.start_voltage,
                                   v_min=spec.v_min)
    except ValueError as exc:
        raise ScenarioError(f"node.{spec.node_id}: {exc}") from exc
    return NodeRecord(
        node_id=spec.node_id,
        storage=storage,
        harvesters=HarvesterArray(cells=tuple(cells)),
        profile=profile,
        led=led,
        sensing_enabled=spec.sensing_enabled,
        sensor_base_c=spec.sensor_base_c,
    )


class _Runtime:
    """Mutable per-run machinery, internal to run_scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.dt = scenario.step_s
        self.n_steps = max(1, int(round(scenario.duration_s / scenario.step_s)))
        self.records: Dict[int, NodeRecord] = {}
        self.specs: Dict[int, NodeSpec] = {}
        for spec in sorted(scenario.nodes, key=lambda s: s.node_id):
            self.records[spec.node_id] = _build_node(spec, scenario.profile)
            self.specs[spec.node_id] = spec
        self.node_ids = sorted(self.records)

        if scenario.etx_policy in ("oap", "autonomous"):
            if not any(r.led is not None for r in self.records.values()):
                raise InfeasibleError(
                    "energy sharing requested but no node has an emitter")
        if scenario.etx_policy == "autonomous":
            for record in self.records.values():
                if record.led is not None:
                    record.etx_autonomous = True

        self.controller = Controller(
            config=scenario.oap.config,
            node_ids=list(self.node_ids),
            etx_enabled=(scenario.etx_policy == "oap"),
        )

        self.rng = {nid: np.random.default_rng((scenario.seed, nid))
                    for nid in self.node_ids}
        self.ambient = {
            nid: np.array([f.ambient_lux for f in self.specs[nid].faces])
            for nid in self.node_ids}

        # emitter-to-face illuminance at full drive; scaled by the
        # on-air fraction at use.  A node never lights itself.
        self.gain: Dict[int, Dict[int, np.ndarray]] = {}
        for src in self.node_ids:
            led = self.records[src].led
            if led is None:
                continue
            per_dst = {}
            for dst in self.node_ids:
                if dst == src:
                    continue
                try:
                    face_lux = [illuminance_at(cell.receiver, 0.0, [led])
                                for cell in self.records[dst].harvesters.cells]
                except ValueError as exc:
                    raise ScenarioError(
                        f"node.{src} to node.{dst} link: {exc}") from exc
                per_dst[dst] = np.array(face_lux)
            self.gain[src] = per_dst

        self.lux: Dict[int, Tuple[float, ...]] = {}
        self._lux_signature: Optional[Tuple] = None
        self._refresh_lux(())

        self.heap: List[Tuple[int, int, Event]] = []
        self.seq = 0
        self.airtime_ticks = max(
            1, int(math.ceil(airtime_s() / self.dt - 1e-9)))

        self.rows: List[TraceRow] = []
        self.frame_log: List[FrameLogEntry] = []
        self.agg: Dict[int, NodeAggregate] = {}
        for nid in self.node_ids:
            agg = NodeAggregate(node_id=nid)
            agg.start_energy_j = self.records[nid].storage.energy
            self.agg[nid] = agg
        self.frames_sent = 0
        self.deliveries_intended = 0
        self.deliveries_made = 0
        self.sample_every = max(
            1, int(round(scenario.trace_interval_s / self.dt)))
        self.harvest_samples: Dict[int, List[Tuple[float, float]]] = {
            nid: [] for nid in self.node_ids}

    # -- light field -----------------------------------------------------

    def _emitter_signature(self) -> Tuple:
        sig = []
        for nid in self.node_ids:
            record = self.records[nid]
            if record.led is not None and record.led_fraction > 0.0:
                sig.append((nid, record.led_fraction))
        return tuple(sig)

    def _refresh_lux(self, signature: Tuple) -> None:
        if signature == self._lux_signature:
            return
        self._lux_signature = signature
        for nid in self.node_ids:
            total = self.ambient[nid]
            extra = None
            for src, fraction in signature:
                contribution = self.gain.get(src, {}).get(nid)
                if contribution is not None:
                    extra = (contribution * fraction if extra is None
                             else extra + contribution * fraction)
            if extra is not None:
                total = total + extra
            self.lux[nid] = tuple(float(x) for x in total)

    # -- frame plumbing ----------------------------------------------------

    def send(self, frame: Frame44, origin: str, now_tick: int) -> None:
        due = now_tick + self.airtime_ticks
        target = "oap" if frame.dest_address == OAP_ADDRESS else "nodes"
        event = Event(tick=due, sequence=self.seq, kind="frame",
                      target=target, frame=frame)
        heapq.heappush(self.heap, (due, self.seq, event))
        self.seq += 1
        self.frames_sent += 1
        self.frame_log.append(FrameLogEntry(
            time_s=now_tick * self.dt, outcome="sent", origin=origin,
            dest=frame.dest_address))

    def _interference_lost(self, nid: int) -> bool:
        model = self.scenario.interference
        if model is None or not self._lux_signature:
            return False
        ambient = float(np.max(self.ambient[nid]))
        p = frame_failure_probability(ambient, True, model)
        if p <= 0.0:
            return False
        return bool(self.rng[nid].random() < p)

    def deliver_due(self, tick: int) -> Dict[int, List[Frame44]]:
        """Pop due frames; route to the access point and node inboxes."""
        inbox: Dict[int, List[Frame44]] = {nid: [] for nid in self.node_ids}
        now = tick * self.dt
        while self.heap and self.heap[0][0] <= tick:
            _, _, event = heapq.heappop(self.heap)
            frame = event.frame
            if event.target == "oap":
                self.deliveries_intended += 1
                self.deliveries_made += 1
                self.controller.on_uplink(frame, now)
                self.frame_log.append(FrameLogEntry(
                    time_s=now, outcome="delivered", origin="network",
                    dest=frame.dest_address))
                continue
            # an optical downlink floods every node in the cell; the
            # address field sorts out who acts on it
            if frame.dest_address == BROADCAST_ADDRESS:
                intended = set(self.node_ids)
            else:
                intended = {frame.dest_address} & set(self.node_ids)
            self.deliveries_intended += len(intended)
            for nid in self.node_ids:
                if self._interference_lost(nid):
                    if nid in intended:
                        self.frame_log.append(FrameLogEntry(
                            time_s=now, outcome="failed", origin="network",
                            dest=nid, cause="interference"))
                    continue
                inbox[nid].append(frame)
        return inbox

    def account_deliveries(self, nid: int, delivered: List[Frame44],
                           result: NodeStepResult, now: float) -> None:
        """Log per-node outcomes for frames addressed to this node."""
        failed = {}
        for frame, cause in result.dropped:
            if frame.dest_address in (nid, BROADCAST_ADDRESS):
                failed[id(frame)] = cause
        for frame in delivered:
            if frame.dest_address not in (nid, BROADCAST_ADDRESS):
                continue
            cause = failed.get(id(frame), "")
            if cause in _RADIO_FAILURES:
                self.frame_log.append(FrameLogEntry(
                    time_s=now, outcome="failed", origin="network",
                    dest=nid, cause=cause))
            else:
                self.deliveries_made += 1
                self.frame_log.append(FrameLogEntry(
                    time_s=now, outcome="delivered", origin="network",
                    dest=nid, cause=cause))

    # -- trace -------------------------------------------------------------

    def sample_rows(self, time_s: float) -> None:
        for nid in self.node_ids:
            record = self.records[nid]
            self.rows.append(TraceRow(
                time_s=time_s, node_id=nid,
                v_cap=record.storage.voltage, v_pv=record.v_pv,
                mode=record.mode.value, state=record.state.value,
                lux=self.lux[nid][0]))
            self.harvest_samples[nid].append(
                (time_s, self.agg[nid].harvested_j))

    def event_rows(self, nid: int, time_s: float, events: List[str]) -> None:
        record = self.records[nid]
        for text in events:
            self.rows.append(TraceRow(
                time_s=time_s, node_id=nid,
                v_cap=record.storage.voltage, v_pv=record.v_pv,
                mode=record.mode.value, state=record.state.value,
                lux=self.lux[nid][0], event=text))


def run_scenario(scenario: Scenario) -> TraceSet:
    """Execute one scenario to completion and return its trace."""
    validate_scenario(scenario)
    rt = _Runtime(scenario)
    dt = rt.dt

    rt.sample_rows(0.0)

    for i in range(rt.n_steps):
        now = i * dt
        inbox = rt.deliver_due(i)

        for frame in rt.controller.step(now):
            rt.send(frame, "oap", i)

        results: Dict[int, NodeStepResult] = {}
        for nid in rt.node_ids:
            record = rt.records[nid]
            result = step_node(record, dt, NodeInputs(
                now=now, lux_per_face=rt.lux[nid], frames=inbox[nid]),
                rt.rng[nid])
            for frame in result.emitted:
                rt.send(frame, f"node {nid}", i)
            if inbox[nid]:
                rt.account_deliveries(nid, inbox[nid], result, now)
            results[nid] = result

        # the on-air set for this step reflects the transitions just taken
        rt._refresh_lux(rt._emitter_signature())

        for nid in rt.node_ids:
            record = rt.records[nid]
            agg = rt.agg[nid]
            lux_faces = rt.lux[nid]
            harvest = record.harvesters.harvest_power(lux_faces)
            p_out = state_draw_w(record) + record.instant_cost_j / dt
            storage = record.storage
            proposed = storage.energy + (harvest - p_out
                                         - storage.leak_power) * dt
            record.storage = storage_step(storage, harvest, p_out, dt)
            record.instant_cost_j = 0.0
            agg.clamp_loss_j += proposed - record.storage.energy
            agg.harvested_j += harvest * dt
            agg.consumed_j += p_out * dt
            agg.leaked_j += storage.leak_power * dt
            state_name = record.state.value
            agg.time_by_state[state_name] = (
                agg.time_by_state.get(state_name, 0.0) + dt)
            face_a = lux_faces[0]
            agg.lux_integral += face_a * dt
            if face_a < agg.lux_min:
                agg.lux_min = face_a
            if face_a > agg.lux_max:
                agg.lux_max = face_a

            result = results[nid]
            was_depleted = record.state is NodeState.DEPLETED
            apply_hysteresis(record, result)
            if (record.state is NodeState.DEPLETED and not was_depleted
                    and agg.depleted_at is None):
                agg.depleted_at = now
            if result.events:
                rt.event_rows(nid, now, result.events)

        if (i + 1) % rt.sample_every == 0 or (i + 1) == rt.n_steps:
            rt.sample_rows((i + 1) * dt)

    for nid in rt.node_ids:
        record = rt.records[nid]
        agg = rt.agg[nid]
        agg.final_energy_j = record.storage.energy
        agg.final_voltage = record.storage.voltage

    return TraceSet(
        scenario_name=scenario.name,
        duration_s=rt.n_steps * dt,
        step_s=dt,
        seed=scenario.seed,
        rows=rt.rows,
        frame_log=rt.frame_log,
        controller_log=list(rt.controller.events),
        aggregates=rt.agg,
        frames_sent=rt.frames_sent,
        deliveries_intended=rt.deliveries_intended,
        deliveries_made=rt.deliveries_made,
        harvest_samples=rt.harvest_samples,
    )


def audit_conservation(trace: TraceSet) -> Dict[int, float]:
    """Relative bookkeeping residual per node.

    Harvest in, consumption and leakage out, clamp losses aside: what
    remains must equal the stored-energy change.  The residual is
    normalized by the total energy moved.
    """
    residuals = {}
    for nid, agg in trace.aggregates.items():
        delta = agg.final_energy_j - agg.start_energy_j
        balance = (agg.harvested_j - agg.consumed_j - agg.leaked_j
                   - agg.clamp_loss_j)
        moved = max(agg.harvested_j + agg.consumed_j + agg.leaked_j
                    + abs(agg.clamp_loss_j), 1e-12)
        residuals[nid] = abs(balance - delta) / moved
    return residuals


@dataclass
class NodeSummary:
    node_id: int
    lifetime_s: float
    lux_mean: float
    lux_min: float
    lux_max: float
    idle_fraction: float
    steady_mean_v: float
    steady_band_v: float
    final_v: float


@dataclass
class Summary:
    scenario_name: str
    duration_s: float
    nodes: Dict[int, NodeSummary]
    frames_sent: int
    deliveries_intended: int
    deliveries_made: int
    delivery_ratio: float


def summarize(trace: TraceSet) -> Summary:
    """Reduce a trace to the headline per-node figures.

    Illuminance statistics come from the exact per-step aggregates, not
    the sampled rows: short bursts land between trace samples, and their
    time-weighted contribution is what uplift questions need.  The
    steady-voltage band is measured over the sampled rows in the final
    quarter of the run.
    """
    if not trace.rows:
        raise ValueError("empty trace")
    nodes = {}
    steady_start = 0.75 * trace.duration_s
    for nid, agg in trace.aggregates.items():
        duration = trace.duration_s
        lifetime = agg.depleted_at if agg.depleted_at is not None else duration
        idle = (agg.time_by_state.get(NodeState.SLEEP.value, 0.0)
                + agg.time_by_state.get(NodeState.STANDBY.value, 0.0))
        steady = [row.v_cap for row in trace.rows
                  if row.node_id == nid and row.event == ""
                  and row.time_s >= steady_start]
        if steady:
            mean_v = sum(steady) / len(steady)
            band = max(abs(v - mean_v) for v in steady)
        else:
            mean_v = agg.final_voltage
            band = 0.0
        nodes[nid] = NodeSummary(
            node_id=nid,
            lifetime_s=lifetime,
            lux_mean=agg.lux_integral / duration,
            lux_min=agg.lux_min,
            lux_max=agg.lux_max,
            idle_fraction=idle / duration,
            steady_mean_v=mean_v,
            steady_band_v=band,
            final_v=agg.final_voltage,
        )
    ratio = (trace.deliveries_made / trace.deliveries_intended
             if trace.deliveries_intended else 1.0)
    return Summary(
        scenario_name=trace.scenario_name,
        duration_s=trace.duration_s,
        nodes=nodes,
        frames_sent=trace.frames_sent,
        deliveries_intended=trace.deliveries_intended,
        deliveries_made=trace.deliveries_made,
        delivery_ratio=ratio,
    )


CSV_HEADER = "time_s,node_id,v_cap,v_pv,mode,state,lux,event"


def format_trace_csv(trace: TraceSet) -> str:
    """Render the trace rows as CSV (LF endings, fixed precision)."""
    lines = [CSV_HEADER]
    for row in trace.rows:
        lines.append(
            f"{row.time_s:.2f},{row.node_id},{row.v_cap:.6f},"
            f"{row.v_pv:.6f},{row.mode},{row.state},{row.lux:.3f},"
            f"{row.event}")
    return "\n".join(lines) + "\n"


def render_summary(summary: Summary) -> str:
    """Human-readable summary block, stable across runs."""
    lines = [
        f"scenario: {summary.scenario_name}",
        f"duration_s: {summary.duration_s:.1f}",
        f"frames_sent: {summary.frames_sent}",
        f"delivery_ratio: {summary.delivery_ratio:.4f}",
    ]
    for nid in sorted(summary.nodes):
        s = summary.nodes[nid]
        lines.append(
            f"node {nid}: lifetime_s={s.lifetime_s:.1f}"
            f" lux_mean={s.lux_mean:.3f} lux_min={s.lux_min:.3f}"
            f" lux_max={s.lux_max:.3f} idle={s.idle_fraction:.4f}"
            f" steady_v={s.steady_mean_v:.6f} band_v={s.steady_band_v:.6f}"
            f" final_v={s.final_v:.6f}")
    return "\n".join(lines) + "\n"
