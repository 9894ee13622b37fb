"""Deterministic discrete-event engine binding radio, protocol and clocks.

One run is one thread of execution over an event queue ordered by
(true time, insertion sequence); the sequence number breaks simultaneous
events deterministically. True time is integer picoseconds throughout.
Randomness comes from one root seed split into independent per-(node,
purpose) streams with counter-based derivation, so adding probes or
toggling compensation never perturbs the protocol draws.

Each synchronization period runs: flood, reserved measurement window with
s TDMA slots, compensation ramp updates, and a metrics probe just before
the period ends.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import flooding, metrics, protocol, radio
from .bargraph import DecodeResult
from .clocks import CompensationFilter, HardwareClock, VirtualClock, sync_error_s
from .flooding import FloodReception
from .metrics import MatrixRow, MetricsRow
from .protocol import MeasurementResult, MeasurementStatus
from .radio import FrameKind, NodePosition, ReceptionKind, Topology, TransmissionEvent
from .scenario import Scenario
from .units import PS_PER_SECOND, seconds

STREAM_RX = 1
STREAM_RESIDUAL = 2
STREAM_MATRIX = 3

PROBE_MARGIN_PS = 1_000  # probe 1 ns before the period boundary


class CausalityError(RuntimeError):
    pass


class EventQueue:
    """Priority queue over (true_time_ps, sequence); FIFO at equal times."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, tuple]] = []
        self._seq = itertools.count()
        self.current_time_ps = 0

    def push(self, time_ps: int, event: tuple) -> None:
        if time_ps < self.current_time_ps:
            raise CausalityError(
                f"event {event} scheduled at {time_ps} ps, before current "
                f"time {self.current_time_ps} ps"
            )
        heapq.heappush(self._heap, (time_ps, next(self._seq), event))

    def pop(self) -> tuple[int, tuple]:
        time_ps, _, event = heapq.heappop(self._heap)
        self.current_time_ps = time_ps
        return time_ps, event

    def peek_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)


def classify_reception(
    expected_range: tuple[int, int] | None,
    decoded: DecodeResult | None,
    received: bool,
) -> str:
    """Sort one bar-graph reception into the four-way decision tree."""
    if not received:
        return "lost"
    if decoded is None or not decoded.valid:
        return "failed"
    lo, hi = expected_range
    return "correct" if lo <= decoded.value <= hi else "false_positive"


def categorize_measurement(result: MeasurementResult) -> str | None:
    """Classification category of a measurement, None if nothing hit the air."""
    if result.status is MeasurementStatus.NO_RESPONSE:
        return None
    if result.status is MeasurementStatus.LOST:
        return "lost"
    expected = (min(result.expected_values), max(result.expected_values))
    return classify_reception(expected, result.decoded, received=True)


@dataclass
class NodeRuntime:
    node_id: int
    hop: int
    clock: HardwareClock
    vclock: VirtualClock
    comp_filter: CompensationFilter
    formed: bool = False
    last_raw_ps: float = math.nan
    true_delay_ps: int = 0
    counts: dict[str, int] = field(default_factory=lambda: {c: 0 for c in metrics.CATEGORIES})

    def flush_counts(self) -> dict[str, int]:
        counts, self.counts = self.counts, {c: 0 for c in metrics.CATEGORIES}
        return counts


@dataclass
class AuditLog:
    """Extra bookkeeping for invariant tests, off by default."""

    measurements: list[MeasurementResult] = field(default_factory=list)
    floods: list[dict[int, FloodReception]] = field(default_factory=list)
    clock_samples: dict[int, list[tuple[int, float]]] = field(default_factory=dict)
    slope_ratios: list[tuple[int, float]] = field(default_factory=list)


@dataclass
class RunResult:
    scenario: Scenario
    rows: list[MetricsRow] = field(default_factory=list)
    matrix_rows: list[MatrixRow] = field(default_factory=list)
    warmup_periods: int = 0
    audit: AuditLog | None = None


class SimEngine:
    """One scenario run; owns all node state and the event queue."""

    def __init__(self, scenario: Scenario, audit: bool = False):
        scenario.validate()
        self.scenario = scenario
        self.queue = EventQueue()
        self.audit = AuditLog() if audit else None
        self._rng_cache: dict[tuple[int, int], np.random.Generator] = {}

        if scenario.kind == "protocol":
            self.topology = scenario.topology()
            self.graph = flooding.assign_hops(
                self.topology, scenario.master, scenario.radio, scenario.forced_hops
            )
            self.geometric_delays = flooding.geometric_flood_delays(self.graph)
            self.nodes: dict[int, NodeRuntime] = {}
            for spec in sorted(scenario.nodes, key=lambda n: n.id):
                self.nodes[spec.id] = NodeRuntime(
                    node_id=spec.id,
                    hop=self.graph.hop[spec.id],
                    clock=HardwareClock(
                        tick_ps=scenario.protocol.tick_ps, skew_ppb=spec.skew_ppb
                    ),
                    vclock=VirtualClock(
                        period_ps=scenario.period_ps,
                        slope_floor=scenario.sync.slope_floor,
                        compensate=scenario.sync.compensation,
                    ),
                    comp_filter=CompensationFilter(pole=scenario.sync.filter_pole),
                    formed=(spec.id == scenario.master),
                    true_delay_ps=self.geometric_delays[spec.id],
                )
            self.warmup_periods = (
                protocol.tdma_cycle_periods(len(scenario.slave_ids), scenario.slots)
                * self.graph.max_hop
            )

    # RNG streams -----------------------------------------------------------

    def rng(self, stream: int, key: int) -> np.random.Generator:
        try:
            return self._rng_cache[(stream, key)]
        except KeyError:
            gen = np.random.default_rng(
                np.random.SeedSequence((self.scenario.seed, stream, key))
            )
            self._rng_cache[(stream, key)] = gen
            return gen

    def _rx_rng(self, node: int) -> np.random.Generator:
        return self.rng(STREAM_RX, node)

    # Main loop -------------------------------------------------------------

    def run(self) -> RunResult:
        if self.scenario.kind == "matrix":
            return RunResult(
                self.scenario,
                matrix_rows=run_bargraph_matrix(self.scenario),
                audit=self.audit,
            )

        result = RunResult(self.scenario, warmup_periods=self.warmup_periods, audit=self.audit)
        sc = self.scenario
        for period in range(sc.periods):
            t0 = period * sc.period_ps
            self.queue.push(t0, ("flood", period))
            for slot in range(sc.slots):
                self.queue.push(
                    t0 + sc.reserved_offset_ps + slot * sc.slot_gap_ps,
                    ("slot", period, slot),
                )
            self.queue.push(t0 + sc.period_ps - PROBE_MARGIN_PS, ("probe", period))

        while len(self.queue):
            t, event = self.queue.pop()
            if event[0] == "flood":
                self._handle_flood(t, event[1])
            elif event[0] == "slot":
                self._handle_slot(t, event[1], event[2])
            else:
                self._handle_probe(t, event[1], result.rows)
        return result

    # Handlers ---------------------------------------------------------------

    def _handle_flood(self, t_ps: int, period: int) -> None:
        sc = self.scenario
        receptions = flooding.simulate_flood(
            self.graph,
            t_ps,
            sc.radio,
            self._rx_rng,
            delay_bias_ps=sc.protocol.delay_bias_ps,
        )
        if self.audit is not None:
            self.audit.floods.append(receptions)
        for node_id in sorted(self.nodes):
            if node_id == sc.master:
                continue
            rt = self.nodes[node_id]
            rec = receptions[node_id]
            if not rec.received:
                continue  # coast on the previous segment
            rt.true_delay_ps = rec.true_delay_ps
            rng = self.rng(STREAM_RESIDUAL, node_id)
            sigma = sc.sync.residual_std_s
            draw = (lambda: rng.normal(0.0, sigma)) if sigma > 0 else (lambda: 0.0)
            # The scheme absorbs every deterministic relay cost; what is left
            # behind its corrected flood timestamp is the accumulated
            # propagation delay plus a zero-mean residual.
            ideal_s = seconds(rec.arrival_ps - rec.true_delay_ps)
            boot_knot = ideal_s - (draw() if not rt.vclock.synced else 0.0)
            next_knot = ideal_s + seconds(sc.period_ps) - draw()
            rt.vclock.resync(rec.arrival_ps, boot_knot, next_knot)
            self._sample_clock(rt, rec.arrival_ps)

    def _handle_slot(self, t_ps: int, period: int, slot: int) -> None:
        sc = self.scenario
        initiator = protocol.tdma_initiator(period, slot, sc.slave_ids, sc.slots)
        rt = self.nodes[initiator]

        formed_delay_ps = {sc.master: 0.0}
        for node_id, other in self.nodes.items():
            if other.formed and node_id != sc.master:
                formed_delay_ps[node_id] = other.comp_filter.applied_s * PS_PER_SECOND

        clocks = {n: r.clock for n, r in self.nodes.items()}
        result = protocol.initiate_measurement(
            initiator,
            self.graph,
            clocks,
            formed_delay_ps,
            sc.protocol,
            sc.radio,
            self._rx_rng,
            t_ps,
        )
        if self.audit is not None:
            self.audit.measurements.append(result)

        category = categorize_measurement(result)
        if category is not None:
            rt.counts[category] += 1

        if result.status is MeasurementStatus.OK:
            rt.last_raw_ps = result.cumulated_ps
            applied_s = rt.comp_filter.update(result.cumulated_ps / PS_PER_SECOND)
            rt.formed = True
            if rt.vclock.synced:
                rt.vclock.apply_correction(result.outcome.sfd_rx_ps, applied_s)
                if self.audit is not None:
                    ratio = rt.vclock.min_slope_bound() / rt.vclock.slope
                    self.audit.slope_ratios.append((initiator, ratio))
                self._sample_clock(rt, result.outcome.sfd_rx_ps)

    def _handle_probe(self, t_ps: int, period: int, rows: list[MetricsRow]) -> None:
        sc = self.scenario
        for node_id in sorted(self.nodes):
            if node_id == sc.master:
                continue
            rt = self.nodes[node_id]
            counts = rt.flush_counts()
            sync_ns = (
                sync_error_s(rt.vclock, t_ps) * 1e9 if rt.vclock.synced else math.nan
            )
            applied = rt.comp_filter.applied_s
            rows.append(
                MetricsRow(
                    period=period,
                    node=node_id,
                    hop=rt.hop,
                    true_delay_ns=rt.true_delay_ps / 1e3,
                    estimate_ns=rt.last_raw_ps / 1e3,
                    applied_ns=applied * 1e9 if applied is not None else math.nan,
                    sync_error_ns=sync_ns,
                    n_correct=counts["correct"],
                    n_false_positive=counts["false_positive"],
                    n_failed=counts["failed"],
                    n_lost=counts["lost"],
                )
            )

    def _sample_clock(self, rt: NodeRuntime, start_ps: int, n_ticks: int = 256) -> None:
        """Audit-mode dense sampling of the virtual clock at tick granularity."""
        if self.audit is None or not rt.vclock.synced:
            return
        horizon = self.queue.peek_time()
        tick = self.scenario.protocol.tick_ps
        end = start_ps + n_ticks * tick
        if horizon is not None:
            end = min(end, horizon)
        samples = self.audit.clock_samples.setdefault(rt.node_id, [])
        for t in range(start_ps, end + 1, tick):
            samples.append((t, rt.vclock.value(t)))


def run_scenario(scenario: Scenario, audit: bool = False) -> RunResult:
    """Run one scenario to completion; deterministic given (scenario, seed)."""
    return SimEngine(scenario, audit=audit).run()


def run_bargraph_matrix(scenario: Scenario) -> list[MatrixRow]:
    """Channel-fusion grid: two equal-power senders, optional interferer.

    Mirrors the bench experiment: senders transmit similar but unequal
    bar-graph values with a controlled skew, while a weaker transmitter
    concurrently sends a clearly different value. An interferer whose
    level puts it outside radio range degenerates to the off case.
    """
    from . import bargraph

    m = scenario.matrix
    params = scenario.radio
    cfg = scenario.protocol
    rows: list[MatrixRow] = []
    v1, v2 = m.pair_values
    expected = (min(v1, v2), max(v1, v2))

    for cell_idx, (skew_ns, rel_db, payload_b, dist) in enumerate(m.cells()):
        nibbles = 2 * payload_b
        half = m.pair_offset_m / 2.0
        x = math.sqrt(max(dist * dist - half * half, 0.0))
        positions = {
            0: NodePosition(0.0, 0.0),
            1: NodePosition(x, half),
            2: NodePosition(x, -half),
        }
        senders = [
            (1, bargraph.encode(v1, nibbles), 0),
            (2, bargraph.encode(v2, nibbles), skew_ns * 1000),
        ]
        if rel_db is not None:
            d_int = dist * 10.0 ** (-rel_db / (10.0 * params.path_loss_exponent))
            if d_int <= params.radio_range_m:
                positions[3] = NodePosition(d_int, 0.0)
                senders.append((3, bargraph.encode(m.interferer_value, nibbles), 0))
        topo = Topology(positions)

        base_ps = 1_000_000
        events = [
            TransmissionEvent(nid, payload, base_ps + offset, FrameKind.RESPONSE)
            for nid, payload, offset in senders
        ]
        rng = np.random.default_rng(
            np.random.SeedSequence((scenario.seed, STREAM_MATRIX, cell_idx))
        )
        counts = {c: 0 for c in metrics.CATEGORIES}
        for _ in range(m.trials):
            outcome = radio.resolve_reception(
                0, events, topo, params, rng, flip_other_prob=cfg.flip_other_prob
            )
            if outcome.kind is ReceptionKind.LOST:
                counts["lost"] += 1
                continue
            decoded = bargraph.decode(outcome.payload, cfg.codec_threshold)
            counts[classify_reception(expected, decoded, received=True)] += 1
        rows.append(
            MatrixRow(
                skew_ns=skew_ns,
                interferer_db=rel_db,
                payload_bytes=payload_b,
                distance_m=dist,
                trials=m.trials,
                **{f"n_{c}": counts[c] for c in metrics.CATEGORIES},
            )
        )
    return rows
