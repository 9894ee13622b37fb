"""Round-trip delay measurement protocol over the flooding graph.

In its TDMA slot a node broadcasts a two-byte request carrying its hop
number minus one. Previous-hop nodes that already hold a cumulated delay
wait exactly tau_w after their request-SFD detection and respond
concurrently with their filtered cumulated delay, bar-graph encoded. The
initiator timestamps its transmit and receive SFDs, halves the corrected
round trip to get the last-hop delay, and adds the decoded predecessor
value to obtain its own cumulated delay from the master.

Timing convention: TX timestamps mark the last SFD bit leaving the
antenna, RX timestamps that bit's detection (propagation + lag + jitter).
The tau_w wait is anchored on the detected RX event, so the round trip is
2*propagation + tau_w + 2*lag; the nominal lag subtracted by the initiator
is the lab-calibrated value, which also absorbs the mean bias of the
floor-latching timestamp counter (a quarter tick).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import bargraph, radio
from .bargraph import DecodeResult, NibblePayload
from .clocks import HardwareClock
from .flooding import FloodingGraph
from .radio import FrameKind, RadioParams, ReceptionKind, ReceptionOutcome, TransmissionEvent
from .units import round_half_up

REQUEST_TYPE = 0x01
TAU_W_PS_DEFAULT = 192_000_000  # 192 us: turnaround plus request duration
SANITY_MARGIN_PS_DEFAULT = 210_000  # 5 ticks of slack on the outlier check


def crc16_ccitt(data: bytes) -> int:
    """CRC-16/CCITT-FALSE, the 802.15.4-style frame check."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
    return crc


@dataclass(frozen=True)
class DelayRequest:
    """Two-byte request addressed by hop number, plus a modeled CRC."""

    target_hop: int

    def __post_init__(self) -> None:
        if not 0 <= self.target_hop <= 0xFF:
            raise ValueError(f"target hop {self.target_hop} does not fit a byte")

    def to_bytes(self) -> bytes:
        body = bytes((REQUEST_TYPE, self.target_hop))
        return body + crc16_ccitt(body).to_bytes(2, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "DelayRequest":
        if len(data) != 4:
            raise ValueError(f"request frame must be 4 bytes, got {len(data)}")
        if data[0] != REQUEST_TYPE:
            raise ValueError(f"not a delay request: type byte {data[0]:#x}")
        if crc16_ccitt(data[:2]) != int.from_bytes(data[2:], "big"):
            raise ValueError("request CRC mismatch")
        return cls(data[1])

    def payload(self) -> NibblePayload:
        return NibblePayload.from_bytes(self.to_bytes())


@dataclass(frozen=True)
class ProtocolConfig:
    tick_ps: int = 42_000
    tau_w_ps: int = TAU_W_PS_DEFAULT
    payload_nibbles: int = bargraph.MAX_NIBBLES
    codec_threshold: int = bargraph.DEFAULT_THRESHOLD
    flip_other_prob: float = bargraph.DEFAULT_FLIP_OTHER_PROB
    sanity_margin_ps: int = SANITY_MARGIN_PS_DEFAULT
    delay_bias_ps: int = 0

    def sfd_lag_nominal_ps(self, params: RadioParams) -> float:
        # Calibrated detection lag: the true lag minus the mean bias of the
        # floor-latching RX timestamp (tick/4 on the halved round trip).
        return params.sfd_detection_lag_ps - self.tick_ps / 4.0


def tdma_initiator(period: int, slot: int, slave_ids: list[int], slots: int) -> int:
    """Round-robin slot assignment over the non-master node ids."""
    n = len(slave_ids)
    if n < 1:
        raise ValueError("no slave nodes to schedule")
    if not 0 <= slot < slots:
        raise ValueError(f"slot {slot} outside [0, {slots})")
    return sorted(slave_ids)[(period * slots + slot) % n]


def tdma_cycle_periods(n_slaves: int, slots: int) -> int:
    """Periods between two turns of the same node: ceil(n/s)."""
    return -(-n_slaves // slots)


def respond_value(applied_delay_ps: float, tick_ps: int, payload_nibbles: int) -> int:
    """Bar value a formed node answers with: its filtered cumulated delay
    in ticks, saturated to the payload range."""
    value = round_half_up(applied_delay_ps / tick_ps)
    return min(max(value, 0), payload_nibbles)


def respond_cumulated(applied_delay_ps: float, cfg: ProtocolConfig) -> NibblePayload:
    return bargraph.encode(
        respond_value(applied_delay_ps, cfg.tick_ps, cfg.payload_nibbles),
        cfg.payload_nibbles,
    )


def last_hop_delay_ps(
    tau_start: int, tau_end: int, cfg: ProtocolConfig, params: RadioParams
) -> float:
    """Halve the tau_w- and lag-corrected round trip measured in ticks."""
    if tau_end <= tau_start:
        raise ValueError(f"non-positive round trip: {tau_start} .. {tau_end}")
    round_trip_ps = (tau_end - tau_start) * cfg.tick_ps
    return (round_trip_ps - cfg.tau_w_ps - 2.0 * cfg.sfd_lag_nominal_ps(params)) / 2.0


def sanity_check(last_hop_ps: float, cfg: ProtocolConfig, params: RadioParams) -> bool:
    """Reject evident outliers: a last-hop delay must fit the radio range."""
    upper = radio.propagation_delay_ps(params.radio_range_m) + cfg.sanity_margin_ps
    return -cfg.sanity_margin_ps <= last_hop_ps <= upper


def cumulate(last_hop_ps: float, decoded_value: int, tick_ps: int) -> float:
    """Cumulated delay from the master: last hop plus the predecessor's
    bar-encoded cumulated delay."""
    return last_hop_ps + decoded_value * tick_ps


class MeasurementStatus(enum.Enum):
    OK = "ok"
    NO_RESPONSE = "no_response"  # no formed predecessor transmitted
    LOST = "lost"
    INVALID = "invalid"  # decoder rejected the merged payload
    REJECTED = "rejected"  # sanity check rejected the delay


@dataclass(frozen=True)
class ResponseRecord:
    responder: int
    request_rx_ps: int
    response_tx_ps: int
    value: int


@dataclass(frozen=True)
class MeasurementResult:
    initiator: int
    status: MeasurementStatus
    tau_start: int | None = None
    tau_end: int | None = None
    decoded: DecodeResult | None = None
    last_hop_ps: float | None = None
    cumulated_ps: float | None = None
    outcome: ReceptionOutcome | None = None
    expected_values: tuple[int, ...] = ()
    responses: tuple[ResponseRecord, ...] = ()
    ignored_listeners: tuple[int, ...] = ()

    @property
    def transmitted(self) -> bool:
        """Whether any bar-graph response hit the air."""
        return bool(self.responses)


def initiate_measurement(
    initiator: int,
    graph: FloodingGraph,
    clocks: dict[int, HardwareClock],
    formed_delay_ps: dict[int, float],
    cfg: ProtocolConfig,
    params: RadioParams,
    rng_for_node,
    slot_time_ps: int,
) -> MeasurementResult:
    """Run one complete round-trip exchange inside a reserved slot.

    `formed_delay_ps` maps every formed node to the filtered cumulated
    delay it currently answers with (0 for the master). Nodes in range
    whose hop differs from the request's target ignore it; they are
    reported for audit but never transmit.
    """
    topo = graph.topology
    hop = graph.hop[initiator]
    if hop < 1:
        raise ValueError("the master does not measure its own delay")
    request = DelayRequest(hop - 1)

    clock = clocks[initiator]
    tx_ps = clock.next_tick_edge(slot_time_ps)
    tau_start = clock.timestamp(tx_ps)

    listeners = topo.neighbors(initiator, params.radio_range_m)
    ignored = tuple(m for m in listeners if graph.hop[m] != request.target_hop)
    responders = [
        m
        for m in listeners
        if graph.hop[m] == request.target_hop and m in formed_delay_ps
    ]

    if not responders:
        return MeasurementResult(
            initiator, MeasurementStatus.NO_RESPONSE, tau_start=tau_start,
            ignored_listeners=ignored,
        )

    response_events: list[TransmissionEvent] = []
    records: list[ResponseRecord] = []
    for m in responders:
        arrival = (
            tx_ps
            + radio.propagation_delay_ps(topo.distance(initiator, m))
            + cfg.delay_bias_ps
            + params.sfd_detection_lag_ps
        )
        if params.sfd_jitter_std_ps > 0:
            arrival += round(rng_for_node(m).normal(0.0, params.sfd_jitter_std_ps))
        response_tx = arrival + cfg.tau_w_ps
        value = respond_value(formed_delay_ps[m], cfg.tick_ps, cfg.payload_nibbles)
        payload = bargraph.encode(value, cfg.payload_nibbles)
        response_events.append(
            TransmissionEvent(m, payload, response_tx, FrameKind.RESPONSE)
        )
        records.append(ResponseRecord(m, arrival, response_tx, value))

    outcome = radio.resolve_reception(
        initiator,
        response_events,
        topo,
        params,
        rng_for_node(initiator),
        flip_other_prob=cfg.flip_other_prob,
        delay_bias_ps=cfg.delay_bias_ps,
    )
    base = dict(
        initiator=initiator,
        tau_start=tau_start,
        responses=tuple(records),
        ignored_listeners=ignored,
        outcome=outcome,
    )
    if outcome.kind is ReceptionKind.LOST:
        values = tuple(r.value for r in records)
        return MeasurementResult(
            status=MeasurementStatus.LOST, expected_values=values, **base
        )

    expected = tuple(r.value for r in records if r.responder in outcome.contributors)
    tau_end = clock.timestamp(outcome.sfd_rx_ps)
    decoded = bargraph.decode(outcome.payload, cfg.codec_threshold)
    if not decoded.valid:
        return MeasurementResult(
            status=MeasurementStatus.INVALID,
            tau_end=tau_end,
            decoded=decoded,
            expected_values=expected,
            **base,
        )

    delta_ps = last_hop_delay_ps(tau_start, tau_end, cfg, params)
    if not sanity_check(delta_ps, cfg, params):
        return MeasurementResult(
            status=MeasurementStatus.REJECTED,
            tau_end=tau_end,
            decoded=decoded,
            last_hop_ps=delta_ps,
            expected_values=expected,
            **base,
        )

    cumulated = cumulate(delta_ps, decoded.value, cfg.tick_ps)
    return MeasurementResult(
        status=MeasurementStatus.OK,
        tau_end=tau_end,
        decoded=decoded,
        last_hop_ps=delta_ps,
        cumulated_ps=cumulated,
        expected_values=expected,
        **base,
    )
