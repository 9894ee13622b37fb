"""Geometric propagation and reception-resolution model.

All nodes transmit with the same power, so received power is a function of
distance alone (log-distance path loss). A receiver presented with several
overlapping transmissions locks onto the strongest group: senders within
`capture_window` dB of the strongest one are contributors, markedly weaker
senders are shadowed by the capture effect. Contributors interfere
constructively only if their signals arrive within `skew_tolerance` of one
another; otherwise the reception is destroyed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .bargraph import NibblePayload, merge_channel
from .units import PS_PER_SECOND, SPEED_OF_LIGHT

TICK_PS_DEFAULT = 42_000  # 24 MHz timestamping counter


@dataclass(frozen=True)
class NodePosition:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def distance_to(self, other: "NodePosition") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Topology:
    """Immutable node-id -> position map with distance helpers."""

    positions: dict[int, NodePosition]

    def distance(self, a: int, b: int) -> float:
        return self.positions[a].distance_to(self.positions[b])

    def in_range(self, a: int, b: int, radio_range: float) -> bool:
        return a != b and self.distance(a, b) <= radio_range

    def neighbors(self, node: int, radio_range: float) -> list[int]:
        return sorted(
            other for other in self.positions if self.in_range(node, other, radio_range)
        )

    @property
    def node_ids(self) -> list[int]:
        return sorted(self.positions)


@dataclass(frozen=True)
class RadioParams:
    """Network-wide radio constants.

    tx_power is a single network-wide value by construction: flooding by
    constructive interference requires every node to transmit with the
    same power, which is also what makes received power a proxy for
    distance.
    """

    tx_power_dbm: float = 0.0
    radio_range_m: float = 100.0
    path_loss_exponent: float = 2.0
    capture_window_db: float = 5.0
    skew_tolerance_ps: int = 500_000  # 0.5 us constructive-interference tolerance
    symbol_duration_ps: int = 16_000_000  # one nibble per 62.5 ksymbol/s symbol
    sfd_detection_lag_ps: int = TICK_PS_DEFAULT
    sfd_jitter_std_ps: int = TICK_PS_DEFAULT

    def __post_init__(self) -> None:
        if self.capture_window_db <= 0:
            raise ValueError("capture_window must be > 0 dB")
        if self.skew_tolerance_ps <= 0:
            raise ValueError("skew_tolerance must be > 0")


class FrameKind(enum.Enum):
    FLOOD = "flood"
    REQUEST = "request"
    RESPONSE = "response"


@dataclass(frozen=True)
class TransmissionEvent:
    """One frame leaving an antenna; time marks the last SFD bit."""

    sender: int
    payload: NibblePayload
    sfd_tx_ps: int
    kind: FrameKind = FrameKind.RESPONSE


class ReceptionKind(enum.Enum):
    CLEAN = "clean"
    CONSTRUCTIVE = "constructive"
    CAPTURED = "captured"
    LOST = "lost"


@dataclass(frozen=True)
class ReceptionOutcome:
    kind: ReceptionKind
    contributors: tuple[int, ...] = ()
    shadowed: tuple[int, ...] = ()
    payload: NibblePayload | None = None
    sfd_rx_ps: int | None = None

    @property
    def received(self) -> bool:
        return self.kind is not ReceptionKind.LOST


LOST = ReceptionOutcome(ReceptionKind.LOST)


def propagation_delay(distance_m: float) -> float:
    """Line-of-sight propagation delay in seconds."""
    if distance_m < 0:
        raise ValueError(f"negative distance {distance_m}")
    return distance_m / SPEED_OF_LIGHT


def propagation_delay_ps(distance_m: float) -> int:
    return round(propagation_delay(distance_m) * PS_PER_SECOND)


def received_power(tx_power_dbm: float, distance_m: float, exponent: float) -> float:
    """Log-distance path loss relative to a 1 m reference distance."""
    if distance_m <= 0:
        raise ValueError(f"distance must be > 0, got {distance_m}")
    return tx_power_dbm - 10.0 * exponent * math.log10(distance_m)


def resolve_reception(
    receiver: int,
    concurrent: list[TransmissionEvent],
    topology: Topology,
    params: RadioParams,
    rng: np.random.Generator,
    flip_other_prob: float = 0.01,
    delay_bias_ps: int = 0,
) -> ReceptionOutcome:
    """Decide what `receiver` observes from a set of overlapping frames.

    Callers pre-filter to senders within radio range. The capture
    partition depends only on received powers; powers exactly at the
    window edge still count as contributors. The constructive-interference
    skew check is applied to signal arrival times at the receiver, which
    for the equal-distance concurrent responses of the measurement
    protocol equals the transmit-time skew.

    `delay_bias_ps` adds a constant propagation excess (obstructed line of
    sight); it stretches every arrival identically.
    """
    if not concurrent:
        raise ValueError("no transmissions to resolve")

    arrivals = {
        ev.sender: ev.sfd_tx_ps
        + propagation_delay_ps(topology.distance(receiver, ev.sender))
        + delay_bias_ps
        for ev in concurrent
    }

    if len(concurrent) == 1:
        only = concurrent[0]
        contributors: tuple[int, ...] = (only.sender,)
        shadowed: tuple[int, ...] = ()
        payload = only.payload
        kind = ReceptionKind.CLEAN
    else:
        powers = {
            ev.sender: received_power(
                params.tx_power_dbm,
                topology.distance(receiver, ev.sender),
                params.path_loss_exponent,
            )
            for ev in concurrent
        }
        strongest = max(powers.values())
        contrib_events = sorted(
            (ev for ev in concurrent if powers[ev.sender] >= strongest - params.capture_window_db),
            key=lambda ev: ev.sender,
        )
        contributors = tuple(ev.sender for ev in contrib_events)
        shadowed = tuple(
            sorted(ev.sender for ev in concurrent if ev.sender not in contributors)
        )

        kinds = {ev.kind for ev in contrib_events}
        lengths = {len(ev.payload) for ev in contrib_events}
        if len(kinds) > 1 or len(lengths) > 1:
            return LOST  # colliding frames of different types never merge

        first = min(arrivals[s] for s in contributors)
        last = max(arrivals[s] for s in contributors)
        if last - first > params.skew_tolerance_ps:
            return LOST

        if len(contrib_events) == 1:
            payload = contrib_events[0].payload
        else:
            payload = merge_channel(
                [ev.payload for ev in contrib_events], rng, flip_other_prob
            )
        kind = ReceptionKind.CAPTURED if shadowed else ReceptionKind.CONSTRUCTIVE

    rx_ps = min(arrivals[s] for s in contributors) + params.sfd_detection_lag_ps
    if params.sfd_jitter_std_ps > 0:
        rx_ps += round(rng.normal(0.0, params.sfd_jitter_std_ps))
    return ReceptionOutcome(kind, contributors, shadowed, payload, rx_ps)
