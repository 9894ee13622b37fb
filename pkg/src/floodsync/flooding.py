"""Flooding graph construction and the periodic synchronization flood.

Hop numbers are BFS distances from the master by radio-range links. A
node's predecessor set holds the previous-hop nodes whose signal reaches
it within the capture window of the strongest one: those are the nodes
whose concurrent transmissions it actually decodes, both during flooding
and in the round-trip measurement.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import radio
from .bargraph import NibblePayload
from .radio import (
    FrameKind,
    RadioParams,
    ReceptionKind,
    Topology,
    TransmissionEvent,
)

FLOOD_PAYLOAD = NibblePayload((0xA, 0x5, 0xA, 0x5))  # sync beacon marker
RELAY_TURNAROUND_PS = 200_000_000  # 200 us per-hop relay processing, common mode


class DisconnectedTopologyError(ValueError):
    def __init__(self, nodes: list[int]):
        self.nodes = nodes
        super().__init__(f"nodes unreachable from master by radio range: {nodes}")


@dataclass(frozen=True)
class FloodingGraph:
    """BFS layering of a topology plus previous-hop adjacency.

    Not a tree: a node keeps every in-range previous-hop node as an
    in-edge.
    """

    topology: Topology
    master: int
    hop: dict[int, int]
    prev_hop_neighbors: dict[int, tuple[int, ...]]

    @property
    def max_hop(self) -> int:
        return max(self.hop.values())

    def nodes_at_hop(self, h: int) -> list[int]:
        return sorted(n for n, nh in self.hop.items() if nh == h)

    @property
    def slave_ids(self) -> list[int]:
        return sorted(n for n in self.hop if n != self.master)


def assign_hops(
    topology: Topology,
    master: int,
    params: RadioParams,
    forced_hops: dict[int, int] | None = None,
) -> FloodingGraph:
    """Layer the network by BFS radio-range distance from the master.

    `forced_hops` pins hop numbers explicitly (used to fold a physical
    layout into a longer logical path); edges still require radio range.
    """
    if master not in topology.positions:
        raise ValueError(f"master id {master} not in topology")

    if forced_hops is not None:
        missing = sorted(set(topology.positions) - set(forced_hops))
        if missing:
            raise ValueError(f"forced hops missing nodes: {missing}")
        if forced_hops[master] != 0:
            raise ValueError("master must be at hop 0")
        hop = dict(forced_hops)
    else:
        hop = {master: 0}
        frontier = deque([master])
        while frontier:
            u = frontier.popleft()
            for v in topology.neighbors(u, params.radio_range_m):
                if v not in hop:
                    hop[v] = hop[u] + 1
                    frontier.append(v)
        unreachable = sorted(set(topology.positions) - set(hop))
        if unreachable:
            raise DisconnectedTopologyError(unreachable)

    prev: dict[int, tuple[int, ...]] = {}
    for v in topology.node_ids:
        if hop[v] == 0:
            prev[v] = ()
            continue
        ups = tuple(
            u
            for u in topology.neighbors(v, params.radio_range_m)
            if hop[u] == hop[v] - 1
        )
        if not ups:
            raise DisconnectedTopologyError([v])
        prev[v] = ups
    return FloodingGraph(topology, master, hop, prev)


@dataclass(frozen=True)
class PredecessorSet:
    node: int
    members: tuple[int, ...]


def predecessor_set(node: int, graph: FloodingGraph, params: RadioParams) -> PredecessorSet:
    """Previous-hop nodes received within the capture window of the strongest."""
    if graph.hop[node] < 1:
        raise ValueError(f"node {node} is the master; it has no predecessors")
    candidates = graph.prev_hop_neighbors[node]
    powers = {
        u: radio.received_power(
            params.tx_power_dbm, graph.topology.distance(node, u), params.path_loss_exponent
        )
        for u in candidates
    }
    strongest = max(powers.values())
    members = tuple(
        sorted(u for u in candidates if powers[u] >= strongest - params.capture_window_db)
    )
    return PredecessorSet(node, members)


@dataclass(frozen=True)
class FloodReception:
    """Per-node result of one flood: detection time plus ground truth."""

    arrival_ps: int
    true_delay_ps: int
    contributors: tuple[int, ...]
    received: bool


def simulate_flood(
    graph: FloodingGraph,
    master_time_ps: int,
    params: RadioParams,
    rng_for_node,
    relay_turnaround_ps: int = RELAY_TURNAROUND_PS,
    delay_bias_ps: int = 0,
) -> dict[int, FloodReception]:
    """Propagate one flood hop by hop and record per-node ground truth.

    `rng_for_node(node_id)` supplies the receiver-owned RNG used for SFD
    detection jitter. The accumulated true delay follows the earliest
    contributor at each relay step; the common-mode relay turnaround and
    detection lag are excluded from it, matching the nominal
    distance-over-c value it is compared against.
    """
    topo = graph.topology
    receptions: dict[int, FloodReception] = {
        graph.master: FloodReception(master_time_ps, 0, (), True)
    }
    # Relay transmit events of the most recent hop that actually received.
    tx_events = {
        graph.master: TransmissionEvent(graph.master, FLOOD_PAYLOAD, master_time_ps, FrameKind.FLOOD)
    }
    true_delay = {graph.master: 0}

    for h in range(1, graph.max_hop + 1):
        next_tx: dict[int, TransmissionEvent] = {}
        for node in graph.nodes_at_hop(h):
            senders = [tx_events[u] for u in graph.prev_hop_neighbors[node] if u in tx_events]
            if not senders:
                receptions[node] = FloodReception(0, 0, (), False)
                continue
            outcome = radio.resolve_reception(
                node, senders, topo, params, rng_for_node(node), delay_bias_ps=delay_bias_ps
            )
            if outcome.kind is ReceptionKind.LOST:
                receptions[node] = FloodReception(0, 0, (), False)
                continue
            earliest = min(
                outcome.contributors,
                key=lambda u: tx_events[u].sfd_tx_ps + radio.propagation_delay_ps(topo.distance(node, u)),
            )
            delay = true_delay[earliest] + radio.propagation_delay_ps(topo.distance(node, earliest))
            true_delay[node] = delay
            receptions[node] = FloodReception(outcome.sfd_rx_ps, delay, outcome.contributors, True)
            next_tx[node] = TransmissionEvent(
                node, FLOOD_PAYLOAD, outcome.sfd_rx_ps + relay_turnaround_ps, FrameKind.FLOOD
            )
        tx_events.update(next_tx)
    return receptions


def geometric_flood_delays(graph: FloodingGraph) -> dict[int, int]:
    """Deterministic earliest-path accumulated delay, in ps, per node."""
    delays = {graph.master: 0}
    for h in range(1, graph.max_hop + 1):
        for node in graph.nodes_at_hop(h):
            delays[node] = min(
                delays[u] + radio.propagation_delay_ps(graph.topology.distance(node, u))
                for u in graph.prev_hop_neighbors[node]
                if u in delays
            )
    return delays


def format_topology(graph: FloodingGraph, params: RadioParams) -> str:
    """Structured-text adjacency dump: node, hop, predecessor set."""
    lines = ["node hop predecessors"]
    for node in graph.topology.node_ids:
        if node == graph.master:
            lines.append(f"{node} 0 -")
            continue
        pred = predecessor_set(node, graph, params)
        lines.append(f"{node} {graph.hop[node]} {','.join(map(str, pred.members))}")
    return "\n".join(lines) + "\n"
