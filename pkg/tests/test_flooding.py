"""Flooding graph construction, predecessor sets, flood propagation."""

from __future__ import annotations

import numpy as np
import pytest

from floodsync.flooding import (
    DisconnectedTopologyError,
    assign_hops,
    format_topology,
    geometric_flood_delays,
    predecessor_set,
    simulate_flood,
)
from floodsync.radio import NodePosition, RadioParams, Topology, propagation_delay_ps


@pytest.fixture
def nine_node_layout():
    """Three hops of three nodes each around a master, range 30 m.

    Designed so hop-3 connectivity is sparse: node 7 hears only node 4,
    node 8 hears nodes 5 and 6, node 9 hears only node 6.
    """
    topo = Topology(
        {
            0: NodePosition(0.0, 0.0),
            1: NodePosition(20.0, 10.0),
            2: NodePosition(20.0, -10.0),
            3: NodePosition(25.0, 0.0),
            4: NodePosition(45.0, 15.0),
            5: NodePosition(45.0, -15.0),
            6: NodePosition(50.0, 0.0),
            7: NodePosition(70.0, 25.0),
            8: NodePosition(70.0, -20.0),
            9: NodePosition(75.0, -2.0),
        }
    )
    return topo, RadioParams(radio_range_m=30.0, sfd_jitter_std_ps=0)


def flat_rng(_node):
    return np.random.default_rng(0)


class TestAssignHops:
    def test_three_hop_layout(self, nine_node_layout):
        topo, params = nine_node_layout
        graph = assign_hops(topo, 0, params)
        assert graph.hop == {0: 0, 1: 1, 2: 1, 3: 1, 4: 2, 5: 2, 6: 2, 7: 3, 8: 3, 9: 3}

    def test_sparse_third_hop_edges(self, nine_node_layout):
        topo, params = nine_node_layout
        graph = assign_hops(topo, 0, params)
        assert graph.prev_hop_neighbors[7] == (4,)
        assert graph.prev_hop_neighbors[8] == (5, 6)
        assert graph.prev_hop_neighbors[9] == (6,)
        # multiple in-edges: the flooding graph is not a tree
        assert len(graph.prev_hop_neighbors[8]) > 1

    def test_single_master(self):
        topo = Topology({0: NodePosition(0, 0)})
        graph = assign_hops(topo, 0, RadioParams())
        assert graph.hop == {0: 0}
        assert graph.max_hop == 0

    def test_line_of_six(self):
        topo = Topology({i: NodePosition(68.0 * i, 0.0) for i in range(6)})
        graph = assign_hops(topo, 0, RadioParams(radio_range_m=100.0))
        assert graph.hop == {i: i for i in range(6)}

    def test_disconnected_node_is_named(self):
        topo = Topology(
            {0: NodePosition(0, 0), 1: NodePosition(50, 0), 9: NodePosition(5000, 0)}
        )
        with pytest.raises(DisconnectedTopologyError, match="9"):
            assign_hops(topo, 0, RadioParams(radio_range_m=100.0))

    def test_forced_hops(self):
        topo = Topology({0: NodePosition(0, 0), 1: NodePosition(30, 0)})
        graph = assign_hops(topo, 0, RadioParams(), forced_hops={0: 0, 1: 1})
        assert graph.hop[1] == 1
        with pytest.raises(ValueError, match="master"):
            assign_hops(topo, 0, RadioParams(), forced_hops={0: 2, 1: 1})


class TestPredecessorSet:
    def test_far_node_excluded(self, neighborhood, params20):
        graph = assign_hops(neighborhood, 0, params20)
        assert predecessor_set(4, graph, params20).members == (1, 2)

    def test_single_neighbor_singleton(self):
        topo = Topology({0: NodePosition(0, 0), 1: NodePosition(40, 0)})
        graph = assign_hops(topo, 0, RadioParams())
        assert predecessor_set(1, graph, RadioParams()).members == (0,)

    def test_three_equidistant_all_members(self):
        # nodes 1..3 sit on a 40 m circle around node 4, all inside the
        # master's range; equal powers put all three in the predecessor set
        topo = Topology(
            {
                0: NodePosition(0, 0),
                1: NodePosition(60.0, 0.0),
                2: NodePosition(100.0 - 40.0 * 0.8660254, 20.0),
                3: NodePosition(100.0 - 40.0 * 0.8660254, -20.0),
                4: NodePosition(100.0, 0.0),
            }
        )
        params = RadioParams(radio_range_m=75.0)
        graph = assign_hops(topo, 0, params)
        assert graph.hop[4] == 2
        assert predecessor_set(4, graph, params).members == (1, 2, 3)

    def test_master_has_no_predecessors(self, neighborhood, params20):
        graph = assign_hops(neighborhood, 0, params20)
        with pytest.raises(ValueError):
            predecessor_set(0, graph, params20)

    def test_strongest_previous_hop_node_always_member(self, nine_node_layout):
        topo, params = nine_node_layout
        graph = assign_hops(topo, 0, params)
        for node in topo.node_ids:
            if node == 0:
                continue
            members = predecessor_set(node, graph, params).members
            closest = min(
                graph.prev_hop_neighbors[node], key=lambda u: topo.distance(node, u)
            )
            assert closest in members


class TestSimulateFlood:
    def test_single_hop_noiseless_arrival(self):
        topo = Topology({0: NodePosition(0, 0), 1: NodePosition(68, 0)})
        params = RadioParams(sfd_jitter_std_ps=0)
        graph = assign_hops(topo, 0, params)
        rec = simulate_flood(graph, 10**9, params, flat_rng)[1]
        assert rec.received
        assert rec.true_delay_ps == propagation_delay_ps(68.0)
        assert rec.arrival_ps == 10**9 + propagation_delay_ps(68.0) + params.sfd_detection_lag_ps

    def test_six_hop_line_accumulates_per_hop_delays(self):
        topo = Topology({i: NodePosition(68.0 * i, 0.0) for i in range(7)})
        params = RadioParams(radio_range_m=100.0, sfd_jitter_std_ps=0)
        graph = assign_hops(topo, 0, params)
        receptions = simulate_flood(graph, 0, params, flat_rng)
        assert receptions[6].true_delay_ps == 6 * propagation_delay_ps(68.0)
        assert receptions[6].true_delay_ps == pytest.approx(1.361e6, abs=1e3)  # ~1.361 us

    def test_shadowed_node_does_not_set_the_timing(self, neighborhood, params20):
        graph = assign_hops(neighborhood, 0, params20)
        receptions = simulate_flood(graph, 0, params20, flat_rng)
        assert receptions[4].contributors == (1, 2)
        assert 3 not in receptions[4].contributors

    def test_flood_delay_at_least_straight_line(self, nine_node_layout):
        topo, params = nine_node_layout
        graph = assign_hops(topo, 0, params)
        receptions = simulate_flood(graph, 0, params, flat_rng)
        for node in topo.node_ids:
            straight = propagation_delay_ps(topo.distance(0, node))
            assert receptions[node].true_delay_ps >= straight

    def test_geometric_delays_match_noiseless_flood(self, nine_node_layout):
        topo, params = nine_node_layout
        graph = assign_hops(topo, 0, params)
        receptions = simulate_flood(graph, 0, params, flat_rng)
        for node, delay in geometric_flood_delays(graph).items():
            assert receptions[node].true_delay_ps == delay


def test_topology_dump_lists_every_node(neighborhood, params20):
    graph = assign_hops(neighborhood, 0, params20)
    dump = format_topology(graph, params20)
    lines = dump.strip().splitlines()
    assert lines[0] == "node hop predecessors"
    assert len(lines) == 1 + len(neighborhood.node_ids)
    assert "4 2 1,2" in lines
