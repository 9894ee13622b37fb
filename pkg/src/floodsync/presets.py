"""Canned experiment scenarios at desk scale.

single_hop_sweep   two nodes, distance stepped 10..60 m, one measurement
                   per second for five minutes per distance.
multi_hop_line     six hops in a line, 68 m apart (hop six is 408 m out),
                   TDMA measurements over 300 one-second periods.
bargraph_matrix    channel-fusion grid: transmit skew x interferer level
                   x payload size x receiver distance.
full_scheme        seven-node double diamond spanning a 272 m flood path,
                   60 s synchronization period, compensation on.
"""

from __future__ import annotations

from .scenario import MatrixConfig, NodeSpec, Scenario, SweepSpec
from .units import parse_duration_ps

PRESET_DESCRIPTIONS = {
    "single_hop_sweep": "two nodes, distance sweep 10..60 m, 300 one-second periods each",
    "multi_hop_line": "six-hop line at 68 m spacing, 300 one-second periods",
    "bargraph_matrix": "bar-graph fusion grid: skew x interferer x payload x distance",
    "full_scheme": "seven-node double diamond, 272 m path, 60 s period, compensation",
}


def experiment_preset(name: str) -> Scenario:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        known = ", ".join(sorted(_BUILDERS))
        raise ValueError(f"unknown preset {name!r}; available presets: {known}") from None
    return builder()


def _single_hop_sweep() -> Scenario:
    return Scenario(
        name="single_hop_sweep",
        seed=42,
        periods=300,
        period_ps=parse_duration_ps("1s"),
        nodes=(NodeSpec(0, 0.0, 0.0), NodeSpec(1, 10.0, 0.0)),
        slots=1,
        sweep=SweepSpec(axis="distance", values=(10.0, 20.0, 30.0, 40.0, 50.0, 60.0)),
    )


def _multi_hop_line() -> Scenario:
    nodes = tuple(NodeSpec(i, 68.0 * i, 0.0) for i in range(7))
    return Scenario(
        name="multi_hop_line",
        seed=42,
        periods=300,
        period_ps=parse_duration_ps("1s"),
        nodes=nodes,
        slots=2,
    )


def _bargraph_matrix() -> Scenario:
    return Scenario(
        name="bargraph_matrix",
        seed=42,
        periods=1,
        nodes=(),
        matrix=MatrixConfig(),
    )


def _full_scheme() -> Scenario:
    # Two-node hops at 1 and 3 exercise constructive interference in the
    # round-trip exchanges; the folded 4x68 m path puts the last node 272 m
    # from the master along the flood route.
    nodes = (
        NodeSpec(0, 0.0, 0.0, hop=0),
        NodeSpec(1, 68.0, 3.0, hop=1),
        NodeSpec(2, 68.0, -3.0, hop=1),
        NodeSpec(3, 136.0, 0.0, hop=2),
        NodeSpec(4, 204.0, 3.0, hop=3),
        NodeSpec(5, 204.0, -3.0, hop=3),
        NodeSpec(6, 272.0, 0.0, hop=4),
    )
    return Scenario(
        name="full_scheme",
        seed=42,
        periods=112,  # 12 formation periods + 100 measured
        period_ps=parse_duration_ps("60s"),
        nodes=nodes,
        slots=2,
    )


_BUILDERS = {
    "single_hop_sweep": _single_hop_sweep,
    "multi_hop_line": _multi_hop_line,
    "bargraph_matrix": _bargraph_matrix,
    "full_scheme": _full_scheme,
}
