"""Propagation-delay compensation for flooding-based WSN clock sync, at desk scale.

A deterministic discrete-event simulator and protocol library: capture-effect
radio model, bar-graph payload fusion codec, flooding-graph construction,
hop-addressed round-trip delay measurement over TDMA, and filtered
compensation of a monotonic virtual clock.
"""

from .bargraph import DecodeResult, NibblePayload, decode, encode, merge_channel
from .engine import classify_reception, run_bargraph_matrix, run_scenario
from .flooding import assign_hops, predecessor_set, simulate_flood
from .presets import experiment_preset
from .protocol import (
    DelayRequest,
    cumulate,
    initiate_measurement,
    last_hop_delay_ps,
    sanity_check,
    tdma_initiator,
)
from .radio import (
    NodePosition,
    RadioParams,
    Topology,
    TransmissionEvent,
    propagation_delay,
    received_power,
    resolve_reception,
)
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "DecodeResult",
    "DelayRequest",
    "NibblePayload",
    "NodePosition",
    "RadioParams",
    "Scenario",
    "Topology",
    "TransmissionEvent",
    "assign_hops",
    "classify_reception",
    "cumulate",
    "decode",
    "encode",
    "experiment_preset",
    "initiate_measurement",
    "last_hop_delay_ps",
    "load_scenario",
    "merge_channel",
    "predecessor_set",
    "propagation_delay",
    "received_power",
    "resolve_reception",
    "run_bargraph_matrix",
    "run_scenario",
    "sanity_check",
    "simulate_flood",
    "tdma_initiator",
]
