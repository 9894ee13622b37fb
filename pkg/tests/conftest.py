"""Shared geometry fixtures.

`neighborhood` reproduces the canonical capture-effect situation: node 4
sits one hop past three hop-1 nodes, two of them close by at equal
distance and one markedly farther, with a master behind them. Node 5 is a
hop-2 peer of node 4 and node 7 sits at hop 3, so requests sent by node 4
are overheard by nodes that must ignore them.
"""

from __future__ import annotations

import numpy as np
import pytest

from floodsync.radio import NodePosition, RadioParams, Topology

MASTER = 0


@pytest.fixture
def params20():
    """Short-range, noiseless radio used by the geometry tests."""
    return RadioParams(radio_range_m=20.0, sfd_jitter_std_ps=0)


@pytest.fixture
def neighborhood():
    # distances from node 4: nodes 1,2 at 6.08 m, node 3 at 13.6 m
    # (7.0 dB weaker with exponent 2, beyond the 5 dB capture window)
    return Topology(
        {
            MASTER: NodePosition(-24.0, 0.0),
            1: NodePosition(-6.0, 1.0),
            2: NodePosition(-6.0, -1.0),
            3: NodePosition(-13.6, 0.0),
            4: NodePosition(0.0, 0.0),
            5: NodePosition(-1.0, 8.0),
            7: NodePosition(14.0, 0.0),
        }
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
