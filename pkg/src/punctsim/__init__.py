"""Link-level simulator for URLLC puncturing over scheduled eMBB traffic.

The package couples a mini-slot resource grid, a proportional-fair eMBB
scheduler, a pluggable packet decodability model, two non-learning puncturing
baselines, and a soft actor-critic agent whose raw actions are made feasible
by a KL projection plus integer apportionment step.
"""

__version__ = "0.1.0"

from .core import (
    CellConfig,
    DecodeOutcome,
    PuncturingVector,
    ScheduleVector,
    TtiTrace,
    compute_reward,
    goodput_scs,
)

__all__ = [
    "CellConfig",
    "DecodeOutcome",
    "PuncturingVector",
    "ScheduleVector",
    "TtiTrace",
    "compute_reward",
    "goodput_scs",
]
