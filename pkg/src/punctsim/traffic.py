"""URLLC packet arrivals, admission capping and queue carry-over.

Arrivals are Bernoulli per URLLC UE per mini-slot.  The band fits at most
floor(N/L) packets per mini-slot; excess packets wait in an unbounded FIFO
queue and are admitted queue-first in later mini-slots.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrafficConfig:
    num_urllc: int = 12        # U
    per_ue_prob: float = 0.08  # p, per UE per mini-slot

    def __post_init__(self):
        if self.num_urllc < 0:
            raise ValueError("num_urllc must be >= 0")
        if not (0.0 <= self.per_ue_prob <= 1.0):
            raise ValueError("per_ue_prob must lie in [0, 1]")


@dataclass(frozen=True)
class ArrivalProfile:
    """Raw and admitted packet counts for one TTI."""

    raw: tuple
    admitted: tuple
    queue_len_after: int

    def __post_init__(self):
        if len(self.raw) != len(self.admitted):
            raise ValueError("raw and admitted must have equal length")


def draw_arrivals(cfg: TrafficConfig, minislots: int,
                  rng: np.random.Generator) -> tuple:
    """One TTI of raw arrivals: U independent Bernoulli(p) per mini-slot."""
    counts = []
    for _ in range(minislots):
        counts.append(int(np.count_nonzero(rng.random(cfg.num_urllc) < cfg.per_ue_prob)))
    return tuple(counts)


def admit(raw, carried_in: int, cap: int) -> ArrivalProfile:
    """Cap per-mini-slot admissions, serving the queue before new arrivals.

    Conservation: carried_in + sum(raw) = sum(admitted) + queue_len_after.
    """
    if carried_in < 0:
        raise ValueError("carried_in must be >= 0")
    queue = carried_in
    admitted = []
    for r in raw:
        if r < 0:
            raise ValueError("raw counts must be >= 0")
        pending = queue + r
        a = min(cap, pending)
        admitted.append(a)
        queue = pending - a
    return ArrivalProfile(raw=tuple(int(r) for r in raw),
                          admitted=tuple(admitted),
                          queue_len_after=queue)


class UrllcQueue:
    """Packet backlog persisting across TTIs.  Single-owner mutable state."""

    def __init__(self, initial: int = 0):
        if initial < 0:
            raise ValueError("initial backlog must be >= 0")
        self.backlog = int(initial)

    def step(self, raw, cap: int) -> ArrivalProfile:
        prof = admit(raw, self.backlog, cap)
        self.backlog = prof.queue_len_after
        return prof
