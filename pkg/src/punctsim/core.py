"""Resource grid primitives, reward and goodput accounting.

Time is organised as TTIs of M mini-slots over N subcarriers.  An eMBB
schedule fixes per-user subcarrier counts for a whole TTI; URLLC punctures
are decided per mini-slot in units of L subcarriers per packet.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CellConfig:
    """Static cell-level dimensions.

    total_scs:      N, subcarriers in the band
    num_embb:       E, scheduled eMBB users
    urllc_sc_len:   L, subcarriers consumed by one URLLC packet per mini-slot
    minislots:      M, mini-slots per TTI
    rb_size:        subcarriers per resource block (allocation granularity)
    """

    total_scs: int = 780
    num_embb: int = 10
    urllc_sc_len: int = 300
    minislots: int = 7
    rb_size: int = 12

    def __post_init__(self):
        if self.total_scs <= 0:
            raise ValueError("total_scs must be positive")
        if self.num_embb < 1:
            raise ValueError("num_embb must be >= 1")
        if not (0 < self.urllc_sc_len < self.total_scs):
            raise ValueError("urllc_sc_len must lie in (0, total_scs)")
        if self.minislots < 1:
            raise ValueError("minislots must be >= 1")
        if self.rb_size < 1 or self.total_scs % self.rb_size != 0:
            raise ValueError("rb_size must divide total_scs")

    @property
    def num_branches(self) -> int:
        # largest per-mini-slot packet count the band can absorb
        return self.total_scs // self.urllc_sc_len

    @property
    def num_rbs(self) -> int:
        return self.total_scs // self.rb_size


@dataclass(frozen=True)
class ScheduleVector:
    """Per-TTI eMBB allocation: SC count and MCS index per user."""

    alloc: tuple
    mcs: tuple

    def __init__(self, alloc, mcs):
        alloc = tuple(int(a) for a in alloc)
        mcs = tuple(int(m) for m in mcs)
        if len(alloc) != len(mcs):
            raise ValueError("alloc and mcs must have equal length")
        if any(a < 0 for a in alloc):
            raise ValueError("allocations must be non-negative")
        object.__setattr__(self, "alloc", alloc)
        object.__setattr__(self, "mcs", mcs)

    def __len__(self):
        return len(self.alloc)

    @property
    def total(self) -> int:
        return sum(self.alloc)


@dataclass(frozen=True)
class PuncturingVector:
    """SCs taken from each eMBB user in a single mini-slot."""

    punct: tuple

    def __init__(self, punct):
        punct = tuple(int(m) for m in punct)
        if any(m < 0 for m in punct):
            raise ValueError("puncture counts must be non-negative")
        object.__setattr__(self, "punct", punct)

    def __len__(self):
        return len(self.punct)

    @property
    def total(self) -> int:
        return sum(self.punct)

    def check_against(self, schedule: ScheduleVector):
        if len(self.punct) != len(schedule):
            raise ValueError("puncture vector length mismatch")
        for m, n in zip(self.punct, schedule.alloc):
            if m > n:
                raise ValueError("puncture count exceeds user allocation")


@dataclass(frozen=True)
class DecodeOutcome:
    """Per-user TTI decode flags."""

    ok: tuple

    def __init__(self, ok):
        ok = tuple(bool(d) for d in ok)
        object.__setattr__(self, "ok", ok)

    def __len__(self):
        return len(self.ok)


@dataclass
class TtiTrace:
    """Everything produced by one simulated TTI."""

    tti: int
    schedule: ScheduleVector
    admitted: tuple            # per-mini-slot admitted URLLC packet counts
    applied: list = field(default_factory=list)  # M PuncturingVectors
    outcome: DecodeOutcome | None = None
    reward: float = 0.0
    queue_len: int = 0
    gen_ns: int = 0            # codebook build time; 0 for rule policies


def compute_reward(schedule: ScheduleVector, outcome: DecodeOutcome,
                   total_scs: int) -> float:
    """Mean per-SC decode indicator shifted to [-1, 0].

    r = (1/N) * sum_e (d_e - 1) * n_e.  Zero iff every user holding SCs
    decodes, -1 iff the whole scheduled band is lost (when sum n_e = N).
    """
    if len(schedule) != len(outcome):
        raise ValueError("schedule and outcome must have equal length")
    if total_scs <= 0:
        raise ValueError("total_scs must be positive")
    acc = 0
    for n, d in zip(schedule.alloc, outcome.ok):
        acc += (int(d) - 1) * n
    return acc / total_scs


def goodput_scs(schedule: ScheduleVector, outcome: DecodeOutcome) -> int:
    """Decoded subcarriers in the TTI: sum_e d_e * n_e."""
    if len(schedule) != len(outcome):
        raise ValueError("schedule and outcome must have equal length")
    return sum(int(d) * n for n, d in zip(schedule.alloc, outcome.ok))


def goodput_bits(schedule: ScheduleVector, outcome: DecodeOutcome,
                 mcs_table, symbols_per_sc_per_tti: int = 14) -> float:
    """Decoded information bits, via each user's MCS spectral efficiency.

    Reporting convenience only; the reward operates on SC counts.
    """
    if len(schedule) != len(outcome):
        raise ValueError("schedule and outcome must have equal length")
    bits = 0.0
    for n, m, d in zip(schedule.alloc, schedule.mcs, outcome.ok):
        if not d:
            continue
        entry = mcs_table[m]
        bits += n * symbols_per_sc_per_tti * entry.bits_per_symbol * entry.code_rate
    return bits


def reward_stream_mean(rewards, window: int = 256) -> np.ndarray:
    """Trailing moving average used by the curriculum progress displays."""
    arr = np.asarray(rewards, dtype=float)
    if arr.size == 0:
        return arr
    out = np.empty_like(arr)
    csum = np.cumsum(arr)
    for i in range(arr.size):
        lo = max(0, i - window + 1)
        total = csum[i] - (csum[lo - 1] if lo > 0 else 0.0)
        out[i] = total / (i - lo + 1)
    return out
