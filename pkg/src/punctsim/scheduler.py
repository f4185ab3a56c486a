"""eMBB side of the grid: MCS selection and proportional-fair allocation.

The scheduler distributes whole resource blocks greedily by the classic
PF metric rate / smoothed-throughput.  The throughput average a user sees
inside the RB loop already includes what it was granted this TTI, so with
symmetric rates the loop degenerates to round-robin.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import CellConfig, ScheduleVector

EWMA_BETA = 0.01
AVG_FLOOR = 1e-6


@dataclass(frozen=True)
class McsEntry:
    index: int
    bits_per_symbol: int
    code_rate: float
    snr_req_db: float

    @property
    def spectral_efficiency(self) -> float:
        return self.bits_per_symbol * self.code_rate


# monotone six-step ladder from QPSK 1/3 up to 64QAM 3/4
DEFAULT_MCS_TABLE = (
    McsEntry(0, 2, 1 / 3, 1.0),
    McsEntry(1, 2, 1 / 2, 4.0),
    McsEntry(2, 4, 1 / 2, 10.0),
    McsEntry(3, 4, 3 / 4, 14.0),
    McsEntry(4, 6, 2 / 3, 18.0),
    McsEntry(5, 6, 3 / 4, 22.0),
)


def validate_mcs_table(table):
    if len(table) < 1:
        raise ValueError("mcs table must not be empty")
    eff = [e.spectral_efficiency for e in table]
    req = [e.snr_req_db for e in table]
    if any(b <= a for a, b in zip(eff, eff[1:])):
        raise ValueError("mcs spectral efficiency must increase with index")
    if any(b <= a for a, b in zip(req, req[1:])):
        raise ValueError("mcs snr requirements must increase with index")
    for i, e in enumerate(table):
        if e.index != i:
            raise ValueError("mcs indices must be consecutive from 0")
        if not (0 < e.code_rate < 1):
            raise ValueError("mcs code rate must lie in (0, 1)")


def select_mcs(snr_db: float, table=DEFAULT_MCS_TABLE) -> McsEntry:
    """Highest entry whose SNR requirement is met; lowest entry otherwise."""
    chosen = table[0]
    for entry in table:
        if snr_db >= entry.snr_req_db:
            chosen = entry
    return chosen


@dataclass
class PfState:
    """Smoothed per-user throughput in SCs/TTI.  Floored away from zero."""

    avg_tput: np.ndarray
    beta: float = EWMA_BETA

    @classmethod
    def cold_start(cls, num_users: int, beta: float = EWMA_BETA) -> "PfState":
        return cls(avg_tput=np.full(num_users, AVG_FLOOR), beta=beta)


def pf_schedule(state: PfState, inst_rate, mcs_indices,
                cell: CellConfig) -> ScheduleVector:
    """Grant all RBs greedily by rate/avg, then commit the EWMA update.

    During the loop each user's provisional average blends the standing
    EWMA with the SCs granted so far this TTI, so repeated grants to one
    user progressively lower its metric.  Ties pick the lowest index
    (argmax keeps the first maximum).  Mutates `state`.
    """
    rates = np.asarray(inst_rate, dtype=float)
    if rates.shape != (cell.num_embb,):
        raise ValueError("inst_rate length mismatch")
    if np.any(rates < 0):
        raise ValueError("rates must be non-negative")
    granted = np.zeros(cell.num_embb)
    avg = np.maximum(state.avg_tput, AVG_FLOOR)
    for _ in range(cell.num_rbs):
        provisional = np.maximum((1 - state.beta) * avg + state.beta * granted,
                                 AVG_FLOOR)
        metric = rates / provisional
        winner = int(np.argmax(metric))
        granted[winner] += cell.rb_size
    state.avg_tput = np.maximum((1 - state.beta) * avg + state.beta * granted,
                                AVG_FLOOR)
    alloc = granted.astype(int)
    if alloc.sum() != cell.total_scs:
        raise AssertionError("PF must grant the whole band")
    return ScheduleVector(alloc=alloc.tolist(), mcs=list(mcs_indices))
