"""Feasibility layer between raw policy actions and the resource grid.

A raw action b >= 0 rarely satisfies the per-mini-slot contract (integer
SC counts, per-user allocation caps, exact total j*L).  Enforcement is a
two-step projection:

1. kl_project: minimise D_KL(b || m) over 0 <= m <= caps, sum(m) = demand.
   The optimum is water-filling m_e = min(cap_e, b_e / nu); the multiplier
   nu is found by bisection.
2. apportion: round the continuous optimum to integers that still sum to
   the demand, using Huntington-Hill priorities m_e / sqrt(a(a+1)).

Batched variants process many (b, caps, demand) rows at once; the scalar
API delegates to them so both paths are bit-identical by construction.
"""

from dataclasses import dataclass

import numpy as np

BISECT_MAX_ITERS = 200
BISECT_REL_WIDTH = 1e-13
# entries this small cannot survive the ratio arithmetic without
# underflow; they carry no usable mass and count as zero
MASS_FLOOR = 1e-250


class InfeasibleDemandError(ValueError):
    """Demand exceeds the total puncturable allocation."""


@dataclass(frozen=True)
class ContinuousProjection:
    m_hat: np.ndarray
    nu: float
    degenerate: bool


def kl_divergence(b, m_hat) -> float:
    """D_KL(b || m_hat) with the 0*log(0/x) = 0 convention."""
    b = np.asarray(b, dtype=float)
    m = np.asarray(m_hat, dtype=float)
    mask = b > 0
    if np.any(m[mask] <= 0):
        return float("inf")
    return float(np.sum(b[mask] * np.log(b[mask] / m[mask])))


def kl_project_batch(b, caps, demand):
    """Water-filling projection for a batch of rows.

    b:      (R, E) non-negative raw actions
    caps:   (R, E) per-user caps
    demand: (R,) required totals
    Returns (m_hat (R, E), nu (R,), degenerate (R,) bool).
    """
    b = np.asarray(b, dtype=float)
    caps = np.asarray(caps, dtype=float)
    demand = np.asarray(demand, dtype=float)
    if b.ndim != 2 or b.shape != caps.shape or demand.shape != (b.shape[0],):
        raise ValueError("shape mismatch")
    if np.any(b < 0) or np.any(caps < 0) or np.any(demand < 0):
        raise ValueError("b, caps and demand must be non-negative")
    if np.any(demand > caps.sum(axis=1) + 1e-9):
        raise InfeasibleDemandError("demand exceeds total capacity")

    R, _ = b.shape
    m_hat = np.zeros_like(b)
    nu = np.zeros(R)
    pos = (b > MASS_FLOOR) & (caps > 0)
    pos_cap = np.where(pos, caps, 0.0).sum(axis=1)
    active = demand > 0
    # rows whose positive-action users cannot absorb the demand fall through
    # to the degenerate fill below
    degenerate = active & (pos_cap < demand - 1e-12)
    bisect_rows = active & ~degenerate

    if np.any(bisect_rows):
        idx = np.flatnonzero(bisect_rows)
        bb = b[idx]
        cc = caps[idx]
        dd = demand[idx]
        pp = pos[idx]
        ratio = np.where(pp, bb / np.maximum(cc, 1e-300), np.inf)
        lo = ratio.min(axis=1)              # all positive users capped here
        hi = bb.sum(axis=1) / dd            # uncapped mass matches demand here
        lo = np.minimum(lo, hi)
        # geometric stepping: the water level can sit hundreds of decades
        # below the bracket top, which arithmetic halving cannot reach
        for _ in range(BISECT_MAX_ITERS):
            if np.all(hi - lo <= BISECT_REL_WIDTH * hi):
                break
            mid = np.sqrt(lo) * np.sqrt(hi)
            fill = np.minimum(cc, bb / mid[:, None]).sum(axis=1)
            ge = fill >= dd
            lo = np.where(ge, mid, lo)
            hi = np.where(ge, hi, mid)
        nu_rows = np.sqrt(lo) * np.sqrt(hi)
        m_hat[idx] = np.minimum(cc, bb / nu_rows[:, None])
        nu[idx] = nu_rows

    if np.any(degenerate):
        idx = np.flatnonzero(degenerate)
        for r in idx:
            # cap every positive-action user, spread the slack over the rest
            # proportionally to their residual capacity
            row_pos = pos[r]
            fill = np.where(row_pos, caps[r], 0.0)
            slack = demand[r] - fill.sum()
            rest = ~row_pos
            rest_cap = np.where(rest, caps[r], 0.0).sum()
            if rest_cap > 0 and slack > 0:
                fill = np.where(rest, caps[r] * slack / rest_cap, fill)
            m_hat[r] = fill
    return m_hat, nu, degenerate


def apportion_batch(m_hat, caps, demand) -> np.ndarray:
    """Integer rounding of continuous targets via ranked seat grants.

    Priorities follow Huntington-Hill: a user already holding a grants
    competes for the next one with priority m_hat / sqrt(a(a+1)); a user
    with no grants yet precedes all seated users, ordered by m_hat; users
    with m_hat = 0 receive grants only once every positive-target user is
    capped, lowest index first.  Ties go to the lowest index.

    Within one user the seat priorities are strictly decreasing, so the
    sequential grant process equals taking the per-row top-demand seats of
    a single global ranking; one lexsort replaces the seat loop.
    """
    m_hat = np.asarray(m_hat, dtype=float)
    caps_arr = np.asarray(caps, dtype=float)
    demand = np.asarray(demand)
    if m_hat.ndim != 2 or m_hat.shape != caps_arr.shape:
        raise ValueError("shape mismatch")
    if np.any(demand < 0):
        raise ValueError("demand must be non-negative")
    if np.any(demand > caps_arr.sum(axis=1)):
        raise InfeasibleDemandError("demand exceeds total capacity")
    R, E = m_hat.shape
    grants = np.zeros((R, E), dtype=np.int64)
    want = np.zeros(R, dtype=np.int64)
    want[:] = np.asarray(demand, dtype=np.int64)
    if R == 0 or not want.any():
        return grants

    counts = np.ceil(caps_arr).astype(np.int64).ravel()  # seats per user
    total = int(counts.sum())
    flat_user = np.repeat(np.arange(R * E, dtype=np.int64), counts)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    seat = np.arange(total, dtype=np.int64) - np.repeat(starts, counts)
    mass = m_hat.ravel()[flat_user]
    first = seat == 0
    # phase 0/1: first/later seats of positive users; 2/3: of zero users
    phase = np.where(mass > 0, 0, 2) + np.where(first, 0, 1)
    af = seat.astype(float)
    prio = np.where(first, mass, mass / np.sqrt(np.maximum(af * (af + 1.0), 1.0)))
    order = np.lexsort((seat, flat_user % E, -prio, phase, flat_user // E))

    row_sizes = counts.reshape(R, E).sum(axis=1)
    block = np.concatenate(([0], np.cumsum(row_sizes)[:-1]))
    rank = np.arange(total, dtype=np.int64) - np.repeat(block, row_sizes)
    chosen = flat_user[order[rank < np.repeat(want, row_sizes)]]
    np.add.at(grants.ravel(), chosen, 1)
    return grants


def kl_project(b, caps, demand: float) -> ContinuousProjection:
    """Scalar-instance projection; see kl_project_batch."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    caps = np.atleast_2d(np.asarray(caps, dtype=float))
    m_hat, nu, degen = kl_project_batch(b, caps, np.asarray([demand], dtype=float))
    return ContinuousProjection(m_hat=m_hat[0], nu=float(nu[0]),
                                degenerate=bool(degen[0]))


def apportion(m_hat, caps, demand: int) -> list:
    grants = apportion_batch(np.atleast_2d(np.asarray(m_hat, dtype=float)),
                             np.atleast_2d(np.asarray(caps, dtype=float)),
                             np.asarray([demand]))
    return [int(g) for g in grants[0]]


def enforce(b, schedule, j: int, urllc_sc_len: int):
    """Map a raw action to a feasible mini-slot puncturing vector.

    Demand is j * L for branch j; branch 0 punctures nothing.
    """
    from .core import PuncturingVector

    if j < 0:
        raise ValueError("branch index must be >= 0")
    if j == 0:
        return PuncturingVector([0] * len(schedule))
    demand = j * urllc_sc_len
    proj = kl_project(b, schedule.alloc, demand)
    grants = apportion(proj.m_hat, schedule.alloc, demand)
    return PuncturingVector(grants)


def enforce_batch(b, caps, demands) -> np.ndarray:
    """Batched enforce over rows; demands of zero produce zero rows."""
    b = np.asarray(b, dtype=float)
    caps = np.asarray(caps, dtype=float)
    demands = np.asarray(demands, dtype=np.int64)
    m_hat, _, _ = kl_project_batch(b, caps, demands.astype(float))
    return apportion_batch(m_hat, caps, demands)
