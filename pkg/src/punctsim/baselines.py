"""Non-learning per-mini-slot puncturing rules.

Both consume a fixed demand of punctured SCs from the scheduled users:
resource-proportional splits it by allocation share, smallest-first empties
the least-provisioned users one by one.
"""

from .core import PuncturingVector, ScheduleVector


def rp_puncture(schedule: ScheduleVector, demand: int) -> PuncturingVector:
    """Largest-remainder proportional split of `demand` SCs.

    Quota q_e = n_e * demand / sum(n); floors are granted first and the
    shortfall goes to the largest fractional parts, ties to the lowest
    user index.  Never exceeds a user's allocation.
    """
    total = schedule.total
    if not (0 <= demand <= total):
        raise ValueError("demand must lie in [0, sum alloc]")
    if demand == 0:
        return PuncturingVector([0] * len(schedule))
    quotas = [n * demand / total for n in schedule.alloc]
    grant = [int(q) for q in quotas]
    leftover = demand - sum(grant)
    # order by fractional part descending, index ascending
    order = sorted(range(len(schedule)),
                   key=lambda e: (-(quotas[e] - grant[e]), e))
    for e in order:
        if leftover == 0:
            break
        if grant[e] < schedule.alloc[e]:
            grant[e] += 1
            leftover -= 1
    if leftover:
        raise ValueError("demand not placeable under allocation caps")
    return PuncturingVector(grant)


def sef_puncture(schedule: ScheduleVector, demand: int) -> PuncturingVector:
    """Consume users whole in ascending allocation order, last one partial."""
    total = schedule.total
    if not (0 <= demand <= total):
        raise ValueError("demand must lie in [0, sum alloc]")
    grant = [0] * len(schedule)
    order = sorted(range(len(schedule)),
                   key=lambda e: (schedule.alloc[e], e))
    remaining = demand
    for e in order:
        if remaining == 0:
            break
        take = min(schedule.alloc[e], remaining)
        grant[e] = take
        remaining -= take
    return PuncturingVector(grant)
