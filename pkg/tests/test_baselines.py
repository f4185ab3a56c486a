import pytest
from hypothesis import given, strategies as st

from punctsim.baselines import rp_puncture, sef_puncture
from punctsim.core import ScheduleVector


def test_rp_known_column(case_schedule):
    y = rp_puncture(case_schedule, 300)
    assert y.punct == (23, 41, 28, 28, 28, 18, 28, 18, 37, 51)
    assert y.total == 300


def test_sef_known_columns(case_schedule):
    assert sef_puncture(case_schedule, 300).punct == \
        (60, 0, 72, 72, 0, 48, 0, 48, 0, 0)
    assert sef_puncture(case_schedule, 600).punct == \
        (60, 60, 72, 72, 72, 48, 72, 48, 96, 0)


def test_zero_demand(case_schedule):
    assert rp_puncture(case_schedule, 0).total == 0
    assert sef_puncture(case_schedule, 0).total == 0


def test_rp_symmetric_split():
    sched = ScheduleVector(alloc=[10, 10], mcs=[0, 0])
    assert rp_puncture(sched, 10).punct == (5, 5)


def test_demand_exceeding_band_rejected(case_schedule):
    with pytest.raises(ValueError):
        rp_puncture(case_schedule, 781)
    with pytest.raises(ValueError):
        sef_puncture(case_schedule, 781)


@given(st.lists(st.integers(0, 60), min_size=1, max_size=8),
       st.floats(0.0, 1.0))
def test_both_policies_feasible(alloc, frac):
    total = sum(alloc)
    demand = int(round(frac * total))
    sched = ScheduleVector(alloc=alloc, mcs=[0] * len(alloc))
    for fn in (rp_puncture, sef_puncture):
        y = fn(sched, demand)
        assert y.total == demand
        assert all(0 <= m <= n for m, n in zip(y.punct, alloc))
