import pytest

from punctsim.core import CellConfig, ScheduleVector

# ten-user schedule reused across fixture tests; MCS picks are arbitrary
CASE_ALLOC = (60, 108, 72, 72, 72, 48, 72, 48, 96, 132)


@pytest.fixture
def case_schedule():
    return ScheduleVector(alloc=CASE_ALLOC, mcs=[0] * 10)


@pytest.fixture
def full_cell():
    return CellConfig(total_scs=780, num_embb=10, urllc_sc_len=300,
                      minislots=7, rb_size=12)


@pytest.fixture
def desk_cell():
    return CellConfig(total_scs=96, num_embb=4, urllc_sc_len=24,
                      minislots=7, rb_size=12)
