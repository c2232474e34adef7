import datetime as dt
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # tests/perpoint.py

from eventimpact.catalog import DailyCountSeries, StudyWindow
from eventimpact.simulator import SimConfig, bin_to_days, simulate

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def make_series(counts, origin=dt.date(2020, 1, 1), region_id="test"):
    return DailyCountSeries(origin=origin, counts=np.asarray(counts, dtype=np.int64),
                            region_id=region_id)


def sim_series(duration: int, replicate: int, master: int = 20200620) -> DailyCountSeries:
    """One study-style catalog binned to days (event at day index 30)."""
    if duration == 0:
        levels = (0.2, 0.2, 0.2)
    else:
        levels = (0.2, 1.0, 0.4)
    config = SimConfig(
        mu=3.0, decay_rate=0.25, levels=levels,
        t_star=31.0, t_prime=31.0 + duration, horizon=100.0,
        seed=(master, duration, replicate),
    )
    return bin_to_days(simulate(config), 100, region_id=f"d{duration}r{replicate}")


@pytest.fixture
def window_100() -> StudyWindow:
    return StudyWindow(t0=0, t_star=30, T=99)
