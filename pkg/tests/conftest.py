import math
import sys
from pathlib import Path

import pytest

# Ensure project root is on sys.path so that `wolff_toolkit` is importable
PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

MEASURES_DIR = PROJECT_ROOT / "wolff_toolkit" / "config" / "measures"
TASKS_DIR = PROJECT_ROOT / "wolff_toolkit" / "config" / "tasks"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: grid solves taking more than a few seconds")


@pytest.fixture
def unit_ball():
    """Lebesgue measure of the unit ball in R^3 (mass 4π/3)."""
    from wolff_toolkit.src.measures.radial import RadialMeasure

    return RadialMeasure.uniform_ball(1.0, 4.0 * math.pi / 3.0, 3)


@pytest.fixture
def unit_mass_ball():
    from wolff_toolkit.src.measures.radial import RadialMeasure

    return RadialMeasure.uniform_ball(1.0, 1.0, 3)


@pytest.fixture
def zero_radial():
    from wolff_toolkit.src.measures.radial import RadialMeasure

    return RadialMeasure.zero(3)
