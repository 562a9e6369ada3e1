import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vidseg.core import ClassDef, ClassTable


@pytest.fixture
def small_table():
    """3 scored classes (0, 1, 2) plus unknown (3)."""
    return ClassTable(
        classes=(
            ClassDef(0, "a", (10, 10, 10)),
            ClassDef(1, "b", (20, 20, 20)),
            ClassDef(2, "c", (30, 30, 30)),
            ClassDef(3, "unknown", (0, 0, 0)),
        ),
        unknown_id=3,
    )


@pytest.fixture
def pair_table():
    """2 scored classes (0, 1) plus unknown (2)."""
    return ClassTable(
        classes=(
            ClassDef(0, "a", (10, 10, 10)),
            ClassDef(1, "b", (20, 20, 20)),
            ClassDef(2, "unknown", (0, 0, 0)),
        ),
        unknown_id=2,
    )
