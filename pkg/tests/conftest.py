import json
from pathlib import Path

import pytest

ORACLES = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def oracle():
    return json.loads(ORACLES.read_text())
