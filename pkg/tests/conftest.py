import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from motionfc.dataio import SynthConfig, generate_synthetic  # noqa: E402


@pytest.fixture(scope="session")
def synth_small():
    return generate_synthetic(SynthConfig(n_scenarios=12, seed=5))
