import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vpm import GridSpec, assemble_helmholtz, assemble_mass


@pytest.fixture
def spec1d():
    return GridSpec.line(0.0, 8.0, 32)


@pytest.fixture
def spec2d():
    return GridSpec.box((0.0, 4.0), (0.0, 2.0), 16, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def ops1d(spec1d):
    return assemble_mass(spec1d), assemble_helmholtz(spec1d, alpha=0.5)
