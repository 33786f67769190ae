import numpy as np
import pytest

from synth_audit.numcore import SeededRng


@pytest.fixture
def rng():
    return SeededRng(1234)


@pytest.fixture
def np_rng():
    return np.random.default_rng(1234)
