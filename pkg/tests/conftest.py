import numpy as np
import pytest

from usreg.phantom import PhantomSpec, generate
from usreg.segmentation import segment_roi


@pytest.fixture(scope="session")
def default_phantom():
    """Default 199^3 phantom, seed 42."""
    return generate(PhantomSpec())


@pytest.fixture(scope="session")
def default_roi(default_phantom):
    return segment_roi(default_phantom[0])


@pytest.fixture(scope="session")
def clean_phantom():
    """Full-size phantom without speckle."""
    return generate(PhantomSpec(speckle_sigma=0.0))


@pytest.fixture(scope="session")
def clean_roi(clean_phantom):
    return segment_roi(clean_phantom[0])


@pytest.fixture(scope="session")
def coarse_clean():
    """Noise-free phantom on a 100^3 grid with the same physical extent (0.56 mm voxels)."""
    vol, truth = generate(PhantomSpec(dims=(100, 100, 100), spacing=(0.56,) * 3, speckle_sigma=0.0))
    return vol, segment_roi(vol)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
