import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scribbleseg.datasets import ToyDatasetSpec, generate_toy_dataset
from scribbleseg.grids import BinaryMask
from scribbleseg.rng import SeededRng


@pytest.fixture(scope="session")
def toy_index(tmp_path_factory):
    """Small disk/ring dataset shared by data-path tests."""
    root = tmp_path_factory.mktemp("toyset")
    spec = ToyDatasetSpec(families=("disk", "ring"), count=20, size=64)
    return generate_toy_dataset(spec, SeededRng(11), root)


@pytest.fixture()
def disk_mask():
    yy, xx = np.mgrid[:21, :21]
    return BinaryMask(((yy - 10) ** 2 + (xx - 10) ** 2) <= 25)


@pytest.fixture()
def rng():
    return SeededRng(7)
