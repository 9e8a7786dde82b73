import numpy as np
import pytest

from lelsd import HalfPlaneSegmenter, LatentCode, PlantedGenerator


@pytest.fixture(scope="session")
def planted():
    return PlantedGenerator(seed=0)


@pytest.fixture(scope="session")
def planted_linear():
    return PlantedGenerator(seed=0, linear=True)


@pytest.fixture(scope="session")
def segmenter(planted):
    return HalfPlaneSegmenter.for_backend(planted)


@pytest.fixture(scope="session")
def left(segmenter):
    return segmenter.part_by_name("left")


@pytest.fixture(scope="session")
def right(segmenter):
    return segmenter.part_by_name("right")


@pytest.fixture
def random_code(planted):
    rng = np.random.default_rng(2024)
    return LatentCode(planted.space, rng.standard_normal(8))
