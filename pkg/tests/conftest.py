import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from medcorrupt.core import ImageBuffer
from medcorrupt.registry import default_registry
from medcorrupt.synthetic import synthetic_image

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def rgb_image():
    return synthetic_image(7, 224, 3)


@pytest.fixture(scope="session")
def gray_image():
    return synthetic_image(8, 224, 1)


@pytest.fixture(scope="session")
def small_rgb():
    return synthetic_image(11, 64, 3)


@pytest.fixture(scope="session")
def small_gray():
    return synthetic_image(12, 64, 1)


def constant_image(value: int, size: int = 64, channels: int = 3) -> ImageBuffer:
    return ImageBuffer(np.full((size, size, channels), value, dtype=np.uint8))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
