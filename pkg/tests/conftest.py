import numpy as np
import pytest

from arcscan.datagen import GenConfig, generate_dataset

VERDICTS: list[str] = []


def record(label: str, ok: bool, detail: str = "") -> None:
    line = f"{label}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
    VERDICTS.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_dataset():
    """100 surrogate images (20 per class)."""
    return generate_dataset(GenConfig(images_per_class=20))


@pytest.fixture(scope="session")
def surrogate():
    """The full 800-image surrogate."""
    return generate_dataset(GenConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
