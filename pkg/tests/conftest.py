import numpy as np
import pytest

from phosphor import Category, StimulusCatalog, StimulusClip

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"[acceptance] {name}: {status}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def balanced_catalog() -> StimulusCatalog:
    """In-memory balanced 16-clip catalog (no frame files on disk)."""
    clips = []
    for category in (Category.N, Category.C, Category.CP, Category.P):
        for k in range(4):
            clip_id = f"{category.value}_{k:02d}"
            clips.append(StimulusClip(
                clip_id=clip_id,
                frame_dir=clip_id,
                fps=25.0,
                duration_s=5.0,
                category=category,
                has_people=category.has_people,
                has_cars=category.has_cars,
            ))
    return StimulusCatalog(clips=tuple(clips))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
