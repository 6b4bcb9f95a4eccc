import numpy as np
import pytest

from labelprop.store import ClassRegistry, EmbeddingRecord, EmbeddingStore, Space
from labelprop.synth import SyntheticConfig, synth_generate


@pytest.fixture
def registry2():
    return ClassRegistry.from_names(["apple", "cereal_box"], ["Simple", "Simple"])


@pytest.fixture
def tiny_store(registry2):
    recs = (
        EmbeddingRecord("r1", "space_a", np.array([1.0, 0.0, 0.0, 0.5]), 0, "img1", "Simple"),
        EmbeddingRecord("r2", "space_a", np.array([0.0, 1.0, 0.25, 0.0]), 1, "img1"),
    )
    return EmbeddingStore({"space_a": Space(4, recs)}, registry2, {"representative": ["r1"], "train": ["r2"]})


@pytest.fixture(scope="session")
def separable_store():
    cfg = SyntheticConfig(
        seed=3,
        num_classes=5,
        dim=16,
        spaces=("space_a",),
        samples_per_class_per_split={"representative": 4, "train": 30, "validation": 30},
        cluster_sigma=0.1,
        center_scale=1.0,
    )
    return synth_generate(cfg)


_ACCEPTANCE: list[tuple[int, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args
    _ACCEPTANCE.append((number, title, "PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number} {title}: {status}")
