import math

import hypothesis
import numpy as np
import pytest

from cmmlab.geometry import HalfPlane

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def square(offset=2.0):
    return [HalfPlane.from_angle(k * math.pi / 2, offset) for k in range(4)]


def rejection_centroid(constraints, box, samples, rng):
    """Independent oracle: mean and standard error of uniform points falling inside."""
    xmin, xmax, ymin, ymax = box
    pts = np.column_stack([rng.uniform(xmin, xmax, samples), rng.uniform(ymin, ymax, samples)])
    inside = np.ones(samples, dtype=bool)
    for c in constraints:
        inside &= pts @ np.asarray(c.normal) <= c.offset
    acc = pts[inside]
    area = (xmax - xmin) * (ymax - ymin) * inside.mean()
    return area, acc.mean(axis=0), acc.std(axis=0, ddof=1) / math.sqrt(len(acc))


# one verdict line per acceptance criterion, shown after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
