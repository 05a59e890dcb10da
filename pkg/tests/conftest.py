from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hybridids.flowdata import EncodedDataset  # noqa: E402


def make_dataset(X, y, names=None) -> EncodedDataset:
    X = np.asarray(X, dtype=float)
    names = names or tuple(f"f{i}" for i in range(X.shape[1]))
    return EncodedDataset(X, np.asarray(y, dtype=np.int64), tuple(names), ())


@pytest.fixture
def blobs3():
    """Three separated 2-d blobs, each 90 attack / 10 normal rows, plus cluster ids."""
    rng = np.random.default_rng(0)
    rows, labels, groups = [], [], []
    for g, centre in enumerate([(0.0, 0.0), (20.0, 0.0), (0.0, 20.0)]):
        pts = np.asarray(centre) + rng.standard_normal((100, 2))
        lab = np.r_[np.zeros(10, dtype=int), np.ones(90, dtype=int)]
        # the normals of each blob sit on one side so the task is learnable
        pts[:10, 0] -= 3.0
        rows.append(pts)
        labels.append(lab)
        groups.append(np.full(100, g))
    return make_dataset(np.vstack(rows), np.concatenate(labels)), np.concatenate(groups)


# -- acceptance criterion reporting ------------------------------------------

ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    n = getattr(report, "criterion", None)
    if n is None:
        for key, value in report.user_properties:
            if key == "criterion":
                n = value
    if n is None or report.when not in ("setup", "call"):
        return
    title = dict(report.user_properties).get("title", "")
    if report.skipped:
        ACCEPTANCE[n] = ("SKIP", title)
    elif report.failed:
        ACCEPTANCE[n] = ("FAIL", title)
    elif report.when == "call":
        ACCEPTANCE[n] = ("PASS", title)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {title}")
