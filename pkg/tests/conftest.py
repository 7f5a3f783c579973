import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fairdisagree.grouping import assign_pairs, proxy_partition  # noqa: E402
from fairdisagree.io_report import write_scores  # noqa: E402
from fairdisagree.synth import generate, phenomena_suite, reference_fixture  # noqa: E402

REFERENCE = {
    "fpr": [0.05, 0.06, 0.08, 0.10],
    "fnr": [0.03, 0.04, 0.05, 0.06],
    "acc": [0.90, 0.88, 0.85, 0.83],
}

_acceptance_results: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str = "") -> None:
    prev = _acceptance_results.get(number)
    if prev is not None and not prev[0]:
        return
    _acceptance_results[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance_results):
        passed, detail = _acceptance_results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def criterion():
    """Record one acceptance criterion's outcome for the terminal summary."""
    return record_criterion


def prepared(dataset):
    scores = list(dataset.scores)
    partition = proxy_partition({s.identity_a for s in scores} | {s.identity_b for s in scores})
    return scores, assign_pairs(scores, partition)


@pytest.fixture(scope="session")
def reference_dataset():
    return reference_fixture()


@pytest.fixture(scope="session")
def reference_file(reference_dataset, tmp_path_factory):
    path = tmp_path_factory.mktemp("reference") / "scores.csv"
    write_scores(reference_dataset.scores, path)
    return path


@pytest.fixture(scope="session")
def suite():
    return phenomena_suite()


@pytest.fixture(scope="session")
def small_dataset():
    from fairdisagree.synth import DistSpec, GroupScoreSpec

    specs = [
        GroupScoreSpec(lbl, DistSpec("truncnormal", 0.7 - 0.05 * i, 0.15),
                       DistSpec("truncnormal", 0.2 + 0.05 * i, 0.15), 60, 240)
        for i, lbl in enumerate("ABCD")
    ]
    return generate(specs, 11, name="small")
