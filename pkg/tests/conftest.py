"""Collects acceptance-criterion outcomes and prints one line per criterion."""

from collections import OrderedDict

import pytest

CRITERIA = OrderedDict(
    (n, title)
    for n, title in [
        (1, "design-1 accuracy study, 10K x 200"),
        (2, "design-2 misspecification, 10K x 200"),
        (3, "design-2 sample-size scaling, 100K x 50"),
        (4, "design-1 bootstrap coverage, 100 x 100"),
        (5, "design-2 bootstrap coverage"),
        (6, "credit-card study (or synthetic smoke contract)"),
        (7, "property suite"),
        (8, "CLI determinism"),
        (9, "bootstrap analytic anchor"),
    ]
)

_results: dict[int, list[tuple[str, str, str]]] = {n: [] for n in CRITERIA}


class Recorder:
    def __call__(self, criterion: int, check: str, passed: bool, detail: str = ""):
        _results[criterion].append((check, "PASS" if passed else "FAIL", detail))
        return passed

    def skip(self, criterion: int, check: str, reason: str):
        _results[criterion].append((check, "SKIP", reason))
        pytest.skip(reason)


@pytest.fixture(scope="session")
def record():
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not any(_results.values()):
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        checks = _results[n]
        if not checks:
            tr.write_line(f"criterion {n}: NOT RUN  {title}")
            continue
        states = {s for _, s, _ in checks}
        if "FAIL" in states:
            verdict = "FAIL"
        elif states == {"SKIP"}:
            verdict = "SKIP"
        else:
            verdict = "PASS"
        tr.write_line(f"criterion {n}: {verdict}  {title}")
        for check, state, detail in checks:
            tr.write_line(f"    [{state}] {check}: {detail}")
