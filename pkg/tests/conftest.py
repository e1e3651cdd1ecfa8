from collections import defaultdict

import pytest

# criterion number -> list of (check label, passed, detail)
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)


@pytest.fixture
def record():
    def _record(criterion: int, label: str, passed: bool, detail: str = ""):
        ACCEPTANCE[criterion].append((label, bool(passed), detail))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[k]
        ok = all(p for _, p, _ in checks)
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}")
        for label, passed, detail in checks:
            mark = "ok  " if passed else "FAIL"
            terminalreporter.write_line(f"    [{mark}] {label}" + (f": {detail}" if detail else ""))
