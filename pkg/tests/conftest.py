import pytest

# (number, title, passed, detail) rows filled in by the acceptance tests
CRITERIA = []


@pytest.fixture
def criterion():
    def record(number, title, passed, detail=""):
        CRITERIA.append((number, title, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} {detail}")
        assert passed, f"criterion {number} failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(CRITERIA, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}  {detail}")
