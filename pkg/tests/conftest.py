import pytest

# (number, title, passed, detail) for every acceptance criterion that ran
VERDICTS: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        VERDICTS.append((number, title, bool(passed), detail))
        print(f"\n{'PASS' if passed else 'FAIL'} [{number:2d}] {title}: {detail}")
        assert passed, f"criterion {number} ({title}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(VERDICTS):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} [{number:2d}] {title}: {detail}")
    n_pass = sum(v[2] for v in VERDICTS)
    terminalreporter.write_line(f"{n_pass}/{len(VERDICTS)} criteria passed")
