import pytest

ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def record_criterion():
    """Record one summary line per acceptance criterion; printed at session end."""

    def record(key: str, ok: bool, detail: str):
        prev = ACCEPTANCE_LINES.get(key)
        if prev is not None and prev.startswith("FAIL"):
            ok = False
            detail = prev.split(" | ", 1)[1] + "; " + detail
        elif prev is not None:
            detail = prev.split(" | ", 1)[1] + "; " + detail
        ACCEPTANCE_LINES[key] = f"{'PASS' if ok else 'FAIL'} | {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[1])):
        status, detail = ACCEPTANCE_LINES[key].split(" | ", 1)
        terminalreporter.write_line(f"{key}: {status}  ({detail})")
