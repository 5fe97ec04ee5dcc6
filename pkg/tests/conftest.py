"""Collects acceptance verdicts and prints one line per criterion at the end of the run."""

VERDICTS: dict[str, tuple[bool, str]] = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    VERDICTS[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(VERDICTS, key=lambda k: int(k.split()[0])):
        passed, detail = VERDICTS[name]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {name}: {detail}")
