from __future__ import annotations

import pytest

_LINES: dict[str, list[tuple[bool, str]]] = {}


class AcceptanceLog:
    """Collects one verdict per criterion; parts of a criterion are combined."""

    def record(self, key: str, ok: bool, detail: str) -> None:
        _LINES.setdefault(key, []).append((ok, detail))
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture(scope="session")
def acceptance_log() -> AcceptanceLog:
    return AcceptanceLog()


def _order(key: str):
    head = key.split()[0]
    return (int(head) if head.isdigit() else 99, key)


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_LINES, key=_order):
        parts = _LINES[key]
        ok = all(o for o, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} - {detail}")
