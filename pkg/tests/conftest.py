import pytest

from vesselmc.core import vein_preset


def small_vein(n=2000, end=1.0, **changes):
    """Vein preset cut down to a few thousand molecules and a short horizon."""
    return vein_preset().replace(molecules_per_emission=n, end_time_s=end, **changes)


@pytest.fixture
def vein():
    return vein_preset()


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number: int, name: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        print(line)
        _ACCEPTANCE.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
