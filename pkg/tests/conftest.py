import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE: dict = {}


def record(criterion: int, description: str, ok: bool, detail: str = "") -> None:
    """Log an acceptance outcome; the terminal summary prints one line each."""
    ACCEPTANCE[criterion] = (description, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        desc, ok, detail = ACCEPTANCE[n]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {desc}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
