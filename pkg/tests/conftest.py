from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def acceptance(request):
    """Records (criterion, label, passed, detail) rows for the end-of-run summary."""
    rows = request.config.stash[_LINES]

    def record(criterion, label, passed, detail):
        rows.append((criterion, label, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} criterion {criterion} [{label}]: {detail}")

    return record


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(_LINES, [])
    if not rows:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted({r[0] for r in rows}, key=str):
        mine = [r for r in rows if r[0] == crit]
        ok = sum(r[2] for r in mine if not r[1].startswith("info"))
        graded = [r for r in mine if not r[1].startswith("info")]
        tag = "PASS" if ok == len(graded) else "FAIL"
        tr.write_line(f"{tag} criterion {crit}: {ok}/{len(graded)} sub-cases within tolerance")
        for _, label, passed, detail in mine:
            mark = "info" if label.startswith("info") else ("ok" if passed else "out")
            tr.write_line(f"    {mark:4} {label}: {detail}")
