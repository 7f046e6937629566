import numpy as np
import pytest

from waveholtz import BoundarySpec, Grid1D, WaveSpeedField, build_laplacian_1d


def laplacian_1d(n_nodes, bc="DD", a=0.0, b=1.0, c=1.0):
    grid = Grid1D(a, b, n_nodes)
    return build_laplacian_1d(grid, WaveSpeedField.constant(grid, c), BoundarySpec.from_code(bc))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def _acceptance_label(nodeid):
    name = nodeid.split("::")[-1]
    if name.startswith("test_criterion_"):
        return "criterion " + str(int(name.split("_")[2]))
    return name.removeprefix("test_").replace("_", " ")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if outcome == "passed" and rep.when != "call":
                continue
            detail = dict(getattr(rep, "user_properties", [])).get("detail", "")
            verdict = "PASS" if outcome == "passed" else "FAIL"
            lines.append((nodeid, f"{verdict}  {_acceptance_label(nodeid)}  {detail}".rstrip()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)
