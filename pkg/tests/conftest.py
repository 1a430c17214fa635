import sys

import numpy as np
import pytest


def write_toy_csv(path, n=90, seed=0):
    """Small mixed-type table; the class is (a == 'x' and v > 5) or b == 'q'."""
    rng = np.random.default_rng(seed)
    lines = ["a,b,v,class"]
    for _ in range(n):
        a = rng.choice(["x", "y"])
        b = rng.choice(["p", "q", "r"])
        v = round(float(rng.uniform(0, 10)), 2)
        label = "pos" if (a == "x" and v > 5) or b == "q" else "neg"
        lines.append(f"{a},{b},{v},{label}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def toy_csv(tmp_path):
    """Factory writing the toy table into the test's temporary directory."""
    def make(n=90, seed=0, name="toy.csv"):
        return write_toy_csv(tmp_path / name, n=n, seed=seed)
    return make


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
