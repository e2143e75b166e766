import math

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from ghzkey.state import HALF_PI, EntanglementConfig, PayoffMatrix, StrategyTriple

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

angles_half = st.floats(0.0, HALF_PI, allow_nan=False)
thetas = st.floats(0.0, math.pi, allow_nan=False)
phases = st.floats(-math.pi, math.pi, allow_nan=False)
cvals = st.floats(0.1, 0.9, allow_nan=False)
seeds = st.integers(0, 2**32 - 1)


@st.composite
def configs(draw):
    return EntanglementConfig(draw(angles_half), draw(angles_half))


@st.composite
def triples(draw, with_phases=True):
    ths = [draw(thetas) for _ in range(3)]
    if not with_phases:
        return StrategyTriple.from_thetas(ths)
    return StrategyTriple.from_thetas(ths, [draw(phases) for _ in range(3)], [draw(phases) for _ in range(3)])


@st.composite
def matrices(draw):
    rng = np.random.default_rng(draw(seeds))
    return PayoffMatrix(rng.uniform(-5.0, 10.0, size=(3, 8)))


def random_config(rng) -> EntanglementConfig:
    return EntanglementConfig(rng.uniform(0, HALF_PI), rng.uniform(0, HALF_PI))


def random_triple(rng, with_phases=True) -> StrategyTriple:
    ths = rng.uniform(0, math.pi, 3)
    if not with_phases:
        return StrategyTriple.from_thetas(ths)
    return StrategyTriple.from_thetas(ths, rng.uniform(-math.pi, math.pi, 3), rng.uniform(-math.pi, math.pi, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# --- acceptance summary ----------------------------------------------------------------

ACCEPTANCE: dict = {}


def report_acceptance(criterion: str, ok: bool, detail: str) -> None:
    """Record one check; the terminal summary prints one line per criterion."""
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))


def acceptance_lines() -> list[str]:
    lines = []
    for criterion in sorted(ACCEPTANCE, key=lambda c: int(c.split()[0])):
        checks = ACCEPTANCE[criterion]
        verdict = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        lines.append(f"{verdict}  criterion {criterion}: " + "; ".join(d for _, d in checks))
    return lines


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines():
            terminalreporter.write_line(line)
