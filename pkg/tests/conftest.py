import numpy as np
import pytest

from netgame.model import AttributeTable, ModelParameters, NetworkState


def random_table(n: int, rng: np.random.Generator) -> AttributeTable:
    return AttributeTable(
        sex=rng.integers(0, 2, n), grade=rng.integers(7, 13, n), race=rng.integers(0, 3, n),
        price_cents=rng.uniform(120, 220, n), hh_smokes=rng.integers(0, 2, n),
        mom_edu=rng.integers(0, 2, n), income=rng.uniform(20, 140, n))


def random_theta(rng: np.random.Generator, scale: float = 1.0) -> ModelParameters:
    vec = scale * rng.normal(size=13)
    vec[1] *= 0.01  # price is in cents
    return ModelParameters.from_vector(vec)


def random_state(n: int, rng: np.random.Generator) -> NetworkState:
    return NetworkState.random(n, rng, rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9))


def high_grade_table(n: int) -> AttributeTable:
    """Homogeneous covariates with every grade >= 9, so triangles count."""
    return AttributeTable.uniform(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            for name, value in getattr(rep, "user_properties", []):
                if name == "acceptance":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
