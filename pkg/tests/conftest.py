import sys
from pathlib import Path

import numpy as np
import pytest

from cloudplace.catalog import Provider, default_catalog

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def providers(catalog):
    return list(catalog)


def random_providers(rng: np.random.Generator, n: int, max_cost: int = 30_000) -> list[Provider]:
    """Providers with random costs and availabilities drawn from a grid of typical SLA levels."""
    grid = [99.0, 99.5, 99.9, 99.95, 99.99, 99.995, 99.999]
    return [
        Provider(
            id=i + 1,
            name=f"p{i + 1}",
            availability_percent=float(rng.choice(grid)),
            monthly_cost_usd=int(rng.integers(1, max_cost + 1)),
        )
        for i in range(n)
    ]


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
