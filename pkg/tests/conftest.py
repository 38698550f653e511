import itertools

import numpy as np
import pytest

from qkin.gas import LevelGrid, random_state
from qkin.kernel import RateSpec, build_kernel


def brute_force_channels(lattice):
    """Every unordered {pair, pair} with equal energy sums, by exhaustive scan."""
    L = len(lattice)
    found = set()
    for k, l, m, v in itertools.product(range(L), repeat=4):
        if lattice[k] + lattice[l] != lattice[m] + lattice[v]:
            continue
        a, b = tuple(sorted((k, l))), tuple(sorted((m, v)))
        if a == b:
            continue
        found.add((min(a, b), max(a, b)))
    return found


def make_case(seed, statistics="fermi", L=None, g_max=2.0, n_frac=None):
    """Seeded random (grid, state, kernel) triple with heterogeneous degeneracies."""
    rng = np.random.default_rng(seed)
    L = int(rng.integers(3, 9)) if L is None else L
    g = rng.uniform(0.2, g_max, size=L)
    grid = LevelGrid(tuple(range(L)), tuple(g), 1.0)
    frac = rng.uniform(0.15, 0.85) if n_frac is None else n_frac
    n_target = frac * g.sum() if statistics == "fermi" else rng.uniform(0.5, 3.0) * L
    state = random_state(grid, n_target, seed, statistics)
    kern = build_kernel(grid, RateSpec.random(seed + 10_000, 0.1, 2.0))
    return grid, state, kern


@pytest.fixture
def fermi8():
    grid = LevelGrid.uniform(8)
    return grid, random_state(grid, 4.0, 1, "fermi"), build_kernel(grid, RateSpec.random(7, 0.5, 1.5))


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
