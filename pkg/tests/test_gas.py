from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkin.gas import (
    GasState,
    LevelGrid,
    LevelGroup,
    Statistics,
    moments,
    occupancy_ratio,
    random_state,
    state_from_csv,
    state_to_csv,
)
from qkin.qmath import DomainError


def test_statistics_sign():
    assert Statistics.BOSE.sign == 1
    assert Statistics.FERMI.sign == -1
    assert Statistics.parse("Fermi") is Statistics.FERMI


class TestOccupancyRatio:
    def test_empty(self):
        assert occupancy_ratio(LevelGroup(0, 4.0, 0.0, 0.0), "bose") == 0

    def test_fermi_half(self):
        assert occupancy_ratio(LevelGroup(0, 1.0, 0.0, 0.5), "fermi") == 1.0

    def test_bose(self):
        assert occupancy_ratio(LevelGroup(0, 1.0, 0.0, 1.0), "bose") == 0.5

    def test_saturated_fermi_is_error(self):
        with pytest.raises(DomainError):
            occupancy_ratio(LevelGroup(0, 1.0, 0.0, 1.0), "fermi")

    @given(g=st.floats(0.01, 100))
    def test_fermi_half_filling_is_one(self, g):
        assert occupancy_ratio(LevelGroup(0, g, 0.0, g / 2), "fermi") == 1.0

    @given(g=st.floats(0.1, 10), a=st.floats(0, 0.999), b=st.floats(0, 0.999),
           stats=st.sampled_from(["bose", "fermi"]))
    def test_increasing_in_n(self, g, a, b, stats):
        lo, hi = sorted((a * g, b * g))
        if hi - lo < 1e-9 * g:
            return
        assert occupancy_ratio(LevelGroup(0, g, 0, lo), stats) < occupancy_ratio(LevelGroup(0, g, 0, hi), stats)


class TestState:
    def test_invariants(self):
        with pytest.raises(DomainError):
            GasState([1.0], [0.0], [1.5], "fermi")
        with pytest.raises(DomainError):
            GasState([1.0], [0.0], [-0.1], "bose")
        with pytest.raises(DomainError):
            GasState([0.0], [0.0], [0.0], "bose")

    def test_immutable(self):
        s = GasState([1.0], [0.0], [0.5], "fermi")
        with pytest.raises(AttributeError):
            s.n = np.array([0.2])
        with pytest.raises(ValueError):
            s.n[0] = 0.2

    def test_from_levels_requires_contiguous_indices(self):
        with pytest.raises(DomainError):
            GasState.from_levels([LevelGroup(1, 1.0, 0.0, 0.5)], "fermi")

    def test_csv_roundtrip(self):
        s = random_state(LevelGrid.uniform(5, 1.5), 3.0, 4, "fermi")
        text = state_to_csv(s)
        assert text.splitlines()[0] == "kappa,g,epsilon,n"
        assert state_from_csv(text, "fermi") == s

    def test_csv_bad_header(self):
        with pytest.raises(ValueError):
            state_from_csv("k,g,e,n\n0,1,0,0.5\n", "fermi")


class TestMoments:
    def test_empty(self):
        assert moments(GasState([], [], [], "bose")) == (0, 0)

    def test_hand_sum(self):
        assert moments(GasState([5, 5], [0, 3], [1, 2], "bose")) == (3, 6)

    def test_against_exact_rational_sum(self):
        rng = np.random.default_rng(64)
        g = rng.uniform(1, 10, 64)
        n = g * rng.uniform(0, 1, 64)
        eps = rng.uniform(0, 100, 64)
        s = GasState(g, eps, n, "fermi")
        N_ref = float(sum(Fraction(v) for v in n))
        E_ref = float(sum(Fraction(a) * Fraction(b) for a, b in zip(n, eps)))
        N, E = moments(s)
        assert abs(N - N_ref) <= 1e-14 * N_ref
        assert abs(E - E_ref) <= 1e-14 * E_ref

    @given(seed=st.integers(0, 2**32 - 1))
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        g = rng.uniform(1, 3, 12)
        n, eps = g * rng.uniform(0, 1, 12), rng.uniform(0, 5, 12)
        p = rng.permutation(12)
        assert moments(GasState(g, eps, n, "fermi")) == moments(GasState(g[p], eps[p], n[p], "fermi"))


class TestRandomState:
    def test_saturation_is_infeasible(self):
        with pytest.raises(DomainError):
            random_state(LevelGrid.uniform(4, 1.0), 4.0, 0, "fermi")

    def test_deterministic(self):
        grid = LevelGrid.uniform(6, 2.0)
        assert random_state(grid, 5.0, 9, "bose") == random_state(grid, 5.0, 9, "bose")

    def test_seed_matters(self):
        grid = LevelGrid.uniform(6, 2.0)
        assert random_state(grid, 5.0, 9, "bose") != random_state(grid, 5.0, 10, "bose")

    def test_fermi_interior_and_sum(self):
        s = random_state(LevelGrid.uniform(8, 1.0), 4.0, 1, "fermi")
        assert np.all(s.n > 0) and np.all(s.n < s.g)
        assert abs(s.n.sum() - 4.0) <= 1e-12 * 4.0

    @given(seed=st.integers(0, 10**6), frac=st.floats(0.01, 0.99),
           stats=st.sampled_from(["bose", "fermi"]))
    def test_interior_margin_and_sum(self, seed, frac, stats):
        grid = LevelGrid((0, 1, 2, 3, 5), (0.5, 1.0, 2.0, 1.5, 1.0))
        target = frac * sum(grid.degeneracy)
        s = random_state(grid, target, seed, stats)
        assert np.all(s.n >= 1e-3 * s.g * (1 - 1e-9))
        if stats == "fermi":
            assert np.all(s.n <= s.g * (1 - 1e-3 * (1 - 1e-9)))
        assert abs(s.n.sum() - target) <= 1e-12 * target
