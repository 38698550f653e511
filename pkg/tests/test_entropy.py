import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import xlogy

from conftest import make_case
from qkin.dynamics import rhs
from qkin.entropy import (
    PhiGrid,
    diagnostics,
    entropy_rate_chain,
    entropy_rate_symmetric,
    entropy_rate_weighted,
    entropy_Sq,
    n_tilde,
    phi,
    scan_phi_domain,
)
from qkin.gas import GasState, LevelGroup
from qkin.kernel import RateSpec, build_kernel
from qkin.qmath import DomainError


def classical_entropy(g, n, s):
    y = g + s * n
    return -float(np.sum(xlogy(n, n) - s * xlogy(y, y) + s * xlogy(g, g)))


def agree(a, b):
    return abs(a - b) <= max(1e-9 * max(abs(a), abs(b)), 1e-12)


class TestEntropy:
    def test_fermi_half_classical(self):
        assert entropy_Sq(GasState([1], [0], [0.5], "fermi"), 1) == pytest.approx(math.log(2), rel=1e-15)

    def test_fermi_half_q05(self):
        # -(2 * 0.5**0.5 * ln_0.5(0.5)) with ln_0.5(0.5) = 2(sqrt(0.5) - 1)
        ref = 0.8284271247461901
        assert entropy_Sq(GasState([1], [0], [0.5], "fermi"), 0.5) == pytest.approx(ref, rel=1e-14)

    @pytest.mark.parametrize("q", [0.3, 1.0, 1.7])
    def test_empty_unit_levels(self, q):
        assert entropy_Sq(GasState([1, 1, 1], [0, 1, 2], [0, 0, 0], "bose"), q) == 0

    def test_zero_occupation_at_q0_is_error(self):
        with pytest.raises(DomainError):
            entropy_Sq(GasState([1, 1], [0, 1], [0, 0.5], "fermi"), 0.0)

    @given(seed=st.integers(0, 10**6), stats=st.sampled_from(["bose", "fermi"]))
    def test_classical_matches_independent_formula(self, seed, stats):
        _, s, _ = make_case(seed, stats)
        ref = classical_entropy(s.g, s.n, s.sign)
        assert entropy_Sq(s, 1.0) == pytest.approx(ref, rel=1e-12)

    @given(seed=st.integers(0, 10**6), q=st.floats(0.05, 2.0))
    def test_matches_extended_precision(self, seed, q):
        _, s, _ = make_case(seed, "fermi", L=4)
        mpmath.mp.dps = 40
        mq = mpmath.mpf(q)

        def term(v):
            v = mpmath.mpf(float(v))
            return v**mq * (v ** (1 - mq) - 1) / (1 - mq) if mq != 1 else v * mpmath.log(v)

        ref = -sum(term(n) + term(y) - term(g) for g, n, y in zip(s.g, s.n, s.holes))
        assert entropy_Sq(s, q) == pytest.approx(float(ref), rel=1e-12, abs=1e-14)


class TestNTilde:
    def test_negative_reachable(self):
        assert n_tilde(LevelGroup(0, 100.0, 0.0, 0.0), "fermi", 0.5) == -8.0

    def test_classical_is_one(self):
        assert n_tilde(LevelGroup(0, 3.0, 0.0, 1.2), "bose", 1.0) == 1.0

    @given(q=st.floats(0, 2), stats=st.sampled_from(["bose", "fermi"]))
    def test_unit_base(self, q, stats):
        assert n_tilde(LevelGroup(0, 1.0, 0.0, 0.0), stats, q) == 1.0


class TestRates:
    def test_q0_is_exactly_zero(self, fermi8):
        _, s, k = fermi8
        assert entropy_rate_chain(s, k, 0.0) == 0.0
        assert entropy_rate_weighted(s, k, 0.0) == 0.0

    def test_zero_kernel(self, fermi8):
        grid, s, _ = fermi8
        k = build_kernel(grid, RateSpec.constant(0.0))
        for f in (entropy_rate_chain, entropy_rate_weighted, entropy_rate_symmetric):
            assert f(s, k, 1.3) == 0.0

    def test_boundary_is_error(self, fermi8):
        grid, _, k = fermi8
        s = grid.state([0.0] + [0.5] * 7, "fermi")
        with pytest.raises(DomainError):
            entropy_rate_chain(s, k, 1.0)
        d = diagnostics(s, k, 1.0)
        assert math.isnan(d.rate_chain)

    @settings(max_examples=150, deadline=None)
    @given(seed=st.integers(0, 10**6), stats=st.sampled_from(["bose", "fermi"]),
           q=st.sampled_from([0.2, 0.5, 1.0, 1.5, 1.8]))
    def test_three_forms_agree(self, seed, stats, q):
        _, s, k = make_case(seed, stats)
        a = entropy_rate_chain(s, k, q)
        b = entropy_rate_weighted(s, k, q)
        c = entropy_rate_symmetric(s, k, q)
        assert agree(a, b) and agree(a, c) and agree(b, c)

    @settings(deadline=None)
    @given(seed=st.integers(0, 10**6), stats=st.sampled_from(["bose", "fermi"]))
    def test_classical_h_theorem(self, seed, stats):
        _, s, k = make_case(seed, stats)
        assert entropy_rate_symmetric(s, k, 1.0) >= 0

    def test_factorized_state_has_zero_rate(self):
        grid, _, _ = make_case(0, "fermi", L=6)
        k = build_kernel(grid, RateSpec.constant(1.0))
        # x = exp(-(a + b*eps)) factorizes on every channel
        x = np.exp(-(0.2 + 0.6 * np.arange(6)))
        g = np.asarray(grid.g)
        s = grid.state(g * x / (1 + x), "fermi")
        assert abs(entropy_rate_symmetric(s, k, 1.0)) <= 1e-15

    @pytest.mark.parametrize("q", [1.0, 1.5])
    def test_chain_matches_central_difference(self, q):
        _, s, k = make_case(3, "fermi", L=4)
        du = rhs(s, k)
        rate = entropy_rate_chain(s, k, q, du)
        errs = []
        for h in (1e-3, 5e-4, 2.5e-4):
            plus = entropy_Sq(s.with_occupations(s.n + h * du), q)
            minus = entropy_Sq(s.with_occupations(s.n - h * du), q)
            fd = (plus - minus) / (2 * h)
            errs.append(abs(fd - rate))
        assert errs[-1] <= 1e-6 * abs(rate)
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


class TestPhi:
    def test_symmetric_point(self):
        assert phi(2.0, 3.0, 2.0, 3.0, 0.7) == 0

    def test_classical(self):
        assert phi(2, 1, 1, 1, 1.0) == pytest.approx(math.log(2), rel=1e-15)

    def test_negative_off_classical(self):
        # mpmath at 40 digits
        assert phi(4, 0.1, 1, 0.5, 0.5) == pytest.approx(-0.1218241969660581, rel=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            phi(0, 1, 1, 1, 1.0)

    @given(x=st.floats(0.01, 10), y=st.floats(0.01, 10), z=st.floats(0.01, 10), w=st.floats(0.01, 10))
    def test_nonnegative_at_classical_index(self, x, y, z, w):
        assert phi(x, y, z, w, 1.0) >= 0


class TestScan:
    def test_grid_values(self):
        v = PhiGrid(0.1, 4.0, 0.3).values()
        assert v[0] == 0.1 and v[-1] == 4.0 and v.size == 14

    def test_classical_has_no_negative_cells(self):
        r = scan_phi_domain(1.0, PhiGrid(0.1, 4.0, 0.3))
        assert r.cells_total == 14**4
        assert r.cells_negative == 0

    def test_q05_has_negative_cells(self):
        r = scan_phi_domain(0.5, PhiGrid(0.1, 4.0, 0.3))
        assert r.cells_negative > 0
        assert r.phi_min < 0
        assert phi(*r.argmin, 0.5) == pytest.approx(r.phi_min, rel=1e-12)
        assert r.negative_csv().splitlines()[0] == "x,y,z,w,phi"
        assert len(r.negative_csv().splitlines()) == r.cells_negative + 1

    def test_degenerate_grid(self):
        r = scan_phi_domain(0.5, PhiGrid(1.0, 1.0, 0.3))
        assert r.cells_total == 1 and r.phi_min == 0 and r.cells_negative == 0

    def test_summary_keys(self):
        r = scan_phi_domain(0.5, [0.5, 1.0])
        assert set(r.summary()) == {"q_star", "cells_total", "cells_negative", "phi_min", "argmin"}

    def test_scan_matches_pointwise(self):
        vals = [0.2, 0.9, 2.5]
        r = scan_phi_domain(1.4, vals)
        brute = [phi(x, y, z, w, 1.4) for x in vals for y in vals for z in vals for w in vals]
        assert r.cells_negative == sum(p < 0 for p in brute)
        assert r.phi_min == pytest.approx(min(brute), rel=1e-13)
