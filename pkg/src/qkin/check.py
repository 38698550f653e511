"""Fast embedded invariant suite behind ``qkin check``.

Functions are looked up through their modules at call time so that a
patched implementation is what gets checked.
"""
from __future__ import annotations

import math
import time

import numpy as np

from . import dynamics, entropy, equilibrium, gas, kernel, qmath

Q_GRID = (0.0, 0.2, 0.5, 0.8, 0.999, 1.0, 1.001, 1.2, 1.5, 1.8, 2.0)
X_GRID = np.geomspace(1e-6, 1e6, 61)


def roundtrip_condition(x, q) -> float:
    """Amplification of a rounding in ``ln_q(x)`` by ``exp_q``: ``x**(q-1) |ln_q x|``."""
    return x ** (q - 1.0) * abs(qmath.ln_q(x, q))


def check_inverse_pair():
    worst = 0.0
    for q in Q_GRID:
        for x in X_GRID:
            y = qmath.ln_q(x, q)
            if 1.0 + (1.0 - q) * y <= 0:
                continue
            back = qmath.exp_q(y, q)
            worst = max(worst, abs(back - x) / (math.ulp(x) * (1.0 + roundtrip_condition(x, q))))
    return worst <= 8, f"max |exp_q(ln_q x) - x| = {worst:.2f} conditioned ulp"


def check_pseudo_additivity():
    worst = 0.0
    xs = np.geomspace(0.01, 100, 9)
    for q in Q_GRID:
        for x in xs:
            for y in xs:
                lx, ly = qmath.ln_q(x, q), qmath.ln_q(y, q)
                lhs = qmath.ln_q(x * y, q)
                cross = (1 - q) * lx * ly
                # relative to the term magnitudes: x*y near 1 makes lhs itself ~0
                scale = max(abs(lhs), abs(lx) + abs(ly) + abs(cross))
                if scale:
                    worst = max(worst, abs(lhs - (lx + ly + cross)) / scale)
    return worst <= 1e-12, f"max rel err {worst:.2e}"


def check_q_product():
    worst = 0.0
    xs = np.geomspace(0.1, 10, 7)
    for q in Q_GRID:
        for x in xs:
            for y in xs:
                p = qmath.q_product(x, y, q)
                if p <= 0:
                    continue
                lhs = qmath.ln_q(p, q)
                rhs = qmath.ln_q(x, q) + qmath.ln_q(y, q)
                worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1.0))
    return worst <= 1e-12, f"max rel err {worst:.2e}"


def check_duality():
    worst = 0.0
    for q in Q_GRID:
        for f in np.geomspace(1e-3, 1e3, 13):
            direct = f ** (q - 1) * qmath.ln_q(f, q)
            worst = max(worst, abs(qmath.weighted_qlog(f, q) - direct) / max(abs(direct), 1e-300))
    return worst <= 1e-12, f"max rel err {worst:.2e}"


def _case(statistics="fermi", L=6, seed=11):
    lv = gas.LevelGrid.uniform(L, degeneracy=1.5)
    st = gas.random_state(lv, 0.4 * 1.5 * L if statistics == "fermi" else 3.0, seed, statistics)
    kern = kernel.build_kernel(lv, kernel.RateSpec.random(seed + 1, 0.5, 1.5))
    return lv, st, kern


def check_rate_agreement():
    worst = 0.0
    for stats in ("fermi", "bose"):
        _, st, kern = _case(stats)
        for q in (0.2, 0.5, 1.0, 1.5, 1.8):
            a = entropy.entropy_rate_chain(st, kern, q)
            b = entropy.entropy_rate_weighted(st, kern, q)
            c = entropy.entropy_rate_symmetric(st, kern, q)
            scale = max(abs(a), abs(b), abs(c), 1e-3)
            worst = max(worst, abs(a - b) / scale, abs(a - c) / scale)
    return worst <= 1e-9, f"max pairwise rel diff {worst:.2e}"


def check_conservation():
    worst = 0.0
    for stats in ("fermi", "bose"):
        _, st, kern = _case(stats)
        du = dynamics.rhs(st, kern)
        total = math.fsum(np.abs(du)) or 1.0
        worst = max(worst, abs(math.fsum(du)) / total, abs(math.fsum(st.epsilon * du)) / total)
        N0, E0 = gas.moments(st)
        s = st
        for _ in range(100):
            s, _, _ = dynamics.step(s, kern, 1e-3)
        N1, E1 = gas.moments(s)
        worst = max(worst, abs(N1 - N0) / N0, abs(E1 - E0) / max(E0, 1.0))
    return worst <= 1e-12, f"max relative drift {worst:.2e}"


def check_fixed_point():
    lv = gas.LevelGrid.uniform(6)
    p = equilibrium.EquilibriumParams(-0.3, 0.7)
    st = equilibrium.equilibrium_state(lv, p, 1.0, "fermi")
    kern = kernel.build_kernel(lv, kernel.RateSpec.constant(1.0))
    m = float(np.max(np.abs(dynamics.rhs(st, kern))))
    return m <= 1e-12, f"max |dn/dt| at FD state {m:.2e}"


CHECKS = (
    ("qmath inverse pair", check_inverse_pair),
    ("qmath pseudo-additivity", check_pseudo_additivity),
    ("qmath q-product homomorphism", check_q_product),
    ("qmath duality transform", check_duality),
    ("three-way entropy-rate agreement", check_rate_agreement),
    ("N/E conservation (100 RK4 steps)", check_conservation),
    ("FD state is a fixed point", check_fixed_point),
)


def run_checks(out=None) -> bool:
    """Run every check, print a pass/fail table, return overall success."""
    ok_all = True
    rows = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append((name, ok, detail, time.perf_counter() - t0))
        ok_all &= bool(ok)
    width = max(len(r[0]) for r in rows)
    for name, ok, detail, dt in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}  ({dt:.2f}s)", file=out)
    return ok_all
