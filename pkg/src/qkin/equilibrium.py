"""Stationary q-deformed Fermi-Dirac / Bose-Einstein occupations.

Occupations solve ``ln_{q*}(n / (g + s*n)) + alpha + beta*eps = 0`` exactly:
with ``r = exp_{q*}(-(alpha + beta*eps))`` the occupancy ratio equals ``r``
and ``n = g*r / (1 - s*r)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gas import GasState, LevelGrid, Statistics
from .kernel import CollisionKernel
from .qmath import DomainError, as_q, exp_q, exp_q_array, ln_q_array


class InfeasibleTargets(DomainError):
    """No equilibrium of the requested form carries the given (N, E)."""


class SolverDidNotConverge(RuntimeError):
    pass


@dataclass(frozen=True)
class EquilibriumParams:
    alpha: float
    beta: float


def occupation_q(g: float, epsilon: float, params: EquilibriumParams, q, statistics) -> float:
    s = Statistics.parse(statistics).sign
    r = exp_q(-(params.alpha + params.beta * epsilon), 2.0 - as_q(q))
    if s > 0:
        if r >= 1.0:
            raise DomainError(
                f"Bose occupancy ratio {r} >= 1 at epsilon={epsilon}: outside the model range"
            )
        return g * r / (1.0 - r)
    if math.isinf(r):
        return float(g)
    return g * r / (1.0 + r)


def occupations(
    g, epsilon, params: EquilibriumParams, q, statistics, *, strict: bool = True
) -> np.ndarray:
    """Vectorized :func:`occupation_q`.

    With ``strict=False`` a Bose ratio ``r >= 1`` yields ``inf`` instead of
    raising (used by the root finder to mark the forbidden side).
    """
    s = Statistics.parse(statistics).sign
    g = np.asarray(g, dtype=float)
    u = params.alpha + params.beta * np.asarray(epsilon, dtype=float)
    r = exp_q_array(-u, 2.0 - as_q(q))
    if s > 0:
        bad = r >= 1.0
        if strict and np.any(bad):
            raise DomainError("Bose occupancy ratio >= 1: outside the model range")
        with np.errstate(divide="ignore", invalid="ignore"):
            n = g * r / (1.0 - r)
        n[bad] = np.inf
        return n
    n = np.where(np.isinf(r), g, 0.0)
    fin = np.isfinite(r)
    n[fin] = g[fin] * r[fin] / (1.0 + r[fin])
    return n


def equilibrium_state(levels: LevelGrid, params: EquilibriumParams, q, statistics) -> GasState:
    return levels.state(occupations(levels.g, levels.energies, params, q, statistics), statistics)


# -- constraint solver -------------------------------------------------------

def _energy_bounds(g, eps, n_target, statistics: Statistics) -> tuple[float, float]:
    if statistics is Statistics.BOSE:
        return n_target * eps.min(), n_target * eps.max()

    def fill(order):
        left, e = n_target, []
        for k in order:
            take = min(g[k], left)
            e.append(take * eps[k])
            left -= take
        return math.fsum(e)

    order = np.argsort(eps, kind="stable")
    return fill(order), fill(order[::-1])


class _Moments:
    def __init__(self, g, eps, q, statistics):
        self.g, self.eps, self.q, self.statistics = g, eps, q, statistics

    def __call__(self, alpha, beta) -> tuple[float, float]:
        n = occupations(self.g, self.eps, EquilibriumParams(alpha, beta), self.q, self.statistics, strict=False)
        if not np.all(np.isfinite(n)):
            return math.inf, math.inf
        return math.fsum(n), math.fsum(n * self.eps)


def _bisect(f, lo, hi, max_iter=400):
    """Root of a decreasing ``f`` with ``f(lo) > 0 > f(hi)``, to the last bit."""
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _solve_alpha(mom: _Moments, beta, n_target) -> float:
    def f(a):
        return mom(a, beta)[0] - n_target

    if mom.statistics is Statistics.BOSE:
        # every level needs alpha + beta*eps > 0
        lo = float(np.max(-beta * mom.eps))
        width = 1.0
        while f(lo + width) < 0:
            width *= 0.5
            if width < 1e-300:
                raise InfeasibleTargets("cannot place enough bosons below condensation")
        lo_ok = lo + width
        hi = lo_ok + 1.0
        while f(hi) > 0:
            hi = lo_ok + 2.0 * (hi - lo_ok)
            if hi > 1e300:
                raise SolverDidNotConverge("alpha bracket overflow")
        return _bisect(f, lo_ok, hi)
    lo, hi = -1.0, 1.0
    while f(lo) < 0:
        lo *= 2.0
        if lo < -1e300:
            raise SolverDidNotConverge("alpha bracket overflow")
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise SolverDidNotConverge("alpha bracket overflow")
    return _bisect(f, lo, hi)


def _nested(mom: _Moments, n_target, e_target, scale) -> EquilibriumParams:
    def f(beta):
        a = _solve_alpha(mom, beta, n_target)
        return mom(a, beta)[1] - e_target

    b = 1.0 / scale
    lo, hi = -b, b
    while f(lo) < 0:
        lo *= 2.0
        if lo < -1e12 / scale:
            raise SolverDidNotConverge("beta bracket overflow (target too close to E_max)")
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e12 / scale:
            raise SolverDidNotConverge("beta bracket overflow (target too close to E_min)")
    beta = _bisect(f, lo, hi)
    return EquilibriumParams(_solve_alpha(mom, beta, n_target), beta)


def _residual(mom, p, n_target, e_target, e_scale):
    N, E = mom(*p)
    return np.array([(N - n_target) / n_target, (E - e_target) / e_scale])


def _newton(mom, start, n_target, e_target, e_scale, tol, max_iter=60):
    p = np.array(start, dtype=float)
    r = _residual(mom, p, n_target, e_target, e_scale)
    if not np.all(np.isfinite(r)):
        return None
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            return p
        J = np.empty((2, 2))
        for j in range(2):
            h = 1e-7 * max(1.0, abs(p[j]))
            dp = p.copy()
            dp[j] += h
            rj = _residual(mom, dp, n_target, e_target, e_scale)
            if not np.all(np.isfinite(rj)):
                return None
            J[:, j] = (rj - r) / h
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        norm = np.max(np.abs(r))
        while lam > 1e-6:
            trial = p + lam * delta
            rt = _residual(mom, trial, n_target, e_target, e_scale)
            if np.all(np.isfinite(rt)) and np.max(np.abs(rt)) < norm:
                p, r = trial, rt
                break
            lam *= 0.5
        else:
            return None
    return p if np.max(np.abs(r)) <= tol else None


def solve_params(
    n_target: float,
    e_target: float,
    levels: LevelGrid,
    q,
    statistics,
    *,
    initial: EquilibriumParams | None = None,
    rtol: float = 1e-10,
) -> EquilibriumParams:
    """Find ``(alpha, beta)`` whose occupations carry ``(n_target, e_target)``.

    Damped Newton from ``initial`` (default ``alpha=0, beta=1/mean(eps)``),
    falling back to nested bisection: outer on ``beta``, inner on ``alpha``.
    """
    statistics = Statistics.parse(statistics)
    q = as_q(q)
    g, eps = levels.g, levels.energies
    if not (n_target > 0 and math.isfinite(n_target)):
        raise InfeasibleTargets(f"N_target must be positive, got {n_target}")
    if statistics is Statistics.FERMI and not n_target < math.fsum(g):
        raise InfeasibleTargets(f"N_target={n_target} saturates the Fermi levels (sum g = {math.fsum(g)})")
    e_lo, e_hi = _energy_bounds(g, eps, n_target, statistics)
    mom = _Moments(g, eps, q, statistics)
    if eps.max() == eps.min():
        if not math.isclose(e_target, e_lo, rel_tol=rtol, abs_tol=1e-300):
            raise InfeasibleTargets(f"all levels share one energy; E must equal {e_lo}")
        return EquilibriumParams(_solve_alpha(mom, 0.0, n_target), 0.0)
    if not e_lo < e_target < e_hi:
        raise InfeasibleTargets(f"E_target={e_target} outside the open range ({e_lo}, {e_hi})")

    scale = float(np.mean(eps)) or float(eps.max())
    e_scale = abs(e_target) if e_target != 0 else n_target * scale
    if initial is None:
        initial = EquilibriumParams(0.0, 1.0 / scale)
    p = _newton(mom, (initial.alpha, initial.beta), n_target, e_target, e_scale, tol=1e-13)
    if p is not None:
        return _checked(mom, EquilibriumParams(float(p[0]), float(p[1])), n_target, e_target, e_scale, rtol)
    params = _nested(mom, n_target, e_target, scale)
    return _checked(mom, params, n_target, e_target, e_scale, rtol)


def _checked(mom, params, n_target, e_target, e_scale, rtol) -> EquilibriumParams:
    N, E = mom(params.alpha, params.beta)
    if not (abs(N - n_target) <= rtol * n_target and abs(E - e_target) <= rtol * e_scale):
        raise SolverDidNotConverge(
            f"solver stalled at alpha={params.alpha}, beta={params.beta}: N={N}, E={E}"
        )
    return params


def stationarity_residuals(state: GasState, kernel: CollisionKernel, q) -> tuple[float, float]:
    """Channel-wise violation of the product and q-log-sum equilibrium conditions."""
    if not state.is_interior():
        raise DomainError("stationarity residuals need strictly interior occupations")
    if len(kernel) == 0:
        return 0.0, 0.0
    x = state.n / state.holes
    lx = ln_q_array(x, 2.0 - as_q(q))
    a, b, c, d = kernel.a, kernel.b, kernel.c, kernel.d
    res_product = float(np.max(np.abs(x[a] * x[b] - x[c] * x[d])))
    res_qsum = float(np.max(np.abs(lx[a] + lx[b] - lx[c] - lx[d])))
    return res_product, res_qsum
