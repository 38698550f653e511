"""Collision master equation and its RK4 integrator."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import entropy
from .gas import GasState, Statistics, moments
from .kernel import CollisionKernel
from .qmath import DomainError, as_q


class StepBudgetExhausted(RuntimeError):
    """Every halving of the step still produced an invalid state."""


def channel_flux(state: GasState, kernel: CollisionKernel) -> np.ndarray:
    """Net forward collisions per unit time on each channel."""
    n, y = state.n, state.holes
    a, b, c, d = kernel.a, kernel.b, kernel.c, kernel.d
    return kernel.rate * (n[a] * n[b] * y[c] * y[d] - n[c] * n[d] * y[a] * y[b])


def rhs(state: GasState, kernel: CollisionKernel) -> np.ndarray:
    """``dn/dt`` for every level.

    A level appearing twice in a pair (``k == l``) receives the channel flux
    twice; this keeps particle number and energy exactly conserved.
    """
    if kernel.level_count != len(state):
        raise DomainError(f"kernel has {kernel.level_count} levels, state has {len(state)}")
    L = len(state)
    if len(kernel) == 0:
        return np.zeros(L)
    F = channel_flux(state, kernel)
    # bincount sums in index order, so the reduction is deterministic
    idx = np.concatenate([kernel.a, kernel.b, kernel.c, kernel.d])
    w = np.concatenate([-F, -F, F, F])
    return np.bincount(idx, weights=w, minlength=L)


def _valid(n: np.ndarray, g: np.ndarray, statistics: Statistics) -> bool:
    if not np.all(np.isfinite(n)) or np.any(n < 0):
        return False
    return bool(np.all(g + statistics.sign * n > 0))


def _rk4(state: GasState, kernel: CollisionKernel, dt: float, k1=None) -> np.ndarray:
    n0 = state.n
    if k1 is None:
        k1 = rhs(state, kernel)

    def at(n):
        return rhs(state.with_occupations(n, validate=False), kernel)

    k2 = at(n0 + 0.5 * dt * k1)
    k3 = at(n0 + 0.5 * dt * k2)
    k4 = at(n0 + dt * k3)
    return n0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(
    state: GasState,
    kernel: CollisionKernel,
    dt: float,
    max_halvings: int = 30,
    *,
    k1=None,
) -> tuple[GasState, float, int]:
    """One RK4 step, halving ``dt`` while the result leaves the state domain.

    Returns ``(new_state, dt_taken, rejections)``.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    h = float(dt)
    for rejections in range(max_halvings + 1):
        n1 = _rk4(state, kernel, h, k1)
        if _valid(n1, state.g, state.statistics):
            return state.with_occupations(n1, validate=False), h, rejections
        h *= 0.5
    raise StepBudgetExhausted(
        f"step rejected {max_halvings + 1} times (smallest dt tried {2 * h:g})"
    )


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    sample_every: int = 1
    max_halvings: int = 30
    converge_tol: float = 1e-12
    converge_samples: int = 10

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError("dt must be positive")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise DomainError("t_end must be nonnegative")
        if not (isinstance(self.sample_every, int) and self.sample_every >= 1):
            raise DomainError("sample_every must be an integer >= 1")
        if not (isinstance(self.max_halvings, int) and 0 <= self.max_halvings <= 60):
            raise DomainError("max_halvings must be an integer in [0, 60]")
        if not self.converge_samples >= 1:
            raise DomainError("converge_samples must be >= 1")


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    n: np.ndarray
    S_q: float
    rate_chain: float
    rate_weighted: float
    rate_symmetric: float
    N: float
    E: float
    min_n_tilde: float
    neg_phi_count: int
    rejections: int
    max_abs_dndt: float


@dataclass
class Trajectory:
    records: list[TimeSeriesRecord] = field(default_factory=list)
    converged: bool = False
    steps: int = 0
    rejections: int = 0
    final_state: GasState | None = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self) -> str:
        L = self.records[0].n.size if self.records else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(trajectory_header(L))
        for r in self.records:
            w.writerow(
                [repr(float(v)) for v in (
                    r.t, r.S_q, r.rate_chain, r.rate_weighted, r.rate_symmetric,
                    r.N, r.E, r.min_n_tilde,
                )]
                + [str(r.neg_phi_count)]
                + [repr(float(v)) for v in r.n]
            )
        return buf.getvalue()


def trajectory_header(level_count: int) -> list[str]:
    return [
        "t", "S_q", "rate_chain", "rate_weighted", "rate_symmetric",
        "N", "E", "min_n_tilde", "neg_phi_count",
    ] + [f"n_{k}" for k in range(level_count)]


def _record(t, state, kernel, q, dndt, rejections) -> TimeSeriesRecord:
    diag = entropy.diagnostics(state, kernel, q, dndt)
    N, E = moments(state)
    return TimeSeriesRecord(
        t=t,
        n=state.n.copy(),
        S_q=diag.S_q,
        rate_chain=diag.rate_chain,
        rate_weighted=diag.rate_weighted,
        rate_symmetric=diag.rate_symmetric,
        N=N,
        E=E,
        min_n_tilde=diag.min_n_tilde,
        neg_phi_count=diag.negative_phi_channels,
        rejections=rejections,
        max_abs_dndt=float(np.max(np.abs(dndt))) if dndt.size else 0.0,
    )


def run(initial: GasState, kernel: CollisionKernel, q, config: IntegratorConfig, progress=None) -> Trajectory:
    """Integrate to ``config.t_end``, recording diagnostics every ``sample_every`` steps.

    Stops early, with ``converged=True``, once ``max|dn/dt|`` stays below
    ``converge_tol`` for ``converge_samples`` consecutive samples. ``progress``
    is called with each new record.
    """
    q = as_q(q)
    traj = Trajectory()
    state = initial
    t = 0.0
    k1 = rhs(state, kernel)
    traj.records.append(_record(t, state, kernel, q, k1, 0))
    quiet = 1 if traj.records[0].max_abs_dndt < config.converge_tol else 0
    steps_since = 0
    while t < config.t_end:
        remaining = config.t_end - t
        h = config.dt if config.dt < remaining else remaining
        state, taken, rej = step(state, kernel, h, config.max_halvings, k1=k1)
        traj.rejections += rej
        traj.steps += 1
        # land exactly on t_end after the shortened final step
        t = config.t_end if taken == remaining else t + taken
        k1 = rhs(state, kernel)
        steps_since += 1
        if steps_since == config.sample_every or t >= config.t_end:
            steps_since = 0
            rec = _record(t, state, kernel, q, k1, traj.rejections)
            traj.records.append(rec)
            if progress is not None:
                progress(rec)
            quiet = quiet + 1 if rec.max_abs_dndt < config.converge_tol else 0
            if quiet >= config.converge_samples:
                traj.converged = True
                break
    traj.final_state = state
    return traj
