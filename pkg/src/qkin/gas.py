"""Spatially homogeneous quantum gas: level groups, occupations, statistics."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import brentq

from .qmath import DomainError

DEFAULT_MARGIN = 1e-3


class Statistics(enum.Enum):
    BOSE = "bose"
    FERMI = "fermi"

    @property
    def sign(self) -> int:
        return 1 if self is Statistics.BOSE else -1

    @classmethod
    def parse(cls, value) -> Statistics:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"statistics must be 'bose' or 'fermi', got {value!r}") from None


@dataclass(frozen=True)
class LevelGroup:
    index: int
    g: float
    epsilon: float
    n: float


def _check_levels(g, eps, n, statistics: Statistics) -> None:
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(eps)) and np.all(np.isfinite(n))):
        raise DomainError("level data must be finite")
    if np.any(g <= 0):
        raise DomainError("degeneracies must be positive")
    if np.any(eps < 0):
        raise DomainError("energies must be nonnegative")
    if np.any(n < 0):
        raise DomainError("occupations must be nonnegative")
    if statistics is Statistics.FERMI and np.any(n > g):
        raise DomainError("Fermi occupation exceeds degeneracy")


class GasState:
    """Immutable snapshot of occupations ``n`` over groups ``(g, epsilon)``.

    Arrays are copied and frozen on construction. Fermi states may sit on
    the saturation boundary ``n == g``; rate formulas reject such states
    themselves.
    """

    __slots__ = ("g", "epsilon", "n", "statistics")

    def __init__(self, g, epsilon, n, statistics, *, validate: bool = True):
        statistics = Statistics.parse(statistics)
        g = np.array(g, dtype=float).reshape(-1)
        epsilon = np.array(epsilon, dtype=float).reshape(-1)
        n = np.array(n, dtype=float).reshape(-1)
        if not (g.shape == epsilon.shape == n.shape):
            raise DomainError("g, epsilon and n must have equal length")
        if validate:
            _check_levels(g, epsilon, n, statistics)
        for a in (g, epsilon, n):
            a.flags.writeable = False
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "epsilon", epsilon)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "statistics", statistics)

    def __setattr__(self, name, value):
        raise AttributeError("GasState is immutable")

    def __len__(self) -> int:
        return self.n.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, GasState):
            return NotImplemented
        return (
            self.statistics is other.statistics
            and np.array_equal(self.g, other.g)
            and np.array_equal(self.epsilon, other.epsilon)
            and np.array_equal(self.n, other.n)
        )

    def __repr__(self) -> str:
        return f"GasState({self.statistics.value}, L={len(self)}, n={self.n.tolist()})"

    @property
    def sign(self) -> int:
        return self.statistics.sign

    @property
    def holes(self) -> np.ndarray:
        """``g + s*n`` per level."""
        return self.g + self.sign * self.n

    @property
    def levels(self) -> tuple[LevelGroup, ...]:
        return tuple(
            LevelGroup(k, float(g), float(e), float(n))
            for k, (g, e, n) in enumerate(zip(self.g, self.epsilon, self.n))
        )

    def with_occupations(self, n, *, validate: bool = True) -> GasState:
        return GasState(self.g, self.epsilon, n, self.statistics, validate=validate)

    @classmethod
    def from_levels(cls, levels: Iterable[LevelGroup], statistics) -> GasState:
        levels = list(levels)
        if [lv.index for lv in levels] != list(range(len(levels))):
            raise DomainError("level indices must be 0..L-1 in order")
        return cls(
            [lv.g for lv in levels],
            [lv.epsilon for lv in levels],
            [lv.n for lv in levels],
            statistics,
        )

    def is_interior(self) -> bool:
        return bool(np.all(self.n > 0) and np.all(self.holes > 0))


def occupancy_ratio(level: LevelGroup, statistics) -> float:
    """``n / (g + s*n)``."""
    s = Statistics.parse(statistics).sign
    den = level.g + s * level.n
    if den <= 0:
        raise DomainError(f"g + s*n = {den} is not positive")
    return level.n / den


def occupancy_ratios(state: GasState) -> np.ndarray:
    return state.n / state.holes


def moments(state: GasState) -> tuple[float, float]:
    """Particle number and energy, with compensated summation."""
    return math.fsum(state.n), math.fsum(state.n * state.epsilon)


@dataclass(frozen=True)
class LevelGrid:
    """Energy groups on an integer lattice: ``epsilon_k = lattice[k] * spacing``."""

    lattice: tuple[int, ...]
    degeneracy: tuple[float, ...]
    spacing: float = 1.0

    def __post_init__(self):
        lattice = tuple(int(k) for k in self.lattice)
        if any(k < 0 for k in lattice):
            raise DomainError("lattice values must be nonnegative integers")
        deg = self.degeneracy
        if isinstance(deg, (int, float)):
            deg = (float(deg),) * len(lattice)
        deg = tuple(float(x) for x in deg)
        if len(deg) != len(lattice):
            raise DomainError("degeneracy list length must equal level count")
        if any(not (x > 0 and math.isfinite(x)) for x in deg):
            raise DomainError("degeneracies must be positive and finite")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise DomainError("spacing must be positive")
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "degeneracy", deg)
        object.__setattr__(self, "spacing", float(self.spacing))

    @classmethod
    def uniform(cls, count: int, degeneracy=1.0, spacing: float = 1.0) -> LevelGrid:
        return cls(tuple(range(count)), degeneracy, spacing)

    def __len__(self) -> int:
        return len(self.lattice)

    @property
    def g(self) -> np.ndarray:
        return np.array(self.degeneracy, dtype=float)

    @property
    def energies(self) -> np.ndarray:
        return np.array(self.lattice, dtype=float) * self.spacing

    def state(self, n, statistics) -> GasState:
        return GasState(self.g, self.energies, n, statistics)


def _logistic(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def random_state(
    levels: LevelGrid,
    n_target: float,
    seed: int,
    statistics,
    *,
    margin: float = DEFAULT_MARGIN,
) -> GasState:
    """Seeded interior state with ``sum(n) == n_target``.

    Occupations stay at least ``margin * g`` away from 0 (and from ``g`` for
    fermions). Draws use ``numpy.random.default_rng(seed)``.
    """
    statistics = Statistics.parse(statistics)
    g = levels.g
    lo = margin * g
    if not n_target > 0:
        raise DomainError("n_target must be positive")
    rng = np.random.default_rng(seed)
    if statistics is Statistics.FERMI:
        hi = g - margin * g
        if not math.fsum(lo) < n_target < math.fsum(hi):
            raise DomainError(
                f"n_target={n_target} infeasible for Fermi levels "
                f"(interior range ({math.fsum(lo)}, {math.fsum(hi)}))"
            )
        u = rng.uniform(0.05, 0.95, size=len(levels))
        logit = np.log(u / (1.0 - u))

        def excess(c):
            return math.fsum(lo + (hi - lo) * _logistic(logit + c)) - n_target

        c = brentq(excess, -60.0, 60.0, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
        n = lo + (hi - lo) * _logistic(logit + c)
    else:
        free = n_target - math.fsum(lo)
        if not free > 0:
            raise DomainError(f"n_target={n_target} below the interior minimum {math.fsum(lo)}")
        w = rng.uniform(0.05, 1.0, size=len(levels))
        n = lo + w * (free / math.fsum(w))
    # fold the residual into the largest-slack level so the sum is exact to rounding
    resid = n_target - math.fsum(n)
    k = int(np.argmax(np.minimum(n - lo, (g - n) if statistics is Statistics.FERMI else np.inf)))
    n[k] += resid
    return GasState(g, levels.energies, n, statistics)


# -- CSV ---------------------------------------------------------------------

STATE_HEADER = ("kappa", "g", "epsilon", "n")


def state_to_csv(state: GasState) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATE_HEADER)
    for lv in state.levels:
        w.writerow([lv.index, repr(lv.g), repr(lv.epsilon), repr(lv.n)])
    return buf.getvalue()


def state_from_csv(text: str, statistics) -> GasState:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(h.strip() for h in rows[0]) != STATE_HEADER:
        raise ValueError(f"state CSV header must be {','.join(STATE_HEADER)}")
    levels = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            k, g, e, n = row
            levels.append(LevelGroup(int(k), float(g), float(e), float(n)))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return GasState.from_levels(levels, statistics)
