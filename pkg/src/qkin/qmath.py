"""Deformed logarithm/exponential and the q-algebra.

All functions accept a plain float ``q`` or a :class:`QIndex`. Scalars in,
scalars out; the array-valued twins (``ln_q_array`` etc.) are used by the
vectorized kinetic code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# |q - 1| below this selects the classical branch
Q_ONE_TOL = 1e-12
# above this |(1-q) log x| the direct power form is more accurate than expm1/log1p
_POW_SWITCH = 0.5


class DomainError(ValueError):
    """Argument outside the domain of a deformed function or a state invariant."""


@dataclass(frozen=True)
class QIndex:
    """Entropic index with its dual ``q_star = 2 - q``.

    ``exploratory=True`` lifts the ``[0, 2]`` range check (used when probing
    outside the admissible window).
    """

    q: float
    exploratory: bool = False

    def __post_init__(self):
        q = float(self.q)
        if not math.isfinite(q):
            raise DomainError(f"q must be finite, got {self.q!r}")
        if not self.exploratory and not 0.0 <= q <= 2.0:
            raise DomainError(f"q={q} outside [0, 2]")
        object.__setattr__(self, "q", q)

    @property
    def q_star(self) -> float:
        return 2.0 - self.q

    @property
    def dual(self) -> QIndex:
        return QIndex(self.q_star, exploratory=self.exploratory)

    @property
    def is_classical(self) -> bool:
        return is_classical(self.q)

    def __float__(self) -> float:
        return self.q


def as_q(q) -> float:
    return q.q if isinstance(q, QIndex) else float(q)


def is_classical(q) -> bool:
    return abs(as_q(q) - 1.0) < Q_ONE_TOL


def ln_q(x: float, q) -> float:
    """``(x**(1-q) - 1) / (1 - q)``, natural log at ``q == 1``."""
    q = as_q(q)
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"ln_q requires finite x > 0, got {x!r}")
    if is_classical(q):
        return math.log(x)
    a = 1.0 - q
    t = a * math.log(x)
    if abs(t) > _POW_SWITCH:
        return (x**a - 1.0) / a
    return math.expm1(t) / a


def exp_q(x: float, q) -> float:
    """Inverse of :func:`ln_q`: ``[1 + (1-q) x]**(1/(1-q))``.

    A nonpositive base gives 0 for ``q < 1`` and ``inf`` for ``q > 1``.
    """
    q = as_q(q)
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"exp_q requires finite x, got {x!r}")
    if is_classical(q):
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    a = 1.0 - q
    u = a * x
    if u <= -1.0:
        return 0.0 if a > 0 else math.inf
    try:
        if abs(u) > _POW_SWITCH:
            return (1.0 + u) ** (1.0 / a)
        return math.exp(math.log1p(u) / a)
    except OverflowError:
        return math.inf


def q_product(x: float, y: float, q) -> float:
    q = as_q(q)
    if x <= 0 or y <= 0:
        raise DomainError(f"q_product requires positive arguments, got {x!r}, {y!r}")
    if is_classical(q):
        return x * y
    a = 1.0 - q
    bracket = x**a + y**a - 1.0
    if bracket <= 0.0:
        return 0.0
    return bracket ** (1.0 / a)


def q_difference(x: float, y: float, q) -> float:
    q = as_q(q)
    if is_classical(q):
        return x - y
    den = 1.0 + (1.0 - q) * y
    if den == 0.0:
        raise DomainError(f"q_difference undefined at y = 1/(q-1) = {y!r}")
    return (x - y) / den


def weighted_qlog(f: float, q) -> float:
    """``f**(q-1) * ln_q(f)``, evaluated as ``ln_{2-q}(f)``."""
    if not f > 0:
        raise DomainError(f"weighted_qlog requires f > 0, got {f!r}")
    return ln_q(f, 2.0 - as_q(q))


# -- array forms -----------------------------------------------------------

def ln_q_array(x, q) -> np.ndarray:
    """Elementwise ``ln_q``; the caller guarantees ``x > 0``."""
    q = as_q(q)
    x = np.asarray(x, dtype=float)
    if is_classical(q):
        return np.log(x)
    a = 1.0 - q
    t = a * np.log(x)
    with np.errstate(over="ignore"):
        return np.where(np.abs(t) > _POW_SWITCH, (x**a - 1.0) / a, np.expm1(t) / a)


def exp_q_array(x, q) -> np.ndarray:
    q = as_q(q)
    x = np.asarray(x, dtype=float)
    if is_classical(q):
        with np.errstate(over="ignore"):
            return np.exp(x)
    a = 1.0 - q
    u = np.atleast_1d(a * x)
    out = np.empty_like(u)
    ok = u > -1.0
    big = ok & (np.abs(u) > _POW_SWITCH)
    small = ok & ~big
    with np.errstate(over="ignore"):
        out[big] = (1.0 + u[big]) ** (1.0 / a)
        out[small] = np.exp(np.log1p(u[small]) / a)
    out[~ok] = 0.0 if a > 0 else np.inf
    return out.reshape(np.shape(x))
