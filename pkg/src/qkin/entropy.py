"""Nonextensive quantum entropy, its production rate, and the phi scanner.

The production rate is computed three ways:

* ``entropy_rate_chain``: chain rule through ``dn/dt``, per level;
* ``entropy_rate_weighted``: per level, via the q-logarithm of the
  occupancy ratio times the q-difference weight;
* ``entropy_rate_symmetric``: per collision channel, symmetrized over a
  channel and its inverse.

They agree to rounding for any interior state.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import dynamics
from .gas import GasState, LevelGroup, Statistics
from .kernel import CollisionKernel
from .qmath import DomainError, as_q, is_classical, ln_q, ln_q_array


@dataclass(frozen=True)
class EntropyDiagnostics:
    S_q: float
    rate_chain: float
    rate_weighted: float
    rate_symmetric: float
    min_n_tilde: float
    negative_phi_channels: int


def _npow_lnq(n: np.ndarray, q: float) -> np.ndarray:
    """``n**q * ln_q(n)`` with the ``n -> 0`` limit 0 (``q > 0``)."""
    out = np.zeros_like(n)
    pos = n > 0
    if is_classical(q):
        out[pos] = n[pos] * np.log(n[pos])
    else:
        # n**q * (n**(1-q) - 1)/(1-q) = (n - n**q)/(1-q)
        out[pos] = n[pos] * -np.expm1((q - 1.0) * np.log(n[pos])) / (1.0 - q)
    if q <= 0 and np.any(~pos):
        raise DomainError("n = 0 has no finite entropy contribution for q <= 0")
    return out


def entropy_Sq(state: GasState, q) -> float:
    """``S_q`` in units of ``k``; reduces to the logarithmic quantum entropy at q=1."""
    q = as_q(q)
    y = state.holes
    if np.any(y <= 0) and state.statistics is Statistics.BOSE:
        raise DomainError("g + n must be positive")
    s = state.sign
    terms = _npow_lnq(state.n, q) - s * _npow_lnq(y, q) + s * _npow_lnq(state.g, q)
    return -math.fsum(terms)


def n_tilde(level: LevelGroup, statistics, q) -> float:
    """``2 - (g + s*n)**(q* - 1)``; negative values are legitimate."""
    s = Statistics.parse(statistics).sign
    y = level.g + s * level.n
    if y <= 0:
        raise DomainError(f"g + s*n = {y} is not positive")
    q_star = 2.0 - as_q(q)
    return 2.0 - y ** (q_star - 1.0)


def n_tilde_array(state: GasState, q) -> np.ndarray:
    return 2.0 - state.holes ** (1.0 - as_q(q))


def quotient_weight(state: GasState, q) -> np.ndarray:
    """``1 + (1-q*) ln_{q*}(g + s*n) = (g + s*n)**(q-1)``.

    This is the denominator of the q-difference that turns
    ``ln_{q*} n - ln_{q*}(g+sn)`` into ``ln_{q*}(n/(g+sn))``.
    """
    return state.holes ** (as_q(q) - 1.0)


def _require_interior(state: GasState) -> None:
    if not state.is_interior():
        raise DomainError("entropy rates require 0 < n and g + s*n > 0 at every level")


def entropy_rate_chain(state: GasState, kernel: CollisionKernel, q, dndt=None) -> float:
    _require_interior(state)
    q = as_q(q)
    if dndt is None:
        dndt = dynamics.rhs(state, kernel)
    q_star = 2.0 - q
    grad = ln_q_array(state.n, q_star) - ln_q_array(state.holes, q_star)
    return -q * math.fsum(grad * dndt)


def entropy_rate_weighted(state: GasState, kernel: CollisionKernel, q, dndt=None) -> float:
    _require_interior(state)
    q = as_q(q)
    if dndt is None:
        dndt = dynamics.rhs(state, kernel)
    x = state.n / state.holes
    lx = ln_q_array(x, 2.0 - q)
    return -q * math.fsum(lx * quotient_weight(state, q) * dndt)


def entropy_rate_symmetric(state: GasState, kernel: CollisionKernel, q) -> float:
    """Channel sum ``(q/2) * sum over both orientations``.

    Each channel contributes ``A * P * (x_k x_l - x_m x_v) * dW`` where ``P`` is
    the product of the four ``g + s*n`` factors and ``dW`` the in-minus-out
    sum of ``w * ln_{q*} x`` with ``w`` the q-difference weight. The summand
    is even under reversing the channel, so both orientations are summed as
    twice the canonical one.
    """
    _require_interior(state)
    q = as_q(q)
    if len(kernel) == 0:
        return 0.0
    y = state.holes
    x = state.n / y
    lw = ln_q_array(x, 2.0 - q) * quotient_weight(state, q)
    a, b, c, d = kernel.a, kernel.b, kernel.c, kernel.d
    P = y[a] * y[b] * y[c] * y[d]
    X = x[a] * x[b] - x[c] * x[d]
    dW = lw[a] + lw[b] - lw[c] - lw[d]
    summand = kernel.rate * P * X * dW
    # (q/2) * 2: forward and inverse orientation contribute identical terms
    return q * math.fsum(summand)


def phi(x, y, z, w, q_star) -> float:
    if min(x, y, z, w) <= 0:
        raise DomainError("phi requires positive arguments")
    return (x * y - z * w) * (ln_q(x, q_star) + ln_q(y, q_star) - ln_q(z, q_star) - ln_q(w, q_star))


def phi_array(x, y, z, w, q_star) -> np.ndarray:
    return (x * y - z * w) * (
        ln_q_array(x, q_star) + ln_q_array(y, q_star) - ln_q_array(z, q_star) - ln_q_array(w, q_star)
    )


def channel_phi(state: GasState, kernel: CollisionKernel, q) -> np.ndarray:
    x = state.n / state.holes
    return phi_array(x[kernel.a], x[kernel.b], x[kernel.c], x[kernel.d], 2.0 - as_q(q))


def diagnostics(state: GasState, kernel: CollisionKernel, q, dndt=None) -> EntropyDiagnostics:
    """All per-sample entropy quantities; rates are NaN on boundary states."""
    q = as_q(q)
    S = entropy_Sq(state, q)
    nt = n_tilde_array(state, q)
    min_nt = float(nt.min()) if nt.size else math.nan
    if state.is_interior():
        if dndt is None:
            dndt = dynamics.rhs(state, kernel)
        rc = entropy_rate_chain(state, kernel, q, dndt)
        rw = entropy_rate_weighted(state, kernel, q, dndt)
        rs = entropy_rate_symmetric(state, kernel, q)
        neg = int(np.count_nonzero(channel_phi(state, kernel, q) < 0))
    else:
        rc = rw = rs = math.nan
        neg = 0
    return EntropyDiagnostics(S, rc, rw, rs, min_nt, neg)


# -- phi domain scanner ------------------------------------------------------

@dataclass(frozen=True)
class PhiGrid:
    """Axis values ``min, min+step, ...`` up to ``max`` shared by x, y, z, w."""

    min: float
    max: float
    step: float

    def __post_init__(self):
        if not (self.min > 0 and self.max >= self.min and math.isfinite(self.max)):
            raise DomainError("grid needs 0 < min <= max")
        if not self.step > 0:
            raise DomainError("grid step must be positive")

    def values(self) -> np.ndarray:
        count = int(math.floor((self.max - self.min) / self.step + 1e-9)) + 1
        return np.round(self.min + self.step * np.arange(count), 12)


@dataclass
class PhiScanReport:
    q_star: float
    cells_total: int
    cells_negative: int
    phi_min: float
    argmin: list[float]
    negative_cells: np.ndarray  # rows x, y, z, w, phi

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("negative_cells")
        return d

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2)

    def negative_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "y", "z", "w", "phi"])
        for row in self.negative_cells:
            wr.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def scan_phi_domain(q_star: float, grid: PhiGrid | Sequence[float]) -> PhiScanReport:
    """Evaluate phi on the full 4-D product grid, sweeping in lexicographic order."""
    vals = grid.values() if isinstance(grid, PhiGrid) else np.asarray(grid, dtype=float)
    if vals.size == 0 or np.any(vals <= 0):
        raise DomainError("grid values must be positive")
    q_star = float(q_star)
    lq = ln_q_array(vals, q_star)
    m = vals.size
    X, Y, Z, W = np.meshgrid(np.arange(m), np.arange(m), np.arange(m), np.arange(m), indexing="ij")
    X, Y, Z, W = X.ravel(), Y.ravel(), Z.ravel(), W.ravel()
    ph = (vals[X] * vals[Y] - vals[Z] * vals[W]) * (lq[X] + lq[Y] - lq[Z] - lq[W])
    k = int(np.argmin(ph))
    neg = ph < 0
    cells = np.column_stack([vals[X][neg], vals[Y][neg], vals[Z][neg], vals[W][neg], ph[neg]])
    return PhiScanReport(
        q_star=q_star,
        cells_total=int(ph.size),
        cells_negative=int(np.count_nonzero(neg)),
        phi_min=float(ph[k]),
        argmin=[float(vals[X[k]]), float(vals[Y[k]]), float(vals[Z[k]]), float(vals[W[k]])],
        negative_cells=cells,
    )
