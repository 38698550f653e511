"""Energy-conserving collision channels with inverse-symmetric rates."""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gas import GasState, LevelGrid
from .qmath import DomainError

KERNEL_HEADER = ("kappa", "lambda", "mu", "nu", "A")

Pair = tuple[int, int]
ChannelId = tuple[Pair, Pair]


@dataclass(frozen=True)
class CollisionChannel:
    """One channel identity ``{(k, l), (m, v)}`` and its rate ``A``.

    Pairs are sorted and ``in_pair < out_pair``, so a channel and its inverse
    share a single record and therefore a single rate.
    """

    in_pair: Pair
    out_pair: Pair
    rate: float

    @property
    def identity(self) -> ChannelId:
        return self.in_pair, self.out_pair


def canonical(in_pair: Sequence[int], out_pair: Sequence[int]) -> ChannelId:
    a = tuple(sorted(int(i) for i in in_pair))
    b = tuple(sorted(int(i) for i in out_pair))
    return (a, b) if a <= b else (b, a)


def enumerate_channels(energies: Sequence[int]) -> list[ChannelId]:
    """All unordered pair-of-pairs with equal pair energy sums, in canonical order."""
    lattice = [int(e) for e in energies]
    if any(e < 0 for e in lattice):
        raise DomainError("lattice energies must be nonnegative integers")
    by_sum: dict[int, list[Pair]] = defaultdict(list)
    L = len(lattice)
    for i in range(L):
        for j in range(i, L):
            by_sum[lattice[i] + lattice[j]].append((i, j))
    out = []
    for pairs in by_sum.values():
        for a in range(len(pairs)):
            for b in range(a + 1, len(pairs)):
                out.append((pairs[a], pairs[b]))
    out.sort()
    return out


@dataclass(frozen=True)
class RateSpec:
    """``kind='constant'`` uses ``value``; ``kind='random'`` draws
    ``numpy.random.default_rng(seed).uniform(min, max)`` once per channel in
    canonical channel order."""

    kind: str = "constant"
    value: float = 1.0
    seed: int = 0
    min: float = 0.0
    max: float = 1.0

    def __post_init__(self):
        if self.kind == "constant":
            if not self.value >= 0 or not np.isfinite(self.value):
                raise DomainError("constant rate must be finite and >= 0")
        elif self.kind == "random":
            if not (0 <= self.min <= self.max) or not np.isfinite(self.max):
                raise DomainError("random rates need 0 <= min <= max < inf")
        else:
            raise DomainError(f"unknown rate kind {self.kind!r}")

    @classmethod
    def constant(cls, value: float) -> RateSpec:
        return cls("constant", value=value)

    @classmethod
    def random(cls, seed: int, lo: float, hi: float) -> RateSpec:
        return cls("random", seed=seed, min=lo, max=hi)

    def draw(self, count: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(count, float(self.value))
        return np.random.default_rng(self.seed).uniform(self.min, self.max, size=count)


class CollisionKernel:
    """Channel set stored column-wise for vectorized evaluation.

    ``a, b`` are the in-pair indices, ``c, d`` the out-pair indices, ``rate``
    the shared rate of the channel and its inverse.
    """

    def __init__(self, channels: Sequence[CollisionChannel], level_count: int):
        seen = set()
        rows = []
        for ch in channels:
            ident = canonical(ch.in_pair, ch.out_pair)
            if ident[0] == ident[1]:
                raise DomainError(f"self-channel {ident} is not allowed")
            if ident in seen:
                raise DomainError(f"duplicate channel {ident}")
            if max(max(ident[0]), max(ident[1])) >= level_count:
                raise DomainError(f"channel {ident} references a level >= {level_count}")
            rate = float(ch.rate)
            if not (rate >= 0 and np.isfinite(rate)):
                raise DomainError(f"channel {ident} has invalid rate {ch.rate!r}")
            seen.add(ident)
            rows.append((ident, rate))
        self.level_count = int(level_count)
        self._index = {ident: k for k, (ident, _) in enumerate(rows)}
        idx = np.array([[*i, *o] for (i, o), _ in rows], dtype=np.intp).reshape(-1, 4)
        self.a, self.b, self.c, self.d = (idx[:, k].copy() for k in range(4))
        self.rate = np.array([r for _, r in rows], dtype=float)
        for arr in (self.a, self.b, self.c, self.d, self.rate):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return self.rate.size

    def __repr__(self) -> str:
        return f"CollisionKernel(channels={len(self)}, levels={self.level_count})"

    @property
    def channels(self) -> tuple[CollisionChannel, ...]:
        return tuple(
            CollisionChannel((int(a), int(b)), (int(c), int(d)), float(r))
            for a, b, c, d, r in zip(self.a, self.b, self.c, self.d, self.rate)
        )

    def rate_of(self, in_pair: Sequence[int], out_pair: Sequence[int]) -> float:
        """Stored rate for the channel in either orientation; 0 off-shell."""
        k = self._index.get(canonical(in_pair, out_pair))
        return 0.0 if k is None else float(self.rate[k])

    def check_energy_shell(self, lattice: Sequence[int]) -> bool:
        e = np.asarray(lattice, dtype=np.int64)
        return bool(np.all(e[self.a] + e[self.b] == e[self.c] + e[self.d]))


def kernel_to_csv(kernel: CollisionKernel) -> str:
    """One row per channel identity in canonical order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(KERNEL_HEADER)
    for ch in kernel.channels:
        w.writerow([*ch.in_pair, *ch.out_pair, repr(ch.rate)])
    return buf.getvalue()


def kernel_from_csv(text: str, level_count: int) -> CollisionKernel:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(h.strip() for h in rows[0]) != KERNEL_HEADER:
        raise ValueError(f"kernel CSV header must be {','.join(KERNEL_HEADER)}")
    channels = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            k, l, m, v, a = row
            channels.append(CollisionChannel((int(k), int(l)), (int(m), int(v)), float(a)))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return CollisionKernel(channels, level_count)


def build_kernel(lattice: Sequence[int] | LevelGrid, rate_spec: RateSpec) -> CollisionKernel:
    if isinstance(lattice, LevelGrid):
        lattice = lattice.lattice
    idents = enumerate_channels(lattice)
    rates = rate_spec.draw(len(idents))
    return CollisionKernel(
        [CollisionChannel(i, o, r) for (i, o), r in zip(idents, rates)], len(lattice)
    )


def collision_rate_Z(state: GasState, channel: CollisionChannel, direction: str = "forward") -> float:
    """Expected collisions per unit time along ``channel`` in one direction."""
    if direction not in ("forward", "reverse"):
        raise ValueError("direction must be 'forward' or 'reverse'")
    src, dst = channel.in_pair, channel.out_pair
    if direction == "reverse":
        src, dst = dst, src
    if max(*src, *dst) >= len(state):
        raise DomainError("channel references a level outside the state")
    n, y = state.n, state.holes
    return float(channel.rate * n[src[0]] * n[src[1]] * y[dst[0]] * y[dst[1]])
