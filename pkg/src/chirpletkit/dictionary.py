"""Discretized Gaussian chirplet dictionary.

The lattice is described by blocks ``(k, m)``: a time spread ``a**(2k)`` and
a chirp-rate ``(2*pi/N) * m / a**(2k)``. Every block implicitly spans all
``N x N`` time/frequency translations, which are never materialized.

Levels ``k < i0`` contribute one unrotated (Gabor) block each. Rotated levels
``k in [0, D - i0)`` use signed indices ``m in [-2a^(2k), 2a^(2k))`` so that
descending chirps are represented as well, keeping ``4a^(2k)`` rotations per
scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

from .core import TWO_PI, ChirpletParams
from .errors import InvalidInputError, SignalTooShortError

__all__ = [
    "DictionaryConfig",
    "Block",
    "Dictionary",
    "build_dictionary",
    "enumerate_blocks",
    "params_at",
]


def _floor_half_log(n: int, a: int) -> int:
    """Largest integer ``D`` with ``a**(2D) <= n``."""
    d = 0
    while a ** (2 * (d + 1)) <= n:
        d += 1
    return d


@dataclass(frozen=True)
class DictionaryConfig:
    n: int
    a: int = 2
    i0: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise InvalidInputError(f"signal length must be an integer >= 4, got {self.n}")
        if int(self.a) != self.a or self.a < 2:
            raise InvalidInputError(f"radix must be an integer >= 2, got {self.a}")
        if int(self.i0) != self.i0 or self.i0 < 0:
            raise InvalidInputError(f"i0 must be a non-negative integer, got {self.i0}")

    @property
    def levels(self) -> int:
        """Number of decomposition levels ``D = floor(log_a(N) / 2)``."""
        return _floor_half_log(self.n, self.a)


class Block(NamedTuple):
    """One (scale, chirp-rate) block of the lattice."""

    k: int
    m: int
    dt: float
    c: float
    rotated: bool

    @property
    def angle(self) -> float:
        return math.atan(self.m / self.dt)


@dataclass(frozen=True)
class Dictionary:
    config: DictionaryConfig
    blocks: tuple[Block, ...]

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def size(self) -> int:
        """Total atom count ``M = N**2 * len(blocks)``."""
        return self.n ** 2 * len(self.blocks)

    def gabor_blocks(self) -> tuple[Block, ...]:
        """Blocks with zero chirp-rate only."""
        return tuple(b for b in self.blocks if b.m == 0)

    def rotations(self, k: int) -> int:
        """Number of rotated chirp-rates ``m_k = 4a^(2k)`` at level ``k``."""
        return 4 * self.config.a ** (2 * k)


def build_dictionary(cfg: DictionaryConfig) -> Dictionary:
    """Lay out the block list for ``cfg``; raises if no rotated level fits."""
    n, a, i0 = cfg.n, cfg.a, cfg.i0
    levels = cfg.levels
    if levels <= i0:
        raise SignalTooShortError(
            f"N={n} gives D={levels} levels with radix {a}; "
            f"at least i0 + 1 = {i0 + 1} are needed"
        )
    blocks = []
    for k in range(i0):
        blocks.append(Block(k, 0, float(a ** (2 * k)), 0.0, False))
    for k in range(levels - i0):
        dt = float(a ** (2 * k))
        half = 2 * a ** (2 * k)
        for m in range(-half, half):
            blocks.append(Block(k, m, dt, (TWO_PI / n) * (m / dt), True))
    return Dictionary(cfg, tuple(blocks))


def enumerate_blocks(d: Dictionary) -> Iterator[Block]:
    """Yield blocks in the fixed enumeration order (k outer, m inner)."""
    yield from d.blocks


def params_at(d: Dictionary, k: int, m: int, gamma_t: int, gamma_w: int) -> ChirpletParams:
    """Parameters of lattice atom ``(k, m, gamma_t, gamma_w)``."""
    n, a, i0 = d.config.n, d.config.a, d.config.i0
    if not (0 <= gamma_t < n and 0 <= gamma_w < n):
        raise IndexError(f"translation index out of range for N={n}")
    if m == 0:
        valid = 0 <= k < max(i0, d.config.levels - i0)
    else:
        half = 2 * a ** (2 * k)
        valid = 0 <= k < d.config.levels - i0 and -half <= m < half
    if not valid:
        raise IndexError(f"block (k={k}, m={m}) is not in the dictionary")
    dt = float(a ** (2 * k))
    return ChirpletParams(
        tc=float(gamma_t),
        omega=TWO_PI * gamma_w / n,
        c=(TWO_PI / n) * (m / dt),
        dt=dt,
    )
