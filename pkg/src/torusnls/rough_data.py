"""Random initial data of prescribed Sobolev regularity.

    u0 = sum_k <k>^{-(s+1)} g_k exp(i <k, x>),   g_k = a_k + i b_k,
    a_k, b_k ~ U[-1, 1] independent.

``g_k`` comes from Philox4x32-10 keyed by the seed with the counter holding
the mode ``(k1, k2)``.  A coefficient therefore depends only on
``(seed, k)`` and not on the grid size, so grids of different resolution
share their common modes exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid2D, SpectralField

__all__ = ["RoughDataSpec", "generate", "philox4x32", "mode_uniforms"]

_MASK32 = np.uint64(0xFFFFFFFF)
_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = np.uint64(0x9E3779B9)
_PHILOX_W1 = np.uint64(0xBB67AE85)


def philox4x32(counter, key, rounds: int = 10) -> np.ndarray:
    """Vectorized Philox4x32 block function.

    ``counter`` has shape ``(..., 4)`` and ``key`` shape ``(..., 2)``, both
    holding 32-bit words; they broadcast against each other.  Returns the
    four output words with shape ``(..., 4)`` as ``uint32``.
    """
    ctr = np.asarray(counter, dtype=np.uint64) & _MASK32
    k = np.asarray(key, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = (ctr[..., i] for i in range(4))
    k0, k1 = k[..., 0], k[..., 1]
    for r in range(rounds):
        if r:
            k0 = (k0 + _PHILOX_W0) & _MASK32
            k1 = (k1 + _PHILOX_W1) & _MASK32
        p0 = _PHILOX_M0 * c0
        p1 = _PHILOX_M1 * c2
        hi0, lo0 = p0 >> np.uint64(32), p0 & _MASK32
        hi1, lo1 = p1 >> np.uint64(32), p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack(np.broadcast_arrays(c0, c1, c2, c3), axis=-1).astype(np.uint32)


def _to_unit(hi, lo) -> np.ndarray:
    # 53-bit double in [0, 1) from two 32-bit words
    hi = np.asarray(hi, dtype=np.uint64) >> np.uint64(5)
    lo = np.asarray(lo, dtype=np.uint64) >> np.uint64(6)
    return (hi * np.uint64(1 << 26) + lo).astype(np.float64) * 2.0**-53


def mode_uniforms(seed: int, k1, k2) -> np.ndarray:
    """Complex draws ``g_k`` uniform on ``[-1,1] + i[-1,1]`` for integer modes."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    k1 = np.asarray(k1, dtype=np.int64)
    k2 = np.asarray(k2, dtype=np.int64)
    k1, k2 = np.broadcast_arrays(k1, k2)
    ctr = np.zeros(k1.shape + (4,), dtype=np.uint64)
    # two's complement of each mode component in one 32-bit word
    ctr[..., 0] = k1.astype(np.uint64) & _MASK32
    ctr[..., 1] = k2.astype(np.uint64) & _MASK32
    key = np.array([seed & 0xFFFFFFFF, seed >> 32], dtype=np.uint64)
    w = philox4x32(ctr, key)
    re = 2.0 * _to_unit(w[..., 0], w[..., 1]) - 1.0
    im = 2.0 * _to_unit(w[..., 2], w[..., 3]) - 1.0
    return re + 1j * im


@dataclass(frozen=True)
class RoughDataSpec:
    s: float
    seed: int
    grid: Grid2D

    def __post_init__(self):
        if not np.isfinite(self.s) or self.s <= 0:
            raise ValueError(f"s must be positive, got {self.s!r}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed:
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))


def generate(spec: RoughDataSpec) -> SpectralField:
    grid = spec.grid
    g = mode_uniforms(spec.seed, grid.k1, grid.k2)
    return SpectralField._wrap(grid, grid.bracket(-(spec.s + 1.0)) * g)
