"""Fourier-coefficient fields on the periodic square [0, 2pi)^2.

Coefficients are stored as an ``(M, M)`` complex array in standard DFT
order along both axes (axis 0 is ``k1``, axis 1 is ``k2``), so the mode set
is ``-M/2 <= k_j <= M/2 - 1``.  The forward transform carries the ``1/M^2``
factor and the inverse none, which makes ``coeffs[k]`` the Fourier
coefficient of a band-limited function and

    u(x_j) = sum_k coeffs[k] * exp(i <k, x_j>),   x_j = 2 pi j / M.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid2D",
    "SpectralField",
    "FilterSpec",
    "to_physical",
    "from_physical",
    "apply_multiplier",
    "project",
    "free_flow",
    "filter_mask",
]

Multiplier = Union[Callable[[np.ndarray, np.ndarray], np.ndarray], np.ndarray, complex, float]


@dataclass(frozen=True)
class Grid2D:
    """Square grid with ``M`` points per direction on [0, 2pi)^2."""

    M: int

    def __post_init__(self):
        if isinstance(self.M, bool) or int(self.M) != self.M:
            raise ValueError(f"M must be an integer, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        if self.M < 2 or self.M % 2:
            raise ValueError(f"M must be an even integer >= 2, got {self.M}")

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer wavenumbers along one axis, in DFT order."""
        return np.fft.fftfreq(self.M, d=1.0 / self.M).round().astype(np.int64)

    @cached_property
    def k1(self) -> np.ndarray:
        return np.broadcast_to(self.modes[:, None], (self.M, self.M))

    @cached_property
    def k2(self) -> np.ndarray:
        return np.broadcast_to(self.modes[None, :], (self.M, self.M))

    @cached_property
    def ksq(self) -> np.ndarray:
        """``|k|^2`` as float64."""
        m = self.modes.astype(np.float64)
        return m[:, None] ** 2 + m[None, :] ** 2

    @cached_property
    def kmax(self) -> np.ndarray:
        """``max(|k1|, |k2|)`` per mode, used by the square filter."""
        a = np.abs(self.modes)
        return np.maximum(a[:, None], a[None, :])

    def bracket(self, power: float = 1.0) -> np.ndarray:
        """Japanese bracket ``<k>^power = (1 + |k|^2)^(power/2)``."""
        return (1.0 + self.ksq) ** (0.5 * power)

    @property
    def x(self) -> np.ndarray:
        """Physical sample points ``2 pi j / M`` along one axis."""
        return 2.0 * np.pi * np.arange(self.M) / self.M

    def index(self, k1: int, k2: int) -> tuple[int, int]:
        """Array position of mode ``(k1, k2)``."""
        half = self.M // 2
        for kj in (k1, k2):
            if not -half <= kj <= half - 1:
                raise IndexError(f"mode {(k1, k2)} outside the grid with M={self.M}")
        return k1 % self.M, k2 % self.M


class SpectralField:
    """Immutable set of Fourier coefficients on a :class:`Grid2D`."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid2D, coeffs):
        arr = np.array(coeffs, dtype=np.complex128, copy=True)
        if arr.shape != (grid.M, grid.M):
            raise ValueError(
                f"coefficient array has shape {arr.shape}, expected {(grid.M, grid.M)}"
            )
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("field contains non-finite coefficients")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("SpectralField is immutable")

    def __reduce__(self):
        # slots plus the blocked __setattr__ defeat default pickling (worker processes)
        return (SpectralField, (self.grid, np.array(self.coeffs)))

    @classmethod
    def zeros(cls, grid: Grid2D) -> "SpectralField":
        return cls(grid, np.zeros((grid.M, grid.M), dtype=np.complex128))

    @classmethod
    def single_mode(cls, grid: Grid2D, k: tuple[int, int], amplitude: complex = 1.0) -> "SpectralField":
        c = np.zeros((grid.M, grid.M), dtype=np.complex128)
        c[grid.index(*k)] = amplitude
        return cls(grid, c)

    @classmethod
    def _wrap(cls, grid: Grid2D, arr: np.ndarray) -> "SpectralField":
        # Trusted constructor for freshly allocated arrays; skips the copy.
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("field contains non-finite coefficients")
        obj = object.__new__(cls)
        arr = np.asarray(arr, dtype=np.complex128)
        arr.flags.writeable = False
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "coeffs", arr)
        return obj

    def __getitem__(self, k: tuple[int, int]) -> complex:
        return complex(self.coeffs[self.grid.index(*k)])

    def _check_grid(self, other: "SpectralField"):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.grid != self.grid:
            raise ValueError(f"grid mismatch: M={self.grid.M} vs M={other.grid.M}")
        return None

    def __add__(self, other):
        if self._check_grid(other) is NotImplemented:
            return NotImplemented
        return SpectralField._wrap(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check_grid(other) is NotImplemented:
            return NotImplemented
        return SpectralField._wrap(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SpectralField._wrap(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField._wrap(self.grid, -self.coeffs)

    def conj(self) -> "SpectralField":
        """Coefficients of the pointwise complex conjugate ``conj(u)``.

        ``conj(u)`` has coefficient ``conj(u_{-k})`` at ``k``.  The unmatched
        mode ``-M/2`` maps onto itself (aliasing), as it does for the samples.
        """
        flipped = np.roll(self.coeffs[::-1, ::-1], 1, axis=(0, 1))
        return SpectralField._wrap(self.grid, np.conj(flipped))

    def __eq__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None

    def __repr__(self):
        return f"SpectralField(M={self.grid.M}, l2={np.linalg.norm(self.coeffs):.6g})"


@dataclass(frozen=True)
class FilterSpec:
    """Square frequency filter tied to a time step: keep ``max|k_j| <= tau^(-1/2)``."""

    tau: float

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau!r}")

    @property
    def cutoff(self) -> float:
        return self.tau ** -0.5


def filter_mask(grid: Grid2D, tau: float) -> np.ndarray:
    """Boolean mask of kept modes; the boundary of the closed square is kept."""
    cutoff = FilterSpec(tau).cutoff
    # tau = 1/n^2 must keep |k_j| = n even if tau**-0.5 rounds just below n
    return grid.kmax <= cutoff * (1.0 + 4.0 * np.finfo(float).eps)


def to_physical(f: SpectralField) -> np.ndarray:
    """Samples ``u(x_j)`` on the ``M x M`` grid (writable copy)."""
    return sfft.ifft2(f.coeffs, norm="forward")


def from_physical(samples, grid: Grid2D) -> SpectralField:
    """Fourier coefficients of grid samples, ``(1/M^2) sum_j u(x_j) e^{-i<k,x_j>}``."""
    samples = np.asarray(samples)
    if samples.shape != (grid.M, grid.M):
        raise ValueError(f"samples have shape {samples.shape}, expected {(grid.M, grid.M)}")
    return SpectralField._wrap(grid, sfft.fft2(samples, norm="forward"))


def apply_multiplier(f: SpectralField, m: Multiplier) -> SpectralField:
    """Return the field with ``coeffs[k] * m(k)``.

    ``m`` may be a scalar, an ``(M, M)`` array in DFT layout, or a callable
    taking the broadcast integer arrays ``(k1, k2)``.
    """
    if callable(m):
        m = m(f.grid.k1, f.grid.k2)
    m = np.asarray(m)
    if m.ndim and m.shape != f.coeffs.shape:
        raise ValueError(f"multiplier has shape {m.shape}, expected {f.coeffs.shape}")
    return SpectralField._wrap(f.grid, f.coeffs * m)


def project(f: SpectralField, filt: FilterSpec | float) -> SpectralField:
    """Apply the square filter ``Pi_tau``."""
    tau = filt.tau if isinstance(filt, FilterSpec) else filt
    return SpectralField._wrap(f.grid, np.where(filter_mask(f.grid, tau), f.coeffs, 0))


def free_flow(f: SpectralField, t: float) -> SpectralField:
    """Linear Schroedinger flow ``exp(i t Laplacian)``: ``coeffs[k] * exp(-i t |k|^2)``."""
    return apply_multiplier(f, np.exp(-1j * t * f.grid.ksq))
