"""Discrete norms: L2, H^s, discrete Bourgain norms and Strichartz-type ratios.

All norms live in coefficient space: ``||u||_{L2}^2 = sum_k |u_k|^2``.  The
continuum factor ``4 pi^2`` is dropped everywhere, which leaves ratios and
convergence orders unchanged.

Discrete Bourgain norm
----------------------
For a time sequence ``u_0, ..., u_{N-1}`` (zero outside) with step ``tau``,

    u~(sigma, k) = tau * sum_n u_n(k) exp(i n tau sigma),
    ||u||_{X^{s,b}}^2 = (1/2pi) int_{-pi/tau}^{pi/tau}
                        sum_k <k>^{2s} <d(sigma - |k|^2)>^{2b} |u~(sigma, k)|^2 dsigma,

with ``d(sigma) = (exp(i tau sigma) - 1) / tau`` and ``<z> = sqrt(1 + |z|^2)``.
The ``1/2pi`` normalisation makes ``(s, b) = (0, 0)`` equal to
``(tau sum_n ||u_n||^2)^{1/2}`` exactly.

The sigma integral is evaluated with the P-point periodic trapezoid rule,
``sigma_m = -pi/tau + 2 pi m / (P tau)``.  For ``b = 0`` the integrand is a
trigonometric polynomial of degree ``N - 1`` and ``P = N`` is exact.  For
``b != 0`` the weight is analytic in a strip of half-width
``acosh(1 + tau^2/2)`` and the rule converges geometrically; by default ``P``
is chosen from that strip so the quadrature error is below double
precision.  Passing ``n_sigma=N`` gives the plain N-point Riemann sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .spectral import Grid2D, SpectralField, project, to_physical

__all__ = [
    "TimeSequence",
    "BourgainParams",
    "l2_norm",
    "hs_norm",
    "l2_error",
    "bourgain_norm_freq",
    "bourgain_norm_time",
    "sigma_points",
    "strichartz_ratio",
    "linf_embedding_ratio",
    "lt4_norm",
]


def l2_norm(f: SpectralField) -> float:
    return float(np.linalg.norm(f.coeffs))


def hs_norm(f: SpectralField, s: float) -> float:
    """``(sum_k <k>^{2s} |u_k|^2)^{1/2}``."""
    return float(np.linalg.norm(f.grid.bracket(s) * f.coeffs))


def l2_error(a: SpectralField, b: SpectralField) -> float:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: M={a.grid.M} vs M={b.grid.M}")
    return float(np.linalg.norm(a.coeffs - b.coeffs))


@dataclass(frozen=True)
class BourgainParams:
    s: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.s) and np.isfinite(self.b)):
            raise ValueError(f"s and b must be finite, got s={self.s!r}, b={self.b!r}")


class TimeSequence:
    """Fields ``u_n`` at ``t_n = n tau``, ``n = 0..N-1``, zero outside."""

    def __init__(self, tau: float, fields: Sequence[SpectralField]):
        fields = list(fields)
        if not np.isfinite(tau) or tau <= 0:
            raise ValueError(f"tau must be positive, got {tau!r}")
        if not fields:
            raise ValueError("a time sequence needs at least one field")
        grid = fields[0].grid
        for i, f in enumerate(fields):
            if f.grid != grid:
                raise ValueError(f"field {i} is on M={f.grid.M}, expected M={grid.M}")
        self.tau = float(tau)
        self.fields = tuple(fields)
        self.grid: Grid2D = grid

    def __len__(self):
        return len(self.fields)

    def as_array(self) -> np.ndarray:
        """Coefficients stacked as ``(N, M, M)``."""
        return np.stack([f.coeffs for f in self.fields])

    def scaled(self, c: complex) -> "TimeSequence":
        return TimeSequence(self.tau, [f * c for f in self.fields])

    def padded(self, n_zeros: int) -> "TimeSequence":
        """Append ``n_zeros`` zero fields (does not change the sequence as an element of l2)."""
        zero = SpectralField.zeros(self.grid)
        return TimeSequence(self.tau, list(self.fields) + [zero] * n_zeros)

    @classmethod
    def from_snapshots(cls, tau: float, snapshots: Iterable[tuple[float, SpectralField]]) -> "TimeSequence":
        return cls(tau, [f for _, f in snapshots])


def _japanese_d(theta: np.ndarray, tau: float) -> np.ndarray:
    """``<d_tau(sigma)>^2`` as a function of ``theta = tau * sigma``."""
    return 1.0 + (2.0 - 2.0 * np.cos(theta)) / tau**2


def sigma_points(N: int, tau: float, b: float) -> int:
    """Trapezoid points needed for the sigma integral to reach double precision."""
    if b == 0:
        return N
    a = math.acosh(1.0 + 0.5 * tau * tau)
    ap = 0.75 * a
    upper = 1.0 + (2.0 + 2.0 * math.cosh(ap)) / tau**2
    lower = 1.0 - (2.0 * math.cosh(ap) - 2.0) / tau**2
    if b > 0:
        spread = b * math.log(upper)
    else:
        spread = -b * math.log((1.0 + 4.0 / tau**2) / lower)
    budget = (
        math.log(1e17)
        + math.log(2.0 * (2 * N - 1))
        + spread
        + math.log(1.0 / (1.0 - math.exp(-ap)))
    )
    return sfft.next_fast_len(N - 1 + math.ceil(budget / ap))


def _resolve_points(N: int, tau: float, b: float, n_sigma: Optional[int]) -> int:
    if n_sigma is None:
        return sigma_points(N, tau, b)
    if int(n_sigma) != n_sigma or n_sigma < N:
        raise ValueError(f"n_sigma must be an integer >= N={N}, got {n_sigma!r}")
    return int(n_sigma)


def _active(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flattened ``(N, K)`` coefficients of the modes that are ever nonzero, and their indices."""
    flat = arr.reshape(arr.shape[0], -1)
    idx = np.flatnonzero(np.any(flat != 0, axis=0))
    return flat[:, idx], idx


def _chunks(K: int, P: int, budget: int = 1 << 22):
    step = max(1, budget // max(P, 1))
    for start in range(0, K, step):
        yield slice(start, min(K, start + step))


def _sigma_transform(coeffs: np.ndarray, P: int) -> np.ndarray:
    """``sum_n c_n (-1)^n exp(2 pi i n m / P)`` for ``m = 0..P-1`` along axis 0.

    Equals ``u~(sigma_m) / tau`` on the grid starting at ``-pi/tau``.
    """
    N = coeffs.shape[0]
    alt = np.where(np.arange(N) % 2, -1.0, 1.0)[:, None]
    return sfft.ifft(coeffs * alt, n=P, axis=0, norm="forward")


def bourgain_norm_freq(seq: TimeSequence, p: BourgainParams, n_sigma: Optional[int] = None) -> float:
    """Bourgain norm from the space-time transform, weight ``<d(sigma - |k|^2)>^b``."""
    tau = seq.tau
    N = len(seq)
    P = _resolve_points(N, tau, p.b, n_sigma)
    coeffs, idx = _active(seq.as_array())
    if idx.size == 0:
        return 0.0
    ksq = seq.grid.ksq.ravel()[idx]
    kw = seq.grid.bracket(2 * p.s).ravel()[idx]
    theta = -np.pi + 2.0 * np.pi * np.arange(P) / P
    total = 0.0
    for sl in _chunks(idx.size, P):
        U = _sigma_transform(coeffs[:, sl], P)
        dens = U.real**2 + U.imag**2
        if p.b != 0:
            dens *= _japanese_d(theta[:, None] - tau * ksq[None, sl], tau) ** p.b
        total += float(np.sum(dens.sum(axis=0) * kw[sl]))
    # (1/2pi) * dsigma * tau^2 |U|^2 with dsigma = 2pi / (P tau)
    return math.sqrt(total * tau / P)


def bourgain_norm_time(seq: TimeSequence, p: BourgainParams, n_sigma: Optional[int] = None) -> float:
    """Same norm through the twisted sequence ``f_n = exp(-i n tau Lap) u_n``.

    ``<D_tau>^b`` acts on ``f_n`` (periodised over the ``P``-point window)
    as the multiplier ``<d(sigma)>^b``, ``<Lap>^{s/2}`` as ``<k>^s``, and the
    result is measured in ``l2_tau L2`` in the time domain.
    """
    tau = seq.tau
    N = len(seq)
    P = _resolve_points(N, tau, p.b, n_sigma)
    coeffs, idx = _active(seq.as_array())
    if idx.size == 0:
        return 0.0
    ksq = seq.grid.ksq.ravel()[idx]
    kweight = seq.grid.bracket(p.s).ravel()[idx]
    n = np.arange(N)[:, None]
    theta = -np.pi + 2.0 * np.pi * np.arange(P) / P
    dmult = _japanese_d(theta, tau) ** (0.5 * p.b)
    total = 0.0
    for sl in _chunks(idx.size, P):
        f = coeffs[:, sl] * np.exp(1j * tau * n * ksq[None, sl])
        F = _sigma_transform(f, P)
        F *= dmult[:, None]
        # back to a P-periodic time sequence; the (-1)^n twist drops out of |.|
        g = sfft.fft(F, axis=0, norm="forward")
        g *= kweight[None, sl]
        total += float(np.sum(g.real**2 + g.imag**2))
    return math.sqrt(tau * total)


def lt4_norm(seq: TimeSequence, tau: Optional[float] = None) -> float:
    """``||Pi_tau u_n||_{l4_tau L4}`` with the grid rule ``(2pi/M)^2`` in space."""
    tau = seq.tau if tau is None else tau
    M = seq.grid.M
    acc = 0.0
    for f in seq.fields:
        w = to_physical(project(f, tau))
        a2 = w.real**2 + w.imag**2
        acc += float(np.sum(a2 * a2))
    return (seq.tau * (2.0 * np.pi / M) ** 2 * acc) ** 0.25


def strichartz_ratio(seq: TimeSequence, s: float, b1: float, tau: Optional[float] = None,
                     n_sigma: Optional[int] = None) -> float:
    """``||Pi_tau u_n||_{l4 L4} / ||u_n||_{X^{s,b1}}``; bounded uniformly in tau for s > 0, b1 > 1/2."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s!r}")
    if not b1 > 0.5:
        raise ValueError(f"b1 must exceed 1/2, got {b1!r}")
    den = bourgain_norm_freq(seq, BourgainParams(s, b1), n_sigma=n_sigma)
    if den == 0:
        raise ZeroDivisionError("Bourgain norm of the sequence is zero")
    return lt4_norm(seq, tau) / den


def linf_embedding_ratio(seq: TimeSequence, s: float, b: float, n_sigma: Optional[int] = None) -> float:
    """``max_n ||u_n||_{H^s} / ||u_n||_{X^{s,b}}`` for ``b > 1/2``."""
    if not b > 0.5:
        raise ValueError(f"b must exceed 1/2, got {b!r}")
    den = bourgain_norm_freq(seq, BourgainParams(s, b), n_sigma=n_sigma)
    if den == 0:
        raise ZeroDivisionError("Bourgain norm of the sequence is zero")
    return max(hs_norm(f, s) for f in seq.fields) / den
