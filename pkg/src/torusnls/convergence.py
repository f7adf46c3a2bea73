"""Time-step sweeps against a fine-step reference and log-log order fits."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .integrators import RunResult, StepperConfig, integrate
from .norms import l2_error
from .rough_data import RoughDataSpec, generate
from .spectral import Grid2D, SpectralField

__all__ = [
    "ExperimentConfig",
    "ConvergenceReport",
    "fit_order",
    "steps_for",
    "reference_solution",
    "reference_check",
    "run_sweep",
    "resolution_study",
    "trend_ok",
]

log = logging.getLogger(__name__)

# smallest admissible ratio min(taus) / tau_ref
REFERENCE_RATIO = 8

Integrator = Callable[[SpectralField, StepperConfig, int], RunResult]


def steps_for(T: float, tau: float) -> int:
    """Step count ``T / tau``; raises if it is not an integer."""
    n = T / tau
    r = round(n)
    if r < 1 or abs(n - r) > 1e-9 * max(1.0, n):
        raise ValueError(f"T={T!r} is not an integer multiple of tau={tau!r}")
    return int(r)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: data, grid, final time, time steps and the reference step.

    ``fit_exclude_largest`` drops that many of the largest time steps from
    the order fit (they stay in the rows).  ``checkpoints > 0`` additionally
    records the error at that many equally spaced times and reports the
    maximum; every ``T / checkpoints`` must be a multiple of every step.
    """

    M: int
    s: float
    seed: int
    T: float = 1.0
    taus: tuple[float, ...] = tuple(2.0**-j for j in range(6, 14))
    tau_ref: float = 2.0**-16
    mu: int = -1
    reference_filtered: bool = True
    dealias: bool = False
    fit_exclude_largest: int = 0
    reference_check: bool = False
    checkpoints: int = 0

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        grid = self.grid  # validates M
        self.data  # validates s and seed
        if self.mu not in (-1, 1) or isinstance(self.mu, bool):
            raise ValueError(f"mu: must be -1 or +1, got {self.mu!r}")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T: must be positive, got {self.T!r}")
        if not self.taus:
            raise ValueError("taus: at least one time step is required")
        for tau in self.taus:
            if not 0 < tau <= 1:
                raise ValueError(f"taus: {tau!r} is outside (0, 1]")
            try:
                steps_for(self.T, tau)
            except ValueError as exc:
                raise ValueError(f"taus: {exc}") from None
        if len(set(self.taus)) != len(self.taus):
            raise ValueError("taus: duplicate time steps")
        if not 0 < self.tau_ref <= min(self.taus) / REFERENCE_RATIO:
            raise ValueError(
                f"tau_ref: must be positive and at most min(taus)/{REFERENCE_RATIO} = "
                f"{min(self.taus) / REFERENCE_RATIO!r}, got {self.tau_ref!r}"
            )
        try:
            steps_for(self.T, self.tau_ref)
        except ValueError as exc:
            raise ValueError(f"tau_ref: {exc}") from None
        if self.reference_filtered and not self.tau_ref**-0.5 > grid.M / 2:
            raise ValueError(
                f"tau_ref: filter cutoff {self.tau_ref**-0.5:g} must exceed M/2 = {grid.M // 2} "
                "so the reference filter is inactive"
            )
        if not 0 <= self.fit_exclude_largest <= len(self.taus) - 2:
            raise ValueError(
                f"fit_exclude_largest: must leave at least two fit points, got {self.fit_exclude_largest}"
            )
        if self.checkpoints:
            if self.checkpoints < 0:
                raise ValueError("checkpoints: must be nonnegative")
            for tau in self.taus:
                try:
                    steps_for(self.T / self.checkpoints, tau)
                except ValueError:
                    raise ValueError(
                        f"checkpoints: T/{self.checkpoints} is not a multiple of tau={tau!r}"
                    ) from None

    @property
    def grid(self) -> Grid2D:
        return Grid2D(self.M)

    @property
    def data(self) -> RoughDataSpec:
        return RoughDataSpec(self.s, self.seed, Grid2D(self.M))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["taus"] = list(self.taus)
        return d


@dataclass
class ConvergenceReport:
    rows: list[tuple[float, float]]
    fitted_order: float
    fit_range: tuple[float, float]
    metadata: dict = field(default_factory=dict)

    @property
    def taus(self) -> list[float]:
        return [t for t, _ in self.rows]

    @property
    def errors(self) -> list[float]:
        return [e for _, e in self.rows]

    @property
    def trusted(self) -> bool:
        """False when a reference self-check ran and failed."""
        chk = self.metadata.get("reference_check")
        return chk is None or bool(chk["passed"])

    def csv_text(self) -> str:
        lines = ["tau,l2_error"]
        lines += [f"{t!r},{e!r}" for t, e in self.rows]
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "fitted_order": self.fitted_order,
            "fit_range": list(self.fit_range),
            "rows": [list(r) for r in self.rows],
            **self.metadata,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ConvergenceReport":
        meta = {k: v for k, v in d.items() if k not in ("fitted_order", "fit_range", "rows")}
        return cls(
            rows=[(float(t), float(e)) for t, e in d["rows"]],
            fitted_order=float(d["fitted_order"]),
            fit_range=tuple(d["fit_range"]),
            metadata=meta,
        )


def fit_order(rows: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``log2(error)`` against ``log2(tau)``."""
    if len(rows) < 2:
        raise ValueError(f"need at least two (tau, error) rows to fit an order, got {len(rows)}")
    taus = np.array([r[0] for r in rows], dtype=float)
    errs = np.array([r[1] for r in rows], dtype=float)
    if np.any(~np.isfinite(errs)) or np.any(errs <= 0):
        raise ValueError("errors must be finite and positive to fit an order")
    if np.any(taus <= 0):
        raise ValueError("time steps must be positive")
    x = np.log2(taus)
    y = np.log2(errs)
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0:
        raise ValueError("all time steps are equal; the slope is undefined")
    return float(xc @ (y - y.mean()) / denom)


def trend_ok(rows: Sequence[tuple[float, float]], max_inversions: int = 1, tolerance: float = 0.2) -> bool:
    """Errors decrease with tau, allowing ``max_inversions`` small upticks.

    ``rows`` are ordered by decreasing tau.  An uptick counts as small when
    the error grows by at most ``tolerance`` relative to its predecessor.
    """
    inversions = 0
    for (_, e0), (_, e1) in zip(rows, rows[1:]):
        if e1 > e0:
            if e1 > e0 * (1 + tolerance):
                return False
            inversions += 1
    return inversions <= max_inversions


def _initial(cfg: ExperimentConfig, u0: Optional[SpectralField]) -> SpectralField:
    if u0 is None:
        return generate(cfg.data)
    if u0.grid != cfg.grid:
        raise ValueError(f"initial data is on M={u0.grid.M}, config has M={cfg.M}")
    return u0


def _reference_run(cfg: ExperimentConfig, u0: SpectralField, tau_ref: float, integrator: Integrator):
    step_cfg = StepperConfig(tau_ref, cfg.mu, filtered=cfg.reference_filtered, dealias=cfg.dealias)
    if cfg.checkpoints:
        every = steps_for(cfg.T / cfg.checkpoints, tau_ref)
        return integrate(u0, step_cfg, steps_for(cfg.T, tau_ref), snapshot_every=every)
    return integrator(u0, step_cfg, steps_for(cfg.T, tau_ref))


def reference_solution(cfg: ExperimentConfig, u0: Optional[SpectralField] = None,
                       integrator: Integrator = integrate) -> SpectralField:
    """Fine-step solution at ``T``.

    With ``reference_filtered`` the cutoff ``tau_ref^{-1/2}`` lies beyond
    the grid, so this is plain Lie splitting at step ``tau_ref``.
    """
    u0 = _initial(cfg, u0)
    return _reference_run(cfg, u0, cfg.tau_ref, integrator).final


def reference_check(cfg: ExperimentConfig, reference: SpectralField, smallest_error: float,
                    u0: Optional[SpectralField] = None) -> dict:
    """Compare the reference with one at half the step.

    Passes when the change is below 10% of the smallest sweep error.
    """
    u0 = _initial(cfg, u0)
    finer = _reference_run(cfg, u0, cfg.tau_ref / 2, integrate).final
    change = l2_error(reference, finer)
    threshold = 0.1 * smallest_error
    return {"tau_ref_half": cfg.tau_ref / 2, "change": change,
            "threshold": threshold, "passed": bool(change < threshold)}


def _sweep_point(args):
    u0, cfg, tau, reference, ref_snaps, integrator = args
    n = steps_for(cfg.T, tau)
    step_cfg = StepperConfig(tau, cfg.mu, filtered=True, dealias=cfg.dealias)
    if ref_snaps is not None:
        every = steps_for(cfg.T / cfg.checkpoints, tau)
        res = integrate(u0, step_cfg, n, snapshot_every=every)
        errs = [l2_error(a, b) for (_, a), (_, b) in zip(res.snapshots, ref_snaps)]
        max_err = max(errs)
    else:
        res = integrator(u0, step_cfg, n)
        max_err = None
    if not np.all(np.isfinite(res.final.coeffs)):
        raise FloatingPointError(f"sweep run with tau={tau!r} produced non-finite values")
    return l2_error(res.final, reference), max_err


def run_sweep(
    cfg: ExperimentConfig,
    u0: Optional[SpectralField] = None,
    reference: Optional[SpectralField] = None,
    integrator: Integrator = integrate,
    jobs: int = 1,
) -> ConvergenceReport:
    """Filtered Lie runs for every ``tau`` in ``cfg.taus``, errors at ``T`` against the reference.

    ``integrator`` replaces :func:`integrate` for both the reference and
    the sweep (for testing the harness); checkpoint recording always uses
    :func:`integrate`.
    """
    u0 = _initial(cfg, u0)
    if not np.any(u0.coeffs):
        raise ValueError("initial data is identically zero; errors would all vanish")
    ref_snaps = None
    if reference is None:
        ref = _reference_run(cfg, u0, cfg.tau_ref, integrator)
        reference = ref.final
        ref_snaps = ref.snapshots
    elif cfg.checkpoints:
        raise ValueError("checkpoints need the reference trajectory; do not pass a precomputed reference")
    taus = sorted(cfg.taus, reverse=True)
    tasks = [(u0, cfg, tau, reference, ref_snaps, integrator) for tau in taus]
    try:
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
                results = list(pool.map(_sweep_point, tasks))
        else:
            results = [_sweep_point(t) for t in tasks]
    except FloatingPointError as exc:
        raise FloatingPointError(f"sweep aborted: {exc}") from None
    rows = [(tau, err) for tau, (err, _) in zip(taus, results)]
    for tau, err in rows:
        log.info("tau=%g  error=%.6e", tau, err)
        if not math.isfinite(err):
            raise FloatingPointError(f"sweep aborted: error for tau={tau!r} is not finite")
    fit_rows = rows[cfg.fit_exclude_largest:]
    order = fit_order(fit_rows)
    meta = {
        "config": cfg.to_dict(),
        "version": __version__,
        "excluded_taus": [t for t, _ in rows[: cfg.fit_exclude_largest]],
        "trend_ok": trend_ok(rows),
    }
    if ref_snaps is not None:
        meta["max_errors"] = [m for _, m in results]
    if cfg.reference_check:
        meta["reference_check"] = reference_check(cfg, reference, min(e for _, e in rows), u0=u0)
    return ConvergenceReport(
        rows=rows,
        fitted_order=order,
        fit_range=(fit_rows[-1][0], fit_rows[0][0]),
        metadata=meta,
    )


def resolution_study(cfg: ExperimentConfig, grids: Sequence[int], jobs: int = 1) -> list[ConvergenceReport]:
    """One sweep per grid size with the same seed and regularity."""
    return [run_sweep(cfg.replace(M=int(M)), jobs=jobs) for M in grids]


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def report_json(report: ConvergenceReport) -> str:
    return json.dumps(report.to_json_dict(), indent=2, sort_keys=True)
