"""Command-line entry point: ``torusnls {generate,run,converge,resolution,diagnose}``.

Every command reads a JSON config (``--config``), applies the ``NLS_SEED``
environment variable to the data seed, then ``--set key=value`` overrides,
validates, and writes its outputs atomically into ``--output``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .convergence import ExperimentConfig, default_jobs, resolution_study, run_sweep
from .integrators import StepperConfig, integrate
from .io import load_snapshot, save_snapshot, write_json, atomic_write
from .norms import (
    BourgainParams,
    TimeSequence,
    bourgain_norm_freq,
    bourgain_norm_time,
    hs_norm,
    l2_norm,
    lt4_norm,
)
from .rough_data import RoughDataSpec, generate
from .spectral import Grid2D

log = logging.getLogger("torusnls")

COMMANDS = ("generate", "run", "converge", "resolution", "diagnose")


class ConfigError(ValueError):
    pass


# key -> (required, default); a default of None with required=False means "absent"
_DATA_KEYS = {"s": (True, None), "seed": (True, None), "M": (True, None)}

_CONVERGE_KEYS = {
    **_DATA_KEYS,
    "T": (False, 1.0),
    "taus": (False, [2.0**-j for j in range(6, 14)]),
    "tau_ref": (False, 2.0**-16),
    "mu": (False, -1),
    "reference_filtered": (False, True),
    "dealias": (False, False),
    "fit_exclude_largest": (False, 0),
    "reference_check": (False, False),
    "checkpoints": (False, 0),
}

SCHEMAS = {
    "generate": dict(_DATA_KEYS),
    "run": {
        "input": (False, None),
        "s": (False, None),
        "seed": (False, None),
        "M": (False, None),
        "tau": (True, None),
        "mu": (False, -1),
        "filtered": (False, True),
        "dealias": (False, False),
        "n_steps": (False, None),
        "T": (False, None),
        "snapshot_every": (False, None),
    },
    "converge": dict(_CONVERGE_KEYS),
    "resolution": {**_CONVERGE_KEYS, "grids": (True, None)},
    "diagnose": {
        "s": (False, 0.5),
        "b": (False, 0.75),
        "b1": (False, 0.75),
        "seed": (False, None),
        "data_s": (False, None),
        "M": (False, None),
        "mu": (False, -1),
        "filtered": (False, True),
        "sequences": (True, None),
    },
}

_SEQUENCE_KEYS = {"tau", "n_steps", "snapshots"}


@dataclass
class RunConfig:
    tau: float
    n_steps: int
    mu: int = -1
    filtered: bool = True
    dealias: bool = False
    input: Optional[str] = None
    data: Optional[RoughDataSpec] = None
    snapshot_every: Optional[int] = None

    def stepper(self) -> StepperConfig:
        return StepperConfig(self.tau, self.mu, filtered=self.filtered, dealias=self.dealias)


@dataclass
class DiagnoseConfig:
    s: float
    b: float
    b1: float
    sequences: list[dict]
    mu: int = -1
    filtered: bool = True
    data: Optional[RoughDataSpec] = None
    raw: dict = field(default_factory=dict)


def parse_value(text: str) -> Any:
    """JSON value if possible, else a number (accepts ``+1``), else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _apply_overrides(raw: dict, overrides: Sequence[str], schema: dict) -> dict:
    out = dict(raw)
    env_seed = os.environ.get("NLS_SEED")
    if env_seed is not None and "seed" in schema:
        try:
            out["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"seed: NLS_SEED={env_seed!r} is not an integer") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        if key not in schema:
            raise ConfigError(f"{key}: unknown key")
        out[key] = parse_value(value)
    return out


def _require(d: dict, schema: dict) -> dict:
    unknown = sorted(set(d) - set(schema))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    full = {}
    for key, (required, default) in schema.items():
        if key in d:
            full[key] = d[key]
        elif required:
            raise ConfigError(f"{key}: required key is missing")
        else:
            full[key] = default
    return full


def _number(d, key, kind=float):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _flag(d, key):
    v = d[key]
    if not isinstance(v, bool):
        raise ConfigError(f"{key}: expected true or false, got {v!r}")
    return v


def _data_spec(d, s_key="s") -> RoughDataSpec:
    try:
        return RoughDataSpec(_number(d, s_key), _number(d, "seed", int), Grid2D(_number(d, "M", int)))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{s_key}/seed/M: {exc}") from None


def _load_raw(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {str(path)!r} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    # a convergence report can be fed back in through its config echo
    if "config" in raw and "fitted_order" in raw:
        raw = raw["config"]
    return raw


def parse_config(path, overrides: Sequence[str] = (), command: str = "converge"):
    """Read, override and validate a config for ``command``.

    Returns a :class:`RoughDataSpec` (generate), :class:`RunConfig` (run),
    :class:`ExperimentConfig` (converge), ``(ExperimentConfig, grids)``
    (resolution) or :class:`DiagnoseConfig` (diagnose).
    """
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    schema = SCHEMAS[command]
    raw = _load_raw(path) if path is not None else {}
    d = _require(_apply_overrides(raw, overrides, schema), schema)

    if command == "generate":
        return _data_spec(d)

    if command == "run":
        return _parse_run(d)

    if command in ("converge", "resolution"):
        taus = d["taus"]
        if not isinstance(taus, list) or not taus or not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in taus
        ):
            raise ConfigError(f"taus: expected a nonempty list of numbers, got {taus!r}")
        kwargs = dict(
            M=_number(d, "M", int), s=_number(d, "s"), seed=_number(d, "seed", int),
            T=_number(d, "T"), taus=tuple(float(t) for t in taus), tau_ref=_number(d, "tau_ref"),
            mu=_number(d, "mu", int), reference_filtered=_flag(d, "reference_filtered"),
            dealias=_flag(d, "dealias"), fit_exclude_largest=_number(d, "fit_exclude_largest", int),
            reference_check=_flag(d, "reference_check"), checkpoints=_number(d, "checkpoints", int),
        )
        try:
            cfg = ExperimentConfig(**kwargs)
        except ValueError as exc:
            msg = str(exc)
            raise ConfigError(msg if ":" in msg.split()[0] else f"config: {msg}") from None
        if command == "converge":
            return cfg
        grids = d["grids"]
        if not isinstance(grids, list) or not grids:
            raise ConfigError(f"grids: expected a nonempty list of grid sizes, got {grids!r}")
        checked = []
        for M in grids:
            try:
                checked.append(int(cfg.replace(M=int(M)).M))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"grids: {exc}") from None
        return cfg, checked

    return _parse_diagnose(d)


def _parse_run(d) -> RunConfig:
    tau = _number(d, "tau")
    has_data = any(d[k] is not None for k in ("s", "seed", "M"))
    if (d["input"] is None) == (not has_data):
        raise ConfigError("input: give either an input snapshot or s/seed/M, not both or neither")
    data = _data_spec(d) if has_data else None
    if (d["n_steps"] is None) == (d["T"] is None):
        raise ConfigError("n_steps: give exactly one of n_steps or T")
    if d["n_steps"] is not None:
        n = _number(d, "n_steps", int)
    else:
        T = _number(d, "T")
        n = round(T / tau)
        if abs(n - T / tau) > 1e-9 * max(1, n):
            raise ConfigError(f"T: {T!r} is not an integer multiple of tau={tau!r}")
    if n < 0:
        raise ConfigError("n_steps: must be nonnegative")
    every = None if d["snapshot_every"] is None else _number(d, "snapshot_every", int)
    cfg = RunConfig(tau=tau, n_steps=int(n), mu=_number(d, "mu", int), filtered=_flag(d, "filtered"),
                    dealias=_flag(d, "dealias"), input=d["input"], data=data, snapshot_every=every)
    try:
        cfg.stepper()
    except ValueError as exc:
        key = "tau" if "tau" in str(exc) else "mu"
        raise ConfigError(f"{key}: {exc}") from None
    return cfg


def _parse_diagnose(d) -> DiagnoseConfig:
    seqs = d["sequences"]
    if not isinstance(seqs, list) or not seqs:
        raise ConfigError("sequences: expected a nonempty list")
    needs_data = False
    for i, q in enumerate(seqs):
        if not isinstance(q, dict):
            raise ConfigError(f"sequences[{i}]: expected an object")
        unknown = sorted(set(q) - _SEQUENCE_KEYS)
        if unknown:
            raise ConfigError(f"sequences[{i}].{unknown[0]}: unknown key")
        if "tau" not in q:
            raise ConfigError(f"sequences[{i}].tau: required key is missing")
        if ("snapshots" in q) == ("n_steps" in q):
            raise ConfigError(f"sequences[{i}]: give exactly one of snapshots or n_steps")
        needs_data |= "n_steps" in q
    data = None
    if needs_data:
        for key in ("seed", "data_s", "M"):
            if d[key] is None:
                raise ConfigError(f"{key}: required to generate sequences from rough data")
        data = _data_spec(d, s_key="data_s")
    return DiagnoseConfig(s=_number(d, "s"), b=_number(d, "b"), b1=_number(d, "b1"), sequences=seqs,
                          mu=_number(d, "mu", int), filtered=_flag(d, "filtered"), data=data, raw=d)


# --- commands -----------------------------------------------------------------


def _cmd_generate(spec: RoughDataSpec, out: Path, jobs: int) -> None:
    save_snapshot(out / "u0.nls2", generate(spec))
    write_json(out / "u0.json", {"s": spec.s, "seed": spec.seed, "M": spec.grid.M})


def _cmd_run(cfg: RunConfig, out: Path, jobs: int) -> None:
    u0 = load_snapshot(cfg.input) if cfg.input is not None else generate(cfg.data)
    res = integrate(u0, cfg.stepper(), cfg.n_steps, snapshot_every=cfg.snapshot_every)
    save_snapshot(out / "final.nls2", res.final)
    names = []
    for i, (t, f) in enumerate(res.snapshots or []):
        name = f"snapshot_{i:05d}.nls2"
        save_snapshot(out / name, f)
        names.append({"t": t, "file": name})
    write_json(out / "run.json", {
        "tau": cfg.tau, "n_steps": cfg.n_steps, "mu": cfg.mu, "filtered": cfg.filtered,
        "dealias": cfg.dealias, "input": cfg.input,
        "data": None if cfg.data is None else {"s": cfg.data.s, "seed": cfg.data.seed, "M": cfg.data.grid.M},
        "mass_trace": res.mass_trace, "snapshots": names, "version": __version__,
    })


def _write_report(report, out: Path, stem: str) -> None:
    atomic_write(out / f"{stem}.csv", report.csv_text())
    write_json(out / f"{stem}.json", report.to_json_dict())


def _cmd_converge(cfg: ExperimentConfig, out: Path, jobs: int) -> None:
    report = run_sweep(cfg, jobs=jobs)
    _write_report(report, out, "convergence")
    print(f"fitted order {report.fitted_order:.4f} (s/2 = {cfg.s / 2:.4f})")


def _cmd_resolution(parsed, out: Path, jobs: int) -> None:
    cfg, grids = parsed
    reports = resolution_study(cfg, grids, jobs=jobs)
    summary = []
    for M, rep in zip(grids, reports):
        _write_report(rep, out, f"resolution_M{M}")
        summary.append({"M": M, "fitted_order": rep.fitted_order})
        print(f"M={M}: fitted order {rep.fitted_order:.4f}")
    write_json(out / "resolution.json", {"s": cfg.s, "seed": cfg.seed, "grids": summary})


def _sequence(cfg: DiagnoseConfig, q: dict) -> TimeSequence:
    tau = float(q["tau"])
    if "snapshots" in q:
        return TimeSequence(tau, [load_snapshot(p) for p in q["snapshots"]])
    n = int(q["n_steps"])
    u0 = generate(cfg.data)
    res = integrate(u0, StepperConfig(tau, cfg.mu, filtered=cfg.filtered), max(n - 1, 0), snapshot_every=1)
    return TimeSequence.from_snapshots(tau, res.snapshots)


def diagnose_sequence(seq: TimeSequence, s: float, b: float, b1: float) -> dict:
    """Norms and ratios of one sequence as a JSON-ready dict."""
    xf = bourgain_norm_freq(seq, BourgainParams(s, b))
    xt = bourgain_norm_time(seq, BourgainParams(s, b))
    x1 = xf if b1 == b else bourgain_norm_freq(seq, BourgainParams(s, b1))
    l4 = lt4_norm(seq)
    hs_max = max(hs_norm(f, s) for f in seq.fields)
    values = {
        "l2_tau_l2": bourgain_norm_freq(seq, BourgainParams(0.0, 0.0)),
        "max_l2": max(l2_norm(f) for f in seq.fields),
        "max_hs": hs_max,
        "bourgain_freq": xf,
        "bourgain_time": xt,
        "bourgain_b1": x1,
        "l4_l4": l4,
    }
    ratios = {
        "time_over_freq": xt / xf if xf else None,
        "strichartz": l4 / x1 if x1 and b1 > 0.5 else None,
        "linf_embedding": hs_max / xf if xf and b > 0.5 else None,
    }
    return {"params": {"tau": seq.tau, "N": len(seq), "M": seq.grid.M, "s": s, "b": b, "b1": b1},
            "values": values, "ratios": ratios}


def _cmd_diagnose(cfg: DiagnoseConfig, out: Path, jobs: int) -> None:
    results = []
    for q in cfg.sequences:
        entry = diagnose_sequence(_sequence(cfg, q), cfg.s, cfg.b, cfg.b1)
        entry["source"] = q
        results.append(entry)
    write_json(out / "diagnose.json", {"sequences": results, "version": __version__})


_DISPATCH = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "converge": _cmd_converge,
    "resolution": _cmd_resolution,
    "diagnose": _cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torusnls", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
        p.add_argument("--output", default="results", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        parsed = parse_config(args.config, args.overrides, args.command)
        _DISPATCH[args.command](parsed, Path(args.output), jobs)
    except Exception as exc:  # one-line diagnostic for any failure
        log.debug("command failed", exc_info=True)
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
