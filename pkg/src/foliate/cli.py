"""Command line entry point: ``foliate run | validate | list-experiments``.

A configuration is an INI file with the sections ``[experiment]``,
``[model]``, ``[gap]`` and ``[solver]``.  Every key is checked against the
schema of the chosen experiment; unknown keys are errors.  Lists are comma
separated.  Run ``foliate list-experiments`` to print each schema.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import inspect
import json
import math
import platform
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import (ConfigError, DivergenceError, GapConditionError, InfeasibleTailError,
                     IterationLimitError)
from .experiments import EXPERIMENTS, ExperimentOutput, Table, build_model, rate_defaults
from .model import SpectralGap
from .stable import METHODS
from .tracking import UPDATES

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_LIMIT = 0, 2, 3, 4

SECTIONS = ("experiment", "model", "gap", "solver")


@dataclass(frozen=True)
class Schema:
    """Schema of one experiment: which keyword lands in which section."""

    model_kinds: tuple[str, ...]
    sections: dict
    tracking: bool = False
    check_gap: bool = True


_SCHEMAS = {
    "toy-stable-leaf": Schema(("toy",), {
        "model": ("p",),
        "gap": ("delta", "sigma"),
        "solver": ("h", "t_end", "j_iterations", "pwconst_iterations", "pwconst_h0", "pwconst_n0",
                   "initial"),
        "experiment": ("x_tilde", "base_tilde"),
    }),
    "toy-tracking": Schema(("toy",), {
        "model": ("p",),
        "gap": ("delta", "sigma"),
        "solver": ("method", "h", "t_end", "j_iterations", "j_sweep", "update", "max_outer",
                   "outer_tol"),
        "experiment": ("base_tilde", "start"),
    }, tracking=True),
    "kse-inertial-pwconst-aitken": Schema(("kse",), {
        "model": ("n_modes", "gamma", "dim_y", "rho"),
        "gap": ("delta",),
        "solver": ("j_iterations", "h0", "n0"),
        "experiment": ("ref_modes", "ref_time"),
    }),
    "kse-inertial-simp-gapsweep": Schema(("kse",), {
        "model": ("n_modes", "gamma", "rho"),
        "gap": ("delta",),
        "solver": ("h", "n_points", "max_iterations", "tol"),
        "experiment": ("dims", "ref_modes", "ref_time"),
    }, check_gap=False),
    "aif-leaf-equivalence": Schema(("aif",), {
        "model": ("gamma", "dim_y", "rho", "band"),
        "gap": ("delta",),
        "solver": ("h", "j_iterations", "rk_step"),
        "experiment": ("z1_modes", "z2_modes", "x_offsets", "horizon"),
    }),
    "rate-compare": Schema(("aif", "kse8"), {
        "model": ("rho",),
        "gap": ("delta",),
        "solver": ("h", "unstable_t_end", "j_iterations", "max_outer", "outer_tol", "rk_step"),
        "experiment": ("z0_modes", "window"),
    }, tracking=True),
    "rate-sweep": Schema(("aif", "kse8"), {
        "model": ("rho",),
        "gap": ("delta",),
        "solver": ("h", "unstable_t_end", "j_iterations", "max_outer", "outer_tol", "rk_step",
                   "workers"),
        "experiment": ("n_samples", "ball_radius", "window"),
    }, tracking=True),
}

# keywords whose ``None`` default hides that they are numbers
_OPTIONAL_FLOATS = {"rho", "delta", "h", "unstable_t_end", "window", "ball_radius", "rk_step"}

# string keywords with a closed set of values
_CHOICES = {"method": METHODS, "update": UPDATES, "initial": ("exponential", "constant")}


@dataclass
class ResolvedConfig:
    experiment: str
    params: dict
    seed: int
    output: Path
    write_dat: bool
    source: str


def _parse_value(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, tuple):
            items = [s for s in raw.replace(" ", "").split(",") if s]
            if not items:
                raise ValueError("empty list")
            if all(isinstance(v, int) for v in default):
                return tuple(int(s) for s in items)
            return tuple(float(s) for s in items)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float) or name in _OPTIONAL_FLOATS:
            if raw.lower() == "none":
                return None
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError("not finite")
            return val
        if name in _CHOICES and raw not in _CHOICES[name]:
            raise ValueError(f"expected one of {list(_CHOICES[name])}")
        return raw
    except ValueError as exc:
        raise ConfigError(f"key {name!r}: cannot parse {raw!r} ({exc})") from None


def _defaults(exp_id: str) -> dict:
    sig = inspect.signature(EXPERIMENTS[exp_id])
    return {k: p.default for k, p in sig.parameters.items()}


def load_config(path: str | Path, seed: int | None = None, out: str | None = None) -> ResolvedConfig:
    """Parse and strictly check a configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    unknown = [s for s in cp.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown section(s) {unknown}; allowed: {list(SECTIONS)}")
    if not cp.has_option("experiment", "id"):
        raise ConfigError("[experiment] needs an 'id' (see 'foliate list-experiments')")
    exp_id = cp.get("experiment", "id").strip()
    if exp_id not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp_id!r}; choose from {sorted(EXPERIMENTS)}")
    schema = _SCHEMAS[exp_id]
    defaults = _defaults(exp_id)
    params = dict(defaults)
    meta = {"id": None, "seed": None, "output": None, "dat": None}

    for section in SECTIONS:
        if not cp.has_section(section):
            continue
        allowed = set(schema.sections.get(section, ()))
        if section == "model":
            allowed.add("kind")
        for key, raw in cp.items(section):
            if section == "experiment" and key in meta:
                meta[key] = raw
                continue
            if key not in allowed:
                shown = allowed | (set(meta) if section == "experiment" else set())
                raise ConfigError(f"unknown key {key!r} in [{section}] for {exp_id}; "
                                  f"allowed: {sorted(shown)}")
            if key == "kind":
                kind = raw.strip()
                if kind not in schema.model_kinds:
                    raise ConfigError(f"model kind {kind!r} not valid for {exp_id}; "
                                      f"allowed: {list(schema.model_kinds)}")
                if "model" in defaults:
                    params["model"] = kind
                continue
            params[key] = _parse_value(key, raw, defaults[key])

    if exp_id == "rate-sweep" and meta["seed"] is None and seed is None:
        raise ConfigError("rate-sweep needs a seed ([experiment] seed = N or --seed N)")
    try:
        cfg_seed = int(meta["seed"]) if meta["seed"] is not None else 0
    except ValueError:
        raise ConfigError(f"seed must be an integer, got {meta['seed']!r}") from None
    seed = cfg_seed if seed is None else int(seed)
    if "seed" in params:
        params["seed"] = seed
    if "model" in params and params["model"] is not None:
        # fill model-dependent defaults so the manifest records them
        for k, v in rate_defaults(params["model"]).items():
            if k in params and params[k] is None:
                params[k] = v
    write_dat = _parse_value("dat", meta["dat"], True) if meta["dat"] is not None else True
    output = Path(out) if out else Path(meta["output"] or f"out/{exp_id}")
    return ResolvedConfig(exp_id, params, seed, output, write_dat, str(path))


def _experiment_gap(rc: ResolvedConfig) -> SpectralGap | None:
    """Build the spectral constants the run will use, raising on a violated gap."""
    schema, p = _SCHEMAS[rc.experiment], rc.params
    if not schema.check_gap:
        return None
    if "toy" in schema.model_kinds:
        gap = SpectralGap(-1.0, 1.0, p["delta"], p["sigma"])
    elif rc.experiment in ("rate-compare", "rate-sweep"):
        system = build_model(**{"aif": dict(kind="aif", gamma=25.0, dim_y=2),
                                "kse8": dict(kind="kse", n_modes=8, gamma=32.0, dim_y=4)}[p["model"]])
        gap = SpectralGap.for_system(system, p["delta"])
    else:
        kind = schema.model_kinds[0]
        keys = {k: p[k] for k in ("n_modes", "gamma", "dim_y", "rho", "band") if k in p}
        gap = SpectralGap.for_system(build_model(kind, **keys), p["delta"])
    if schema.tracking:
        gap.require_tracking()
    return gap


def validate(rc: ResolvedConfig) -> SpectralGap | None:
    try:
        return _experiment_gap(rc)
    except GapConditionError as exc:
        raise ConfigError(f"spectral gap check failed: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.16e}"


def write_csv(path: Path, table: Table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])


def write_dat(path: Path, table: Table):
    with open(path, "w") as fh:
        fh.write("# " + " ".join(table.columns) + "\n")
        for row in table.rows:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
    stub = path.with_suffix(".gp")
    ycols = ", ".join(f"'{path.name}' using 1:{k + 2} title '{c}' with linespoints"
                      for k, c in enumerate(table.columns[1:3]))
    stub.write_text(f"# gnuplot stub for {path.name}\nset logscale y\nplot {ycols}\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(rc: ResolvedConfig, status: str, outputs: list[str], summary: dict | None,
                   error: dict | None, elapsed: float, warned: list[str] | None = None):
    manifest = {
        "experiment": rc.experiment,
        "config_file": rc.source,
        "seed": rc.seed,
        "parameters": rc.params,
        "status": status,
        "outputs": outputs,
        "summary": summary or {},
        "error": error,
        "warnings": warned or [],
        "elapsed_seconds": round(elapsed, 3),
        "versions": {"foliate": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
    }
    rc.output.mkdir(parents=True, exist_ok=True)
    (rc.output / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n")


def run(rc: ResolvedConfig) -> int:
    rc.output.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        validate(rc)
    except ConfigError as exc:
        write_manifest(rc, "config-error", [], None, {"type": "ConfigError", "message": str(exc)},
                       time.perf_counter() - t0)
        raise
    code, status, error, outputs, summary = EXIT_OK, "ok", None, [], None
    caught: list = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result: ExperimentOutput = EXPERIMENTS[rc.experiment](**rc.params)
    except (DivergenceError, FloatingPointError) as exc:
        code, status = EXIT_DIVERGED, "diverged"
        error = {"type": type(exc).__name__, "message": str(exc),
                 "side": getattr(exc, "side", None), "iteration": getattr(exc, "iteration", None)}
    except IterationLimitError as exc:
        code, status = EXIT_LIMIT, "iteration-limit"
        error = {"type": "IterationLimitError", "message": str(exc), "history": exc.history}
    except (InfeasibleTailError, GapConditionError) as exc:
        code, status = EXIT_CONFIG, "config-error"
        error = {"type": type(exc).__name__, "message": str(exc)}
    else:
        summary = result.summary
        for name, table in result.tables.items():
            write_csv(rc.output / f"{name}.csv", table)
            outputs.append(f"{name}.csv")
            if rc.write_dat:
                write_dat(rc.output / f"{name}.dat", table)
                outputs += [f"{name}.dat", f"{name}.gp"]
    messages = sorted({str(w.message) for w in caught})
    write_manifest(rc, status, outputs, summary, error, time.perf_counter() - t0,
                   warned=messages)
    if messages:
        print(f"foliate: {len(caught)} solver warning(s), see manifest.json", file=sys.stderr)
    if error:
        print(f"foliate: {status}: {error['message']}", file=sys.stderr)
    return code


def describe_experiments() -> str:
    lines = []
    for exp_id in EXPERIMENTS:
        schema, defaults = _SCHEMAS[exp_id], _defaults(exp_id)
        lines.append(f"{exp_id}  (model kind: {' | '.join(schema.model_kinds)})")
        doc = inspect.getdoc(EXPERIMENTS[exp_id]) or ""
        lines.append(f"    {doc.splitlines()[0] if doc else ''}")
        for section in SECTIONS:
            keys = schema.sections.get(section, ())
            if keys:
                body = ", ".join(f"{k}={defaults[k]!r}" for k in keys)
                lines.append(f"    [{section}] {body}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="foliate", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None)
    p_val = sub.add_parser("validate", help="check a configuration without running it")
    p_val.add_argument("config")
    sub.add_parser("list-experiments", help="print experiment ids and their keys")
    args = ap.parse_args(argv)

    if args.command == "list-experiments":
        print(describe_experiments())
        return EXIT_OK
    try:
        if args.command == "validate":
            rc = load_config(args.config)
            gap = validate(rc)
            extra = f" (alpha={gap.alpha:g}, beta={gap.beta:g}, kappa={gap.kappa:.4g})" if gap else ""
            print(f"{args.config}: ok, experiment {rc.experiment}{extra}")
            return EXIT_OK
        rc = load_config(args.config, seed=args.seed, out=args.out)
        return run(rc)
    except ConfigError as exc:
        print(f"foliate: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
