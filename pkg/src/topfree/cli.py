"""Command-line experiment runner.

Every run writes ``<outdir>/<command>-<hash>/`` containing ``manifest.json``,
``timing.json`` and ``data/*.csv``.  The manifest holds the merged
configuration, its hash, the outputs and every warning raised on the way; it
is a pure function of the configuration, so reruns can be compared byte for
byte.  Wall-clock time and worker count go to ``timing.json``.

Exit codes: 0 success, 2 invalid configuration, 3 runtime failure,
4 output directory not writable.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import __version__
from .entropy import (
    MAX_VOLUME_DIM,
    MAX_VOLUME_PARAMS,
    ball_covering_bounds_check,
    delta_top_estimate,
    estimate_gamma_measure,
    estimate_volume_ball,
    estimate_volume_gaussian,
    ht_check,
    linear_semicircular_norm,
    sampling_radius,
    trace_pinning_check,
)
from .linalg import opnorm_batch
from .microstates import MicrostateSpec
from .ncpoly import parse_poly
from .potential import (
    RealCompact,
    arcsine_density,
    chi_one_var,
    density_l1,
    equilibrium_measure,
    potential,
    reference_density,
    semicircle_entropy_values,
)
from .presets import parse_preset
from .randmat import SamplerConfig, gue_array

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_UNWRITABLE = 0, 2, 3, 4
OUTDIR_ENV = "TOPFREE_OUTDIR"
DEFAULT_OUTDIR = "runs"

DEFAULTS: dict[str, dict[str, Any]] = {
    "capacity": {"intervals": "[-1,1]", "grid": 2000},
    "eqmeasure": {"intervals": "[-1,1]", "grid": 2000, "reference": None, "reference_grid": 4000},
    "gue-norms": {"n": 1, "dims": [50, 100, 200], "samples": 20},
    "gamma-measure": {"preset": "semicircular:1", "spec": None, "k": [200], "eps": 0.5, "samples": 200,
                      "degree": 3, "combos": []},
    "volume": {"preset": "interval:-2,2", "spec": None, "k": [1], "eps": 0.1, "samples": 100000,
               "estimator": "ball", "radius": None, "degree": 3, "combos": []},
    "covering": {"k": [2], "n": 1, "radius": 1.0, "eps_list": [1.0, 0.7, 0.5, 0.35, 0.25], "samples": 40000,
                 "metric": "uniform"},
    "dimension": {"preset": "ball:1", "spec": None, "k": [1, 2, 3], "eps_list": [0.4, 0.2, 0.1], "samples": 3000,
                  "metric": "uniform", "min_accepted": 10, "degree": 3, "combos": []},
    "ht-check": {"n": 1, "poly": "X1", "dims": [50, 100, 200, 400], "trials": 20},
    "trace-pinning": {"k": [200], "n": 1, "eps": 0.5, "samples": 100, "deltas": [0.05, 0.1, 0.2]},
}
DEFAULT_SEED = 0


class ConfigError(ValueError):
    pass


def _schema(name: str) -> dict:
    return json.loads(resources.files("topfree").joinpath("schemas", name).read_text())


def num(v):
    """JSON-safe number: non-finite floats become strings."""
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, (np.floating, np.integer)):
        return num(v.item())
    return v


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return num(obj)


@dataclass
class Result:
    outputs: dict = field(default_factory=dict)
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# helpers shared by commands


def _spec_for(p: dict, k: int, eps: float) -> tuple[MicrostateSpec, str]:
    if p.get("spec"):
        try:
            obj = json.loads(Path(p["spec"]).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read spec file {p['spec']!r}: {e}") from e
        obj = dict(obj, k=k, epsilon=eps)
        return MicrostateSpec.from_json(obj), f"file:{p['spec']}"
    if not p.get("preset"):
        raise ConfigError("either preset or spec is required")
    return parse_preset(p["preset"], k=k, epsilon=eps, degree=p.get("degree", 3), combos=p.get("combos", [])), p["preset"]


def _family(p: dict) -> dict:
    """Constraint family actually used, for the manifest."""
    spec, source = _spec_for(p, 1, p.get("eps", 0.1) if "eps" in p else 0.1)
    return {"source": source, "n": spec.n, "m": spec.m,
            "constraints": spec.to_json()["constraints"]}


def _flagged(prefix: str, flags) -> list[str]:
    return [f"{prefix}: {f}" for f in flags]


# ---------------------------------------------------------------------------
# commands; each prepare() validates and returns the runner


def prep_capacity(p: dict, workers: int) -> Callable[[], Result]:
    K = RealCompact.parse(p["intervals"])

    def run() -> Result:
        res = equilibrium_measure(K, p["grid"])
        r = Result(outputs=res.to_json())
        if res.measure is not None:
            r.outputs["potential_spread"] = res.potential_spread()
            r.tables["measure"] = (["x", "weight"], [[x, w] for x, w in zip(res.measure.points, res.measure.weights)])
        if not res.converged:
            r.warnings.append(f"equilibrium solver stopped at {res.iterations} iterations with gap {res.gap:.3e}")
        return r

    return run


def prep_eqmeasure(p: dict, workers: int) -> Callable[[], Result]:
    K = RealCompact.parse(p["intervals"])

    def run() -> Result:
        res = equilibrium_measure(K, p["grid"])
        r = Result(outputs=res.to_json())
        if not res.converged:
            r.warnings.append(f"equilibrium solver stopped at {res.iterations} iterations with gap {res.gap:.3e}")
        mu = res.measure
        if mu is not None:
            u = potential(mu, mu.points)
            r.outputs["potential_spread"] = float(u.max() - u.min())
            r.tables["measure"] = (["x", "weight", "density", "potential"],
                                   [list(row) for row in zip(mu.points, mu.weights, mu.weights / mu.widths, u)])
            if len(K.proper) == 1:
                a, b = K.proper[0]
                mid, half = 0.5 * (a + b), 0.5 * (b - a)
                r.outputs["arcsine_l1_inner"] = density_l1(
                    mu, lambda t: arcsine_density(t, a, b), mid - 0.95 * half, mid + 0.95 * half)
        if p.get("reference"):
            ref = reference_density(p["reference"], p["reference_grid"])
            r.outputs["reference"] = {"name": p["reference"], "chi": chi_one_var(ref),
                                      "second_moment": ref.moment(2)}
            if p["reference"] == "semicircle":
                r.outputs["reference"].update(semicircle_entropy_values(1))
                r.outputs["reference"]["quadrature_minus_energy_formula"] = (
                    r.outputs["reference"]["chi"] - r.outputs["reference"]["energy_formula"])
        return r

    return run


def prep_gue_norms(p: dict, workers: int) -> Callable[[], Result]:
    def run() -> Result:
        r = Result()
        rows, summary = [], []
        for k in p["dims"]:
            x = gue_array(SamplerConfig(k, p["n"], p["seed"]), 0, p["samples"], workers)
            v = opnorm_batch(x)
            for i in range(v.shape[0]):
                for j in range(v.shape[1]):
                    rows.append([k, i, j + 1, v[i, j]])
            summary.append({"k": k, "mean": float(v.mean()), "std": float(v.std(ddof=1)) if v.size > 1 else 0.0})
        r.outputs["per_dim"] = summary
        r.tables["norms"] = (["k", "index", "component", "norm"], rows)
        return r

    return run


def prep_gamma(p: dict, workers: int) -> Callable[[], Result]:
    specs = [_spec_for(p, k, p["eps"])[0] for k in p["k"]]

    def run() -> Result:
        r = Result(outputs={"family": _family(p), "cells": []})
        rows = []
        for spec in specs:
            g = estimate_gamma_measure(spec, p["samples"], p["seed"], workers)
            r.outputs["cells"].append({"k": spec.k, "epsilon": spec.epsilon, "probability": g.probability,
                                       "std_error": g.std_error, "hits": g.hits, "samples": g.samples,
                                       "seed": p["seed"]})
            rows.append([spec.k, spec.epsilon, g.samples, g.hits, g.probability, g.std_error, p["seed"]])
            if g.hits == 0:
                r.warnings.append(f"gamma-measure k={spec.k}: zero_hits (probability below 1/{g.samples})")
        r.tables["gamma"] = (["k", "epsilon", "samples", "hits", "probability", "std_error", "seed"], rows)
        return r

    return run


def prep_volume(p: dict, workers: int) -> Callable[[], Result]:
    specs = [_spec_for(p, k, p["eps"])[0] for k in p["k"]]
    for s in specs:
        if s.m != 0:
            raise ConfigError("volume estimation needs m = 0")
        if s.k > MAX_VOLUME_DIM or s.n * s.k**2 > MAX_VOLUME_PARAMS:
            raise ConfigError(f"volume estimation is limited to k <= {MAX_VOLUME_DIM} and n k^2 <= {MAX_VOLUME_PARAMS}")

    def run() -> Result:
        r = Result(outputs={"family": _family(p), "estimates": []})
        rows = []
        for spec in specs:
            ests = []
            if p["estimator"] in ("ball", "both"):
                R = p["radius"] if p["radius"] is not None else sampling_radius(spec)
                ests.append((R, estimate_volume_ball(spec, R, p["samples"], p["seed"], workers)))
            if p["estimator"] in ("gaussian", "both"):
                ests.append((None, estimate_volume_gaussian(spec, p["samples"], p["seed"], workers)))
            for R, v in ests:
                d = v.to_json()
                d["radius"] = R
                d["seed"] = p["seed"]
                r.outputs["estimates"].append(d)
                r.warnings += _flagged(f"volume k={v.k} {v.estimator}", v.flags)
                rows.append([v.k, v.estimator, "" if R is None else R, v.samples_used, v.hits, v.raw_log_vol,
                             v.std_error, v.normalized, v.normalized_std_error, ";".join(v.flags), p["seed"]])
        r.tables["volume"] = (["k", "estimator", "radius", "samples", "hits", "raw_log_vol", "std_error",
                               "normalized", "normalized_std_error", "flags", "seed"], rows)
        return r

    return run


def prep_covering(p: dict, workers: int) -> Callable[[], Result]:
    if any(e > p["radius"] for e in p["eps_list"]):
        raise ConfigError("each eps must be at most the radius")
    if len(p["eps_list"]) < 2:
        raise ConfigError("covering needs at least two eps values")

    def run() -> Result:
        r = Result(outputs={"reports": []})
        rows = []
        for k in p["k"]:
            rep = ball_covering_bounds_check(k, p["radius"], p["eps_list"], p["samples"], p["seed"],
                                             p["metric"], p["n"], workers)
            r.outputs["reports"].append(rep.to_json())
            if not rep.slope_ok:
                r.warnings.append(f"covering k={k}: fitted exponent ratio {rep.exponent_ratio:.3f} outside [0.7, 1.3]")
            for row in rep.rows:
                rows.append([k, row["epsilon"], row["net_size"], row["normalized"], row["C"]])
        r.tables["covering"] = (["k", "epsilon", "net_size", "normalized", "C"], rows)
        return r

    return run


def prep_dimension(p: dict, workers: int) -> Callable[[], Result]:
    eps = p["eps_list"]
    if len(eps) < 3 or any(a <= b for a, b in zip(eps, eps[1:])):
        raise ConfigError("eps_list needs at least three strictly decreasing values")
    for k in p["k"]:
        s = _spec_for(p, k, eps[0])[0]
        if s.m != 0:
            raise ConfigError("dimension estimates need m = 0")

    def run() -> Result:
        rep = delta_top_estimate(lambda k, e: _spec_for(p, k, e)[0], p["k"], eps, p["samples"], p["seed"],
                                 p["metric"], p["min_accepted"], workers)
        r = Result(outputs={"family": _family(p), "report": rep.to_json()})
        r.warnings += list(rep.flags)
        r.tables["cells"] = (["k", "epsilon", "R", "accepted", "net_size", "normalized", "excluded"],
                             [[c["k"], c["epsilon"], c["R"], c["accepted"], "" if c["net_size"] is None else c["net_size"],
                               "" if c["normalized"] is None else c["normalized"], c["excluded"]] for c in rep.cells])
        r.tables["D"] = (["epsilon", "abs_log_eps", "D"], [[e, -math.log(e), rep.D[e]] for e in eps])
        return r

    return run


def prep_ht(p: dict, workers: int) -> Callable[[], Result]:
    poly = parse_poly(p["poly"], p["n"])

    def run() -> Result:
        ref = linear_semicircular_norm(poly)
        rows = ht_check(poly, p["dims"], p["trials"], p["seed"], ref, workers)
        r = Result(outputs={"poly": p["poly"], "reference": ref,
                            "rows": [{"k": x.k, "mean": x.mean, "std": x.std, "abs_error": x.abs_error} for x in rows]})
        errs = [x.abs_error for x in rows]
        if ref is not None:
            r.outputs["error_monotone"] = all(a > b for a, b in zip(errs, errs[1:]))
            r.outputs["relative_error_last"] = errs[-1] / ref
        else:
            r.warnings.append("no closed-form limit for this polynomial; only means are reported")
        r.tables["summary"] = (["k", "mean", "std", "abs_error"],
                               [[x.k, x.mean, x.std, "" if x.abs_error is None else x.abs_error] for x in rows])
        return r

    return run


def prep_pinning(p: dict, workers: int) -> Callable[[], Result]:
    def run() -> Result:
        r = Result(outputs={"reports": []})
        rows = []
        for k in p["k"]:
            rep = trace_pinning_check(k, p["eps"], p["samples"], p["seed"], p["n"], p["deltas"], workers)
            r.outputs["reports"].append(rep.to_json())
            r.warnings += _flagged(f"trace-pinning k={k}", rep.flags)
            for d, f in rep.fractions.items():
                rows.append([k, d, rep.accepted, f])
        r.tables["fractions"] = (["k", "delta", "accepted", "fraction"], rows)
        return r

    return run


COMMANDS: dict[str, Callable[[dict, int], Callable[[], Result]]] = {
    "capacity": prep_capacity,
    "eqmeasure": prep_eqmeasure,
    "gue-norms": prep_gue_norms,
    "gamma-measure": prep_gamma,
    "volume": prep_volume,
    "covering": prep_covering,
    "dimension": prep_dimension,
    "ht-check": prep_ht,
    "trace-pinning": prep_pinning,
}


# ---------------------------------------------------------------------------
# configuration, hashing and persistence


def merge_config(command: str, flags: dict, file_params: dict | None) -> dict:
    """Defaults, then explicit flags, then the config file (file wins)."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    params = {"seed": DEFAULT_SEED, **DEFAULTS[command]}
    params.update({k: v for k, v in flags.items() if v is not None})
    if file_params:
        params.update(file_params)
    cfg = {"command": command, "parameters": params}
    try:
        jsonschema.validate(cfg, _schema("config.schema.json"))
    except jsonschema.ValidationError as e:
        raise ConfigError(f"invalid configuration: {e.message}") from e
    unknown = set(params) - set(DEFAULTS[command]) - {"seed"}
    if unknown:
        raise ConfigError(f"parameters not used by {command}: {sorted(unknown)}")
    return cfg


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _csv_bytes(header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue().encode()


def _fresh_dir(base: Path, name: str) -> Path:
    d = base / name
    r = 1
    while d.exists():
        r += 1
        d = base / f"{name}-r{r}"
    return d


def run_config(cfg: dict, outdir: Path, workers: int = 1) -> tuple[Path, dict]:
    """Run a validated configuration and persist it; returns (run dir, manifest)."""
    p = cfg["parameters"]
    try:
        runner = COMMANDS[cfg["command"]](p, workers)
    except ConfigError:
        raise
    except (ValueError, KeyError) as e:
        raise ConfigError(str(e)) from e
    h = config_hash(cfg)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        run_dir = _fresh_dir(outdir, f"{cfg['command']}-{h[:12]}")
        (run_dir / "data").mkdir(parents=True)
    except OSError as e:
        raise PermissionError(f"cannot create output directory under {outdir}: {e}") from e
    t0 = time.perf_counter()
    res = runner()
    wall = time.perf_counter() - t0
    files = {}
    for name, (header, rows) in sorted(res.tables.items()):
        data = _csv_bytes(header, rows)
        rel = f"data/{name}.csv"
        (run_dir / rel).write_bytes(data)
        files[rel] = hashlib.sha256(data).hexdigest()
    manifest = _clean({
        "tool": "topfree",
        "version": __version__,
        "command": cfg["command"],
        "config": cfg,
        "config_hash": h,
        "seed": p["seed"],
        "outputs": res.outputs,
        "warnings": res.warnings,
        "data_files": files,
        "timing_file": "timing.json",
    })
    jsonschema.validate(manifest, _schema("manifest.schema.json"))
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (run_dir / "timing.json").write_text(json.dumps({"wall_clock_seconds": wall, "workers": workers}, indent=2) + "\n")
    return run_dir, manifest


# ---------------------------------------------------------------------------
# argument parsing


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _combos(text: str) -> list[list[float]]:
    return [_floats(part) for part in text.split(";") if part.strip()]


FLAGS = {
    # flag: (dest, type, help)
    "--seed": ("seed", int, "64-bit unsigned seed"),
    "--intervals": ("intervals", str, 'compact set, e.g. "[-1,1]" or "[0,1] u [2,3]"'),
    "--grid": ("grid", int, "number of grid cells"),
    "--reference": ("reference", str, "also discretize a reference density: semicircle or arcsine"),
    "--reference-grid": ("reference_grid", int, "cells for the reference density"),
    "--dims": ("dims", _ints, "comma-separated matrix sizes"),
    "--trials": ("trials", int, "samples per size"),
    "--samples": ("samples", int, "Monte Carlo samples"),
    "--n": ("n", int, "number of variables"),
    "--poly": ("poly", str, 'polynomial, e.g. "X1+X2"'),
    "--preset": ("preset", str, "interval:a,b | semicircular:n | contraction:n | ball:n[,R]"),
    "--spec": ("spec", str, "path to a microstate spec JSON file"),
    "--k": ("k", _ints, "comma-separated matrix sizes"),
    "--eps": ("eps", float, "microstate tolerance"),
    "--eps-list": ("eps_list", _floats, "comma-separated covering radii"),
    "--estimator": ("estimator", str, "ball, gaussian or both"),
    "--radius": ("radius", float, "ball radius"),
    "--metric": ("metric", str, "uniform or hs"),
    "--degree": ("degree", int, "Chebyshev degree for interval presets"),
    "--combos": ("combos", _combos, 'coefficient vectors for semicircular presets, e.g. "1,1;1,-1"'),
    "--min-accepted": ("min_accepted", int, "minimum accepted samples per (k, eps) cell"),
    "--deltas": ("deltas", _floats, "comma-separated window half-widths"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="topfree", description="Microstate volumes, capacities and covering numbers.")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd, defaults in DEFAULTS.items():
        sp = sub.add_parser(cmd)
        for flag, (dest, typ, help_) in FLAGS.items():
            if dest == "seed" or dest in defaults:
                sp.add_argument(flag, dest=dest, type=typ, default=None, help=help_)
        sp.add_argument("--config", default=None, help="JSON file of parameters; wins over flags")
        sp.add_argument("--outdir", default=None, help=f"output root (default ${OUTDIR_ENV} or ./{DEFAULT_OUTDIR})")
        sp.add_argument("--workers", type=int, default=1, help="threads for sampling; results do not depend on it")
    return ap


def _load_file(path: str | None, command: str) -> dict | None:
    if path is None:
        return None
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config file {path!r}: {e}") from e
    if not isinstance(obj, dict):
        raise ConfigError("config file must hold a JSON object")
    if "parameters" in obj:
        if obj.get("command", command) != command:
            raise ConfigError(f"config file is for {obj['command']!r}, not {command!r}")
        obj = obj["parameters"]
    return obj


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    args = vars(ns)
    command = args.pop("command")
    cfg_path, outdir, workers = args.pop("config"), args.pop("outdir"), args.pop("workers")
    outdir = Path(outdir or os.environ.get(OUTDIR_ENV) or DEFAULT_OUTDIR)
    try:
        if workers < 1:
            raise ConfigError("workers must be >= 1")
        cfg = merge_config(command, args, _load_file(cfg_path, command))
        run_dir, manifest = run_config(cfg, outdir, workers)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except PermissionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNWRITABLE
    except OSError as e:
        print(f"error: cannot write results: {e}", file=sys.stderr)
        return EXIT_UNWRITABLE
    except Exception as e:  # noqa: BLE001 - any other failure is a runtime error
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(manifest["outputs"], indent=2, sort_keys=True))
    for w in manifest["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"results: {run_dir}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
