"""Command-line experiment runner.

    levyavg <experiment> [--config FILE] [--key value ...] [--out DIR]

Configuration files hold ``key = value`` lines (``#`` comments, an optional
``[levyavg]`` section header); command-line flags override the file.  The
output directory defaults to ``$LEVYAVG_OUT`` or ``./levyavg_out``.

Exit codes: 0 success, 2 invalid configuration, 3 non-finite state or
stiffness violation, 4 acceptance failure in ``validate``.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import re
import subprocess
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from ._backend import NAME as BACKEND
from .errors import ConfigError, DegenerateFit, DomainError, NonFiniteError, StiffnessError

EXPERIMENTS = ("sample", "simulate", "frozen", "bbar", "strong-rate", "weak-rate", "poisson", "oracle", "validate")
ENV_OUT = "LEVYAVG_OUT"
DEFAULT_OUT = "levyavg_out"


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _h_rule(text):
    m = re.fullmatch(r"\s*eps\s*/\s*([0-9.eE+-]+)\s*", str(text))
    if not m:
        raise ValueError("expected the form eps/<factor>")
    k = float(m.group(1))
    if k < 20:
        raise ValueError("factor must be at least 20 (stability rule h <= eps/20)")
    return f"eps/{k:g}"


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


# key -> (parser, default); None default means "required"
COMMON = {
    "alpha": (float, None),
    "seed": (int, 0),
    "workers": (int, 1),
}
KEYS = {
    "sample": {"n": (int, 100_000), "dt": (float, 1.0), "dim": (int, 1)},
    "simulate": {"problem": (str, "linear"), "eps": (float, 0.0625), "T": (float, 1.0), "h_rule": (_h_rule, "eps/50"),
                 "x0": (float, 0.0), "y0": (float, 0.0)},
    "frozen": {"problem": (str, "example"), "x": (float, 0.0), "y0": (float, 0.0), "T": (float, 20.0),
               "h": (float, 0.01)},
    "bbar": {"problem": (str, "bounded"), "x_min": (float, -3.0), "x_max": (float, 3.0), "n_x": (int, 13),
             "T": (float, 40.0), "n_reps": (int, 32), "h": (float, 0.01)},
    "strong-rate": {"problem": (str, "linear"), "eps_list": (_floats, "0.125,0.0625,0.03125,0.015625,0.0078125,0.00390625"),
                    "p": (float, 1.0), "T": (float, 1.0), "n_paths": (int, 10_000), "h_rule": (_h_rule, "eps/50"),
                    "n_bootstrap": (int, 1000), "x0": (float, 0.0), "y0": (float, 0.0)},
    "weak-rate": {"problem": (str, "bounded"), "eps_list": (_floats, "0.25,0.125,0.0625,0.03125,0.015625"),
                  "t_eval": (float, 1.0), "n_paths": (int, 100_000), "h_rule": (_h_rule, "eps/50"),
                  "n_bootstrap": (int, 1000), "x0": (float, float(np.pi / 2)), "y0": (float, -2.0)},
    "poisson": {"problem": (str, "example"), "x": (float, 0.0), "y": (_floats, "1,2,4,8"), "tol": (float, 0.01),
                "n_paths": (int, 10_000), "h": (float, 0.01)},
    "oracle": {"eps_list": (_floats, "0.25,0.125,0.0625,0.03125,0.015625,0.0078125,0.00390625"), "p": (float, 1.0),
               "t": (float, 1.0), "n_paths": (int, 100_000)},
    "validate": {"quick": (_bool, False), "criteria": (_ints, "1,2,3,4,5,6,7,8,9,10")},
}


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict
    out: str

    def __getitem__(self, key):
        return self.values[key]

    def resolved(self) -> dict:
        def plain(v):
            if isinstance(v, (list, tuple)):
                return [plain(x) for x in v]
            if isinstance(v, np.generic):
                return v.item()
            return v

        return {k: plain(v) for k, v in sorted(self.values.items())}


def _allowed(experiment):
    keys = dict(KEYS[experiment])
    if experiment != "validate":
        keys.update(COMMON)
    else:
        keys.update({k: v for k, v in COMMON.items() if k != "alpha"})
    return keys


def _read_file(path):
    """``{key: (value, line_number)}`` from a key=value file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    if not re.match(r"\s*\[", text):
        text = "[levyavg]\n" + text
        offset = -1
    else:
        offset = 0
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc.message.splitlines()[0]}") from exc
    lines = text.splitlines()
    out = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            lineno = next((i + 1 + offset for i, ln in enumerate(lines)
                           if re.match(rf"\s*{re.escape(key)}\s*=", ln)), None)
            out[key.replace("-", "_")] = (value, lineno)
    return out


def parse_config(experiment: str, file_values: dict, flag_values: dict, out=None, source="config") -> ExperimentConfig:
    """Merge file and flag values, apply defaults and validate every key.

    Raises :class:`ConfigError` naming the offending key (and line for file values).
    """
    allowed = _allowed(experiment)
    merged = {}
    for key, (raw, lineno) in file_values.items():
        where = f"{source}:{lineno}" if lineno else source
        merged[key] = (raw, where)
    for key, raw in flag_values.items():
        merged[key] = (raw, f"--{key.replace('_', '-')}")
    values = {}
    for key, (raw, where) in merged.items():
        if key == "out":
            out = out or raw
            continue
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key '{key}' for experiment '{experiment}'")
        parser = allowed[key][0]
        try:
            values[key] = parser(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: invalid value for '{key}': {raw!r} ({exc})") from exc
    for key, (parser, default) in allowed.items():
        if key not in values:
            if default is None:
                raise ConfigError(f"missing required key '{key}'")
            values[key] = parser(default) if isinstance(default, str) and parser is not str else default
    _validate(experiment, values)
    out = out or os.environ.get(ENV_OUT) or DEFAULT_OUT
    return ExperimentConfig(experiment, values, out)


def _validate(experiment, v):
    from .problems import CODES

    def need(cond, key, msg):
        if not cond:
            raise ConfigError(f"invalid value for '{key}': {msg}")

    if "alpha" in v:
        need(1.0 < v["alpha"] < 2.0, "alpha", f"{v['alpha']} is outside (1, 2)")
    need(0 <= v["seed"] < 2**64, "seed", "must lie in [0, 2**64)")
    need(v["workers"] >= 1, "workers", "must be >= 1")
    if "problem" in v:
        need(v["problem"] in CODES, "problem", f"{v['problem']!r} is not one of {sorted(CODES)}")
    for key in ("n", "n_paths", "n_reps", "n_bootstrap", "n_x", "dim"):
        if key in v:
            need(v[key] >= (2 if key in ("n_paths", "n_reps", "n_x") else 1), key, "too small")
    for key in ("dt", "eps", "T", "h", "tol", "t", "t_eval"):
        if key in v:
            need(v[key] > 0, key, "must be positive")
    if "eps_list" in v:
        e = np.asarray(v["eps_list"])
        need(e.size >= (3 if experiment == "oracle" else 4), "eps_list", "too few values")
        need(bool(np.all(e > 0) and np.all(np.diff(e) < 0)), "eps_list", "must be positive and strictly decreasing")
    if "p" in v and "alpha" in v:
        need(1.0 <= v["p"] < v["alpha"], "p", "must lie in [1, alpha)")
    if experiment == "bbar":
        need(v["x_max"] > v["x_min"], "x_max", "must exceed x_min")
    if experiment == "validate":
        need(all(c in range(1, 11) for c in v["criteria"]), "criteria", "criteria are numbered 1..10")


def _h_factor(rule):
    return float(rule.split("/")[1])


def build_id() -> str:
    """``git describe``-style identifier of the running code."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here, capture_output=True,
                              text=True, timeout=5)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}-{desc.stdout.strip()}-{BACKEND}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"{__version__}-{BACKEND}"


def _run(cfg: ExperimentConfig, out_dir: str, echo=print) -> tuple:
    """Dispatch one experiment; returns ``(results, exit_code)``."""
    from .rng import RngStream

    v = cfg.values
    rng = RngStream.from_tag(v["seed"], cfg.experiment)
    w = v["workers"]
    path = lambda name: os.path.join(out_dir, name)
    exp = cfg.experiment

    if exp == "sample":
        from .stable import StableSpec, hill_estimator, increments_on_grid
        from .engine import format_float

        x = increments_on_grid(StableSpec(v["alpha"], v["dim"]), v["n"], v["dt"], rng)
        with open(path("samples.csv"), "w", newline="") as fh:
            fh.write(",".join(f"x_{i + 1}" for i in range(x.shape[1])) + "\n")
            for row in x:
                fh.write(",".join(format_float(c) for c in row) + "\n")
        res = {"n": v["n"], "mean_cos_first": float(np.cos(x[:, 0]).mean()),
               "expected_cos": float(np.exp(-v["dt"])),
               "hill_first": float(hill_estimator(x[:, 0])) if v["n"] >= 200 else None}
        return res, 0

    if exp == "simulate":
        from .engine import TimeGrid
        from .multiscale import MultiscaleRun, paths_to_csv, simulate_slow_fast
        from .problems import get_problem

        sysm = get_problem(v["problem"], v["alpha"])
        grid = TimeGrid.from_step(v["T"], v["eps"] / _h_factor(v["h_rule"]))
        run = MultiscaleRun(sysm, v["eps"], grid, v["x0"], v["y0"])
        px, py = simulate_slow_fast(run, rng)
        paths_to_csv(px, py, path("path.csv"))
        return {"n_steps": grid.n_steps, "h": grid.h, "x_T": float(px.states[-1, 0]), "y_T": float(py.states[-1, 0])}, 0

    if exp == "frozen":
        from .averaging import simulate_frozen
        from .engine import TimeGrid
        from .problems import get_problem

        spec = get_problem(v["problem"], v["alpha"]).frozen(v["x"])
        grid = TimeGrid.from_step(v["T"], v["h"])
        p = simulate_frozen(spec, v["y0"], grid, rng)
        p.to_csv(path("frozen_path.csv"), prefix="y")
        return {"n_steps": grid.n_steps, "y_T": float(p.states[-1, 0])}, 0

    if exp == "bbar":
        from .averaging import BbarTable
        from .problems import get_problem

        sysm = get_problem(v["problem"], v["alpha"])
        xg = np.linspace(v["x_min"], v["x_max"], v["n_x"])
        tab = BbarTable.tabulate(sysm, xg, rng, T=v["T"], n_reps=v["n_reps"], h=v["h"], workers=w)
        tab.to_csv(path("bbar.csv"))
        exact = sysm.bbar(xg)
        return {"max_stderr": tab.max_stderr, "max_abs_diff_analytic": float(np.max(np.abs(tab.values - exact)))}, 0

    if exp in ("strong-rate", "weak-rate"):
        from .problems import get_problem
        from .rates import RateExperiment, fit_loglog, strong_error_curve, weak_error_curve

        sysm = get_problem(v["problem"], v["alpha"])
        kw = dict(n_paths=v["n_paths"], h_factor=_h_factor(v["h_rule"]), x0=v["x0"], y0=v["y0"])
        if exp == "strong-rate":
            re_ = RateExperiment(sysm, v["eps_list"], p=v["p"], T=v["T"], **kw)
            curve = strong_error_curve(re_, rng, workers=w)
        else:
            re_ = RateExperiment(sysm, v["eps_list"], T=v["t_eval"], **kw)
            curve = weak_error_curve(re_, v["t_eval"], rng, workers=w)
        stem = exp.replace("-rate", "")
        curve.to_csv(path(f"{stem}_curve.csv"))
        try:
            fit = fit_loglog(curve, n_bootstrap=v["n_bootstrap"], seed=v["seed"])
        except DegenerateFit as exc:
            return {"fit": None, "fit_error": str(exc), "excluded_points": [float(e) for e in curve.eps[curve.excluded]]}, 0
        fit.to_json(path(f"{stem}_fit.json"))
        return {"fit": fit.to_dict()}, 0

    if exp == "poisson":
        from .poisson import corrector_scan, scan_to_csv
        from .problems import get_problem

        sysm = get_problem(v["problem"], v["alpha"])
        sols = corrector_scan(sysm, [(v["x"], yv) for yv in v["y"]], v["tol"], v["n_paths"], rng, h=v["h"], workers=w)
        scan_to_csv(sols, path("corrector.csv"))
        return {"phi": [float(s.value[0]) for s in sols], "stderr": [s.stderr for s in sols]}, 0

    if exp == "oracle":
        from .oracle import oracle_moment_check

        chk = oracle_moment_check(v["alpha"], v["p"], v["t"], v["eps_list"], v["n_paths"], rng, workers=w)
        chk.to_csv(path("oracle_ratios.csv"))
        chk.to_json(path("oracle_fit.json"))
        return chk.summary(), 0

    if exp == "validate":
        from .engine import format_float
        from .validation import run_criteria

        results = run_criteria(v["criteria"], seed=v["seed"], quick=v["quick"], workers=w, report=echo)
        with open(path("validation.csv"), "w", newline="") as fh:
            fh.write("criterion,name,passed\n")
            for r in results:
                fh.write(f"{r.number},{r.name},{int(r.passed)}\n")
        res = {str(r.number): {"name": r.name, "passed": r.passed, "detail": r.detail} for r in results}
        return res, 0 if all(r.passed for r in results) else 4

    raise ConfigError(f"unknown experiment {exp!r}")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def run(cfg: ExperimentConfig, echo=print) -> int:
    """Run ``cfg``, write artifacts and ``summary.json``; returns the exit code."""
    os.makedirs(cfg.out, exist_ok=True)
    t0 = time.perf_counter()
    results, code = _run(cfg, cfg.out, echo)
    summary = {
        "experiment": cfg.experiment,
        "config": cfg.resolved(),
        "results": results,
        "runtime_s": time.perf_counter() - t0,
        "seed": cfg.values["seed"],
        "build": build_id(),
    }
    with open(os.path.join(cfg.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return code


def _parser():
    ap = argparse.ArgumentParser(prog="levyavg", description="Averaging experiments for stable-driven slow-fast SDEs.",
                                 allow_abbrev=False)
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="key=value configuration file")
    ap.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./{DEFAULT_OUT})")
    ap.add_argument("--dry-run", action="store_true", help="print the resolved configuration and exit")
    ap.add_argument("--quick", action="store_true", help="validate: reduced path counts")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _split_flags(extra):
    """``--key value`` / ``--key=value`` pairs into a dict with underscored keys."""
    flags = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or tok == "--":
            raise ConfigError(f"unexpected argument {tok!r}")
        if "=" in tok:
            k, val = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"flag {tok} needs a value")
            k, val = tok[2:], extra[i + 1]
            i += 2
        flags[k.replace("-", "_")] = val
    return flags


def main(argv=None) -> int:
    ap = _parser()
    args, extra = ap.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        flags = _split_flags(extra)
        if args.quick:
            flags["quick"] = "true"
        file_values = _read_file(args.config) if args.config else {}
        cfg = parse_config(args.experiment, file_values, flags, out=args.out, source=args.config or "config")
    except ConfigError as exc:
        print(f"levyavg: error: {exc}", file=sys.stderr)
        return 2
    if args.dry_run:
        print(json.dumps({"experiment": cfg.experiment, "config": cfg.resolved(), "out": cfg.out}, indent=2))
        return 0
    try:
        return run(cfg)
    except (NonFiniteError, StiffnessError) as exc:
        print(f"levyavg: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (DomainError, ConfigError) as exc:
        print(f"levyavg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
