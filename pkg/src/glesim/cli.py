"""Batch front end: ``gle CONFIG [--out DIR] [--threads N] [--seed S]``.

A config is UTF-8 text made of ``[section]`` headers and ``key = value``
lines; ``#`` and ``;`` start comment lines.  Sections:

``[kernel]``
    ``family`` is one of exp_sum, rouse, power_h, power_alpha, cm_atoms,
    squared_cm.  Family keys: ``terms``/``atoms`` as ``a:b`` pairs separated
    by commas; ``p``, ``tau0``, ``n`` (integer or ``limit``), ``drop_zero``;
    ``H``; ``c``, ``alpha``.
``[params]``
    ``m``, ``lambda``, ``beta``.
``[task]``
    ``name`` plus task options (see ``TASK_OPTIONS``).
``[output]``
    ``dir``.

Exit status: 0 on success, 1 when a computation fails, 2 for config errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import scipy

from . import __version__
from .kernels import KernelDomainError, KernelSpec, UnclassifiedTailError, check_admissibility, classify_tail
from .msd_engine import (
    MSDCurve,
    PredictionUnavailable,
    covariance_grid,
    fit_exponent,
    msd,
    predict_exponent,
)
from .kernels import satisfies_assumption2
from .oscillatory_transform import transform_table
from .path_synth import BudgetError, SynthesisConfig, dump_paths, empirical_msd, synthesize
from .spectral_density import GLEParams, InadmissibleError, SpectralDensity, build_table
from .transient_analysis import squared_cm_power_sequence, transient_report

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "run", "main"]


class ConfigError(ValueError):
    """Syntax, domain or unknown-key error in a config."""


# ---------------------------------------------------------------------------
# grammar
# ---------------------------------------------------------------------------

_REAL, _POS, _NONNEG, _INT, _POSINT, _BOOL, _STR, _PAIRS, _INTLIST, _NLIMIT = range(10)

KERNEL_KEYS = {
    "exp_sum": {"terms": _PAIRS},
    "rouse": {"p": _REAL, "tau0": _POS, "n": _NLIMIT, "drop_zero": _BOOL},
    "power_h": {"H": _REAL},
    "power_alpha": {"c": _POS, "alpha": _REAL},
    "cm_atoms": {"atoms": _PAIRS},
    "squared_cm": {"atoms": _PAIRS},
}
KERNEL_REQUIRED = {
    "exp_sum": {"terms"},
    "rouse": {"p"},
    "power_h": {"H"},
    "power_alpha": {"c", "alpha"},
    "cm_atoms": {"atoms"},
    "squared_cm": {"atoms"},
}
PARAM_KEYS = {"m": _NONNEG, "lambda": _NONNEG, "beta": _POS}

TASK_OPTIONS = {
    "check": {"t_min": _POS, "t_max": _POS},
    "transform": {"omega_min": _POS, "omega_max": _POS, "n_omega": _POSINT, "method": _STR, "tol": _POS},
    "spectral": {"omega_min": _POS, "omega_max": _POS, "n_omega": _POSINT},
    "msd": {"t_min": _POS, "t_max": _POS, "n_times": _POSINT, "fit_lo": _POS, "fit_hi": _POS, "cov_points": _INT},
    "simulate": {
        "dt": _POS, "n_steps": _POSINT, "n_paths": _POSINT, "seed": _INT, "omega_max": _POS,
        "n_modes": _POSINT, "rule": _STR, "dump": _BOOL, "tail_budget": _POS, "max_cell_phase": _POS,
    },
    "transient": {
        "N_list": _INTLIST, "T": _POS, "n_grid": _POSINT, "curve_t_min": _POS, "curve_t_max": _POS,
        "n_curve": _POSINT, "alpha_target": _REAL, "tol_slope": _POS, "kappa": _REAL,
    },
}
TASK_DEFAULTS = {
    "check": {"t_min": 1e-6, "t_max": 1e4},
    "transform": {"omega_min": 1e-3, "omega_max": 1e3, "n_omega": 61, "method": "auto", "tol": 1e-9},
    "spectral": {"omega_min": 1e-3, "omega_max": 1e3, "n_omega": 61},
    "msd": {"t_min": 1e-2, "t_max": 1e4, "n_times": 61, "cov_points": 0},
    "simulate": {"dt": 0.2, "n_steps": 50, "n_paths": 1000, "seed": 0, "rule": "midpoint", "dump": False,
                 "tail_budget": 1e-3, "max_cell_phase": 0.25},
    "transient": {"T": 10.0, "n_grid": 64, "tol_slope": 0.05},
}
SECTIONS = ("kernel", "params", "task", "output")


@dataclass
class ExperimentConfig:
    family: str
    kernel_opts: Dict[str, object]
    params: GLEParams
    task: str
    options: Dict[str, object]
    output_dir: Optional[str] = None
    kernel: KernelSpec = field(default=None, repr=False)

    def echo(self) -> str:
        """Canonical config text; parsing it gives back this config."""
        lines = ["[kernel]", f"family = {self.family}"]
        for k, v in self.kernel_opts.items():
            lines.append(f"{k} = {_render(v)}")
        lines += ["", "[params]", f"m = {_render(self.params.m)}", f"lambda = {_render(self.params.lam)}",
                  f"beta = {_render(self.params.beta)}", "", "[task]", f"name = {self.task}"]
        for k, v in self.options.items():
            lines.append(f"{k} = {_render(v)}")
        if self.output_dir is not None:
            lines += ["", "[output]", f"dir = {self.output_dir}"]
        return "\n".join(lines) + "\n"


def _render(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{_render(a)}:{_render(b)}" for a, b in v)
        return ", ".join(_render(x) for x in v)
    if v is None:
        return "limit"
    return str(v)


def _number(text, lineno, key):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} = {text!r} is not a number") from None
    if not math.isfinite(v):
        raise ConfigError(f"line {lineno}: {key} must be finite")
    return v


def _integer(text, lineno, key):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} = {text!r} is not an integer") from None


def _convert(kind, text, lineno, key):
    if kind == _REAL:
        return _number(text, lineno, key)
    if kind == _POS:
        v = _number(text, lineno, key)
        if not v > 0:
            raise ConfigError(f"line {lineno}: {key} must be > 0, got {text}")
        return v
    if kind == _NONNEG:
        v = _number(text, lineno, key)
        if not v >= 0:
            raise ConfigError(f"line {lineno}: {key} must be >= 0, got {text}")
        return v
    if kind == _INT:
        return _integer(text, lineno, key)
    if kind == _POSINT:
        v = _integer(text, lineno, key)
        if v < 1:
            raise ConfigError(f"line {lineno}: {key} must be >= 1, got {text}")
        return v
    if kind == _BOOL:
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"line {lineno}: {key} must be true or false, got {text!r}")
    if kind == _STR:
        return text
    if kind == _NLIMIT:
        return None if text.lower() == "limit" else _integer(text, lineno, key)
    if kind == _INTLIST:
        items = [s.strip() for s in text.split(",") if s.strip()]
        return [_integer(s, lineno, key) for s in items]
    if kind == _PAIRS:
        out = []
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            parts = item.split(":")
            if len(parts) != 2:
                raise ConfigError(f"line {lineno}: {key} entry {item!r} must look like a:b")
            out.append((_number(parts[0], lineno, key), _number(parts[1], lineno, key)))
        if not out:
            raise ConfigError(f"line {lineno}: {key} needs at least one a:b pair")
        return out
    raise AssertionError(kind)


def _lex(text):
    """Yield (section, key, value, lineno) with duplicate checks."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {line!r}")
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            if name in sections:
                raise ConfigError(f"line {lineno}: duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{current}] (first set on line {sections[current][key][1]})")
        sections[current][key] = (value, lineno)
    return sections


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config, raising :class:`ConfigError` with the
    offending line number on any problem."""
    sec = _lex(text)
    for name in ("kernel", "params", "task"):
        if name not in sec:
            raise ConfigError(f"missing section [{name}]")

    kern = dict(sec["kernel"])
    if "family" not in kern:
        raise ConfigError("[kernel] needs a family")
    family, fam_line = kern.pop("family")
    if family not in KERNEL_KEYS:
        raise ConfigError(f"line {fam_line}: unknown kernel family {family!r}; expected one of {', '.join(KERNEL_KEYS)}")
    allowed = KERNEL_KEYS[family]
    kopts = {}
    for key, (value, ln) in kern.items():
        if key not in allowed:
            raise ConfigError(f"line {ln}: unknown key {key!r} for family {family}")
        kopts[key] = _convert(allowed[key], value, ln, key)
    missing = KERNEL_REQUIRED[family] - set(kopts)
    if missing:
        raise ConfigError(f"[kernel] family {family} needs {', '.join(sorted(missing))}")

    pvals = {"m": 1.0, "lambda": 0.0, "beta": 1.0}
    for key, (value, ln) in sec["params"].items():
        if key not in PARAM_KEYS:
            raise ConfigError(f"line {ln}: unknown key {key!r} in [params]")
        pvals[key] = _convert(PARAM_KEYS[key], value, ln, key)

    task_sec = dict(sec["task"])
    if "name" not in task_sec:
        raise ConfigError("[task] needs a name")
    task, tline = task_sec.pop("name")
    if task not in TASK_OPTIONS:
        raise ConfigError(f"line {tline}: unknown task {task!r}; expected one of {', '.join(TASK_OPTIONS)}")
    opts = dict(TASK_DEFAULTS.get(task, {}))
    for key, (value, ln) in task_sec.items():
        if key not in TASK_OPTIONS[task]:
            raise ConfigError(f"line {ln}: unknown key {key!r} for task {task}")
        opts[key] = _convert(TASK_OPTIONS[task][key], value, ln, key)
    _validate_task(task, opts)

    out_dir = None
    if "output" in sec:
        for key, (value, ln) in sec["output"].items():
            if key != "dir":
                raise ConfigError(f"line {ln}: unknown key {key!r} in [output]")
            out_dir = value

    cfg = ExperimentConfig(family, kopts, GLEParams(pvals["m"], pvals["lambda"], pvals["beta"]), task, opts, out_dir)
    try:
        cfg.kernel = _build_kernel(family, kopts)
    except KernelDomainError as exc:
        raise ConfigError(f"[kernel] {exc}") from None
    return cfg


def _validate_task(task, o):
    def order(lo, hi):
        if lo in o and hi in o and not o[lo] < o[hi]:
            raise ConfigError(f"[task] {lo} must be < {hi}")

    order("t_min", "t_max")
    order("omega_min", "omega_max")
    order("fit_lo", "fit_hi")
    order("curve_t_min", "curve_t_max")
    if task == "transform" and o["method"] not in ("auto", "closed", "numeric"):
        raise ConfigError("[task] method must be auto, closed or numeric")
    if task == "simulate":
        if o["rule"] not in ("midpoint", "trapezoid"):
            raise ConfigError("[task] rule must be midpoint or trapezoid")
        if o["seed"] < 0:
            raise ConfigError("[task] seed must be >= 0")
        if o["n_paths"] < 2:
            raise ConfigError("[task] n_paths must be >= 2")
    if task == "msd" and not 0 <= o["cov_points"] <= 256:
        raise ConfigError("[task] cov_points must be in [0, 256]")
    if task == "transient":
        Ns = o.get("N_list")
        if not Ns:
            raise ConfigError("[task] N_list must list at least one N")
        if any(n < 1 for n in Ns):
            raise ConfigError("[task] N_list entries must be >= 1")
        if "kappa" in o and not 0 < o["kappa"] < 1:
            raise ConfigError("[task] kappa must lie in (0, 1)")
        if o["n_grid"] < 2:
            raise ConfigError("[task] n_grid must be >= 2")


def _build_kernel(family, k):
    if family == "exp_sum":
        return KernelSpec.exp_sum(k["terms"])
    if family == "rouse":
        return KernelSpec.rouse(k["p"], k.get("tau0", 1.0), k.get("n"), k.get("drop_zero", False))
    if family == "power_h":
        return KernelSpec.power_h(k["H"])
    if family == "power_alpha":
        return KernelSpec.power_alpha(k["c"], k["alpha"])
    if family == "cm_atoms":
        return KernelSpec.cm_atoms(k["atoms"])
    return KernelSpec.squared_cm(k["atoms"])


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _csv_text(header, rows):
    out = [",".join(header)]
    for r in rows:
        out.append(",".join(_fmt(v) for v in r))
    return "\n".join(out) + "\n"


def _write(out_dir, name, text, written):
    path = os.path.join(out_dir, name)
    tmp = path + ".tmp"
    data = text.encode("utf-8") if isinstance(text, str) else text
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    written[name] = hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------


def _density(cfg):
    return SpectralDensity(cfg.kernel, cfg.params)


def _task_check(cfg, out, threads, written, log):
    o = cfg.options
    from .kernels import SamplingPlan

    rep = check_admissibility(cfg.kernel, SamplingPlan(t_min=o["t_min"], t_max=o["t_max"]))
    rows = [(n, s, m, d) for n, s, m, d in rep.rows()]
    try:
        tail = str(classify_tail(cfg.kernel))
    except UnclassifiedTailError as exc:
        tail = f"unclassified: {exc}"
    rows.append(("tail", "info", math.nan, tail))
    rows.append(("assumption1", "pass" if rep.assumption1 else "fail", math.nan, ""))
    rows.append(("assumption2", "pass" if rep.assumption2 else "fail", math.nan, ""))
    _write(out, "admissibility.csv", _csv_text(["check", "status", "margin", "detail"],
                                               [(a, b, c, '"' + d.replace('"', "'") + '"') for a, b, c, d in rows]), written)
    log(f"assumption1={'pass' if rep.assumption1 else 'fail'} assumption2={'pass' if rep.assumption2 else 'fail'}")


def _task_transform(cfg, out, threads, written, log):
    o = cfg.options
    om = np.geomspace(o["omega_min"], o["omega_max"], o["n_omega"])
    tab = transform_table(cfg.kernel, om, o["tol"], o["method"])
    cols = tab.columns()
    _write(out, "transform.csv", _csv_text(list(cols), zip(*cols.values())), written)


def _task_spectral(cfg, out, threads, written, log):
    o = cfg.options
    tab = build_table(_density(cfg), np.geomspace(o["omega_min"], o["omega_max"], o["n_omega"]))
    cols = tab.columns()
    _write(out, "spectral.csv", _csv_text(list(cols), zip(*cols.values())), written)
    log(f"max_rhat={float(np.max(tab.rhat)):.17g}")


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _task_msd(cfg, out, threads, written, log):
    o = cfg.options
    sd = _density(cfg)
    ts = np.geomspace(o["t_min"], o["t_max"], o["n_times"])
    res = _map(lambda t: msd(sd, float(t)), ts, threads)
    vals = np.array([r.value for r in res])
    errs = np.array([r.err_est for r in res])
    _write(out, "msd.csv", _csv_text(["t", "msd", "err_est"], zip(ts, vals, errs)), written)
    curve = MSDCurve(ts, vals, errs, regime=sd.regime)
    window = (o.get("fit_lo", ts[-1] / 100), o.get("fit_hi", ts[-1]))
    fit = fit_exponent(curve, window)
    try:
        pred = predict_exponent(classify_tail(cfg.kernel), cfg.params, satisfies_assumption2(cfg.kernel))
        pred_s = f"{pred:.3f}"
    except (PredictionUnavailable, UnclassifiedTailError):
        pred_s = "NA"
    if o["cov_points"] > 0:
        ct = np.linspace(0.0, ts[-1], o["cov_points"] + 1)[1:]
        grid = covariance_grid(sd, ct)
        rows = [[t] + list(row) for t, row in zip(ct, grid.cov)]
        _write(out, "covariance.csv", _csv_text(["t"] + [_fmt(float(x)) for x in ct], rows), written)
    log(f"eta_pred={pred_s} eta_fit={fit.eta:.2f}")


def _task_simulate(cfg, out, threads, written, log):
    o = cfg.options
    sd = _density(cfg)
    sc = SynthesisConfig(dt=o["dt"], n_steps=o["n_steps"], n_paths=o["n_paths"], omega_max=o.get("omega_max"),
                         n_modes=o.get("n_modes"), rule=o["rule"], tail_budget=o["tail_budget"],
                         max_cell_phase=o["max_cell_phase"])
    ens = synthesize(sd, sc, o["seed"], threads=threads)
    emp = empirical_msd(ens)
    quad = [0.0] + _map(lambda t: msd(sd, float(t)).value, ens.times[1:], threads)
    _write(out, "summary.csv", _csv_text(["t", "empirical_msd", "se", "quadrature_msd"],
                                         zip(emp.times, emp.values, emp.se, quad)), written)
    if o["dump"]:
        tmp = os.path.join(out, "paths.bin")
        dump_paths(tmp, ens)
        with open(tmp, "rb") as fh:
            written["paths.bin"] = hashlib.sha256(fh.read()).hexdigest()
    z = np.abs(emp.values[1:] - np.asarray(quad[1:])) / np.where(emp.se[1:] > 0, emp.se[1:], np.inf)
    log(f"modes={ens.n_modes} omega_max={ens.omega_max:g} within_3se={float(np.mean(z <= 3)):.3f}")


def _task_transient(cfg, out, threads, written, log):
    o = cfg.options
    k = cfg.kernel_opts
    if cfg.family == "rouse":
        if k.get("n") is not None:
            raise ConfigError("[kernel] transient studies need the Rouse limit (n = limit) as the target")
        make = lambda N: KernelSpec.rouse(k["p"], k.get("tau0", 1.0), N, drop_zero=True)
    elif cfg.family in ("power_alpha", "power_h"):
        fam = cfg.kernel.family
        make = lambda N: squared_cm_power_sequence(fam.c, fam.alpha, N)
    else:
        raise ConfigError(f"[kernel] no kernel sequence is defined for family {cfg.family}")
    if cfg.family == "rouse" and min(o["N_list"]) < 2:
        raise ConfigError("[task] Rouse sequences need N >= 2 once the k = 0 term is dropped")
    curve_t = None
    if "curve_t_min" in o or "curve_t_max" in o:
        curve_t = np.geomspace(o.get("curve_t_min", 1e-2), o.get("curve_t_max", 1e6), o.get("n_curve", 161))
    rep = transient_report(o["N_list"], make, cfg.kernel, cfg.params, o["T"], o["n_grid"], curve_t,
                           o.get("alpha_target"), o["tol_slope"], o.get("kappa"))
    _write(out, "deviation.csv", rep.deviation_csv(), written)
    if rep.slope_profile:
        _write(out, "slopes.csv", rep.slope_csv(), written)
        rows = [(n, *(w if w else (math.nan, math.nan))) for n, w in rep.tad_window.items()]
        _write(out, "tad_windows.csv", _csv_text(["N", "t_lo", "t_hi"], rows), written)
    if rep.hypotheses is not None:
        _write(out, "hypotheses.csv", _csv_text(["hypothesis", "status", "margin", "detail"],
                                                [(a, b, c, '"' + d + '"') for a, b, c, d in rep.hypotheses.rows()]), written)
    ok = all(d <= b for d, b in zip(rep.sup_dev, rep.bound))
    log("bound_respected=" + ("yes" if ok else "no"))


TASKS = {
    "check": _task_check,
    "transform": _task_transform,
    "spectral": _task_spectral,
    "msd": _task_msd,
    "simulate": _task_simulate,
    "transient": _task_transient,
}


def run(cfg: ExperimentConfig, out_dir: Optional[str] = None, threads: int = 1, stdout=None) -> int:
    """Execute ``cfg``, write its artifacts and a manifest, return the exit status."""
    stdout = stdout or sys.stdout
    out = out_dir or cfg.output_dir or "gle-out"
    os.makedirs(out, exist_ok=True)
    written = {}
    lines = []

    def log(msg):
        lines.append(msg)
        print(msg, file=stdout)

    t0 = time.perf_counter()
    status = 0
    error = None
    try:
        TASKS[cfg.task](cfg, out, max(1, int(threads)), written, log)
    except ConfigError:
        raise
    except (InadmissibleError, BudgetError, KernelDomainError, UnclassifiedTailError, PredictionUnavailable,
            ArithmeticError, ValueError) as exc:
        status = 1
        error = f"{type(exc).__name__}: {exc}"
        print(f"error: {error}", file=sys.stderr)
    manifest = {
        "config": cfg.echo(),
        "task": cfg.task,
        "seed": cfg.options.get("seed"),
        "threads": int(threads),
        "status": status,
        "error": error,
        "artifacts": written,
        "summary": lines,
        "versions": {"glesim": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "wall_time_s": time.perf_counter() - t0,
    }
    _write(out, "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n", {})
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="gle", description="GLE spectral pipeline batch runner")
    ap.add_argument("config", help="path to an experiment config")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default: $GLE_THREADS or 1)")
    ap.add_argument("--seed", type=int, default=None, help="master seed for task=simulate")
    args = ap.parse_args(argv)

    threads = args.threads
    if threads is None:
        env = os.environ.get("GLE_THREADS")
        try:
            threads = int(env) if env else 1
        except ValueError:
            print(f"config error: GLE_THREADS={env!r} is not an integer", file=sys.stderr)
            return 2
    if threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        cfg = parse_config(text)
        if args.seed is not None:
            if cfg.task != "simulate":
                raise ConfigError("--seed applies to task=simulate only")
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            cfg.options["seed"] = args.seed
        return run(cfg, args.out, threads)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
