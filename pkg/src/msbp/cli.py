"""Reproducible experiment harness for the library.

Four subcommands: prior-curves tabulates tie probabilities and block-count
curves across dependence levels, validate runs an oracle battery against
closed forms, moments-check compares the exact mixed-moment evaluators with
Monte Carlo, and fit-mixture runs the ordered-allocation sampler on a data
file.  Every run writes a manifest echoing the fully resolved configuration;
rerunning from a manifest reproduces the CSV outputs byte for byte, so all
floats are written with 17 significant digits and every output carries a
header with the version, seed, and config hash.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .chains import (
    BetaBinomial,
    CompletelyDependent,
    Independent,
    Lazy,
    LengthPrefix,
    MsbpModel,
    sample_prefix_matrix,
)
from .gibbs import GibbsState, bmsb_update_N, bmsb_update_z
from .mixture import (
    DensityEstimate,
    GaussianMixtureTruth,
    MixtureSpec,
    binder_cluster_estimate,
    density_estimate,
    fit,
    posterior_Kn,
    tv_distance,
)
from .moments import AllocationStats, mixed_moment_bmsb_stationary, mixed_moment_lmsb_stationary, tie_probability_series
from .rng import substream
from .specfun import ConstBeta, PitmanYor, inv_reg_inc_beta, log_beta, reg_inc_beta, transport
from .weights import extend_until, sample_Kn, tie_probability_mc


class ConfigError(Exception):
    """Bad or unknown configuration; exits with code 2."""


class InputError(Exception):
    """Missing or malformed input file; exits with code 3."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _parse_float_list(s: str):
    vals = [float(t) for t in s.replace(",", " ").split()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _parse_int_grid(s: str):
    out = []
    for tok in s.replace(" ", "").split(","):
        if not tok:
            continue
        if ":" in tok:
            lo, hi = tok.split(":", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError("range %s is reversed" % tok)
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(tok))
    if not out or len(out) > 100_000:
        raise ValueError("grid must hold between 1 and 100000 integers")
    return out


def _parse_span(s: str):
    parts = s.split(":")
    if len(parts) != 3:
        raise ValueError("expected lo:hi:points, got %r" % s)
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not (hi > lo and n >= 2):
        raise ValueError("span needs hi > lo and points >= 2")
    return lo, hi, n


def _canon(value) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return _fmt(value)


# schema entry: (default value as canonical string or None, parser, validator message)
_RUN_DEFAULT_REPS = {"prior-curves": 200, "validate": 4000, "moments-check": 20000, "fit-mixture": 3}

_SCHEMAS = {
    "prior-curves": {
        "family": ("bmsb", str),
        "sigma": ("0", float),
        "theta_grid": ("0.25,0.5,1,2,4", _parse_float_list),
        "dependence_grid": (None, _parse_float_list),  # default depends on family
        "kn_grid": ("1:150", _parse_int_grid),
        "kn_theta": ("1", float),
    },
    "validate": {
        "inv_tol": ("", str),  # empty = solver default
    },
    "moments-check": {
        "z_threshold": ("4", float),
    },
    "fit-mixture": {
        "data": (None, str),
        "family": ("independent", str),
        "theta": ("1", float),
        "sigma": ("0", float),
        "n": ("5", int),
        "rho": ("0.5", float),
        "hyper": ("none", str),
        "sweeps": ("5000", int),
        "burnin": ("1000", int),
        "thin": ("4", int),
        "grid": ("-18:14:2048", str),
        "mu0": ("auto", str),
        "lam0": ("0.01", float),
        "a0": ("0.5", float),
        "b0": ("0.5", float),
        "truth_means": (None, _parse_float_list),
        "truth_sds": (None, _parse_float_list),
        "truth_weights": (None, _parse_float_list),
    },
}


@dataclass
class ExperimentConfig:
    """Fully resolved run parameters plus their canonical echo."""

    command: str
    seed: int
    reps: int
    out: str
    threads: int
    params: dict
    resolved: dict
    config_sha256: str


def _line_of(raw_text: str, needle: str) -> int:
    for i, line in enumerate(raw_text.splitlines(), start=1):
        if needle in line:
            return i
    return 0


def _read_config_file(path: str):
    """Returns ({section: {key: str}}, raw_text). JSON manifests round-trip."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise InputError("cannot read config %s: %s" % (path, e))
    stripped = text.lstrip()
    if path.endswith(".json") or stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except ValueError as e:
            raise ConfigError("config %s: invalid JSON (%s)" % (path, e))
        if isinstance(obj, dict) and "config" in obj and "command" in obj:
            obj = obj["config"]
        if not isinstance(obj, dict) or not all(isinstance(v, dict) for v in obj.values()):
            raise ConfigError("config %s: expected {section: {key: value}}" % path)
        return {s: {k: _canon(v) for k, v in kv.items()} for s, kv in obj.items()}, text
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=path)
    except configparser.Error as e:
        raise ConfigError("config %s: %s" % (path, e))
    return {s: dict(parser.items(s)) for s in parser.sections()}, text


def resolve_config(command: str, args) -> ExperimentConfig:
    sections, raw_text = ({}, "") if args.config is None else _read_config_file(args.config)
    schema = _SCHEMAS[command]
    for sec in sections:
        if sec not in ("run", command):
            raise ConfigError("unknown section [%s] (line %d)" % (sec, _line_of(raw_text, "[" + sec + "]")))
    run_keys = {"seed", "reps", "out", "threads"}
    for key in sections.get("run", {}):
        if key not in run_keys:
            raise ConfigError("unknown key %r in [run] (line %d)" % (key, _line_of(raw_text, key)))
    for key in sections.get(command, {}):
        if key not in schema:
            raise ConfigError("unknown key %r in [%s] (line %d)" % (key, command, _line_of(raw_text, key)))

    run = sections.get("run", {})

    def run_val(key, cli_value, default):
        if cli_value is not None:
            return cli_value
        return run.get(key, default)

    try:
        seed = int(run_val("seed", args.seed, 0))
        reps = int(run_val("reps", args.reps, _RUN_DEFAULT_REPS[command]))
        threads = int(run_val("threads", args.threads, os.environ.get("MSBP_THREADS", 1)))
    except ValueError as e:
        raise ConfigError("bad [run] value: %s" % e)
    out = str(run_val("out", args.out, "msbp-out"))
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must fit in 64 bits, got %d" % seed)
    if reps < 1:
        raise ConfigError("reps must be >= 1, got %d" % reps)
    if command == "prior-curves" and reps < 100:
        raise ConfigError("prior-curves needs reps >= 100, got %d" % reps)
    if threads < 1:
        raise ConfigError("threads must be >= 1, got %d" % threads)

    params = {}
    body = sections.get(command, {})
    for key, (default, parse) in schema.items():
        raw = body.get(key, default)
        if raw is None:
            params[key] = None
            continue
        try:
            params[key] = parse(raw)
        except (ValueError, TypeError) as e:
            raise ConfigError("bad value for %s in [%s]: %s (line %d)"
                              % (key, command, e, _line_of(raw_text, key)))

    if command == "prior-curves":
        if params["family"] not in ("bmsb", "lmsb"):
            raise ConfigError("family must be bmsb or lmsb, got %r" % params["family"])
        if params["dependence_grid"] is None:
            params["dependence_grid"] = (
                [0.0, 1.0, 5.0, 25.0] if params["family"] == "bmsb" else [0.0, 0.25, 0.5, 0.75, 1.0]
            )
        if params["family"] == "bmsb":
            if any(d < 0 or d != int(d) for d in params["dependence_grid"]):
                raise ConfigError("bmsb dependence values must be nonnegative integers")
        elif any(not 0.0 <= d <= 1.0 for d in params["dependence_grid"]):
            raise ConfigError("lmsb dependence values must lie in [0, 1]")
        if not 0.0 <= params["sigma"] < 1.0:
            raise ConfigError("sigma must lie in [0, 1)")
        if any(t <= -params["sigma"] for t in params["theta_grid"]) or params["kn_theta"] <= -params["sigma"]:
            raise ConfigError("theta values must exceed -sigma")
    elif command == "validate":
        if params["inv_tol"]:
            try:
                tol = float(params["inv_tol"])
            except ValueError:
                raise ConfigError("inv_tol must be a float, got %r" % params["inv_tol"])
            if tol <= 0:
                raise ConfigError("inv_tol must be positive")
            params["inv_tol"] = tol
        else:
            params["inv_tol"] = None
    elif command == "fit-mixture":
        _check_fit_params(params)

    resolved = {
        "run": {"seed": _fmt(seed), "reps": _fmt(reps), "out": out, "threads": _fmt(threads)},
        command: {k: _canon(v) for k, v in params.items() if v is not None},
    }
    payload = {"command": command, "seed": _fmt(seed), "reps": _fmt(reps),
               "params": resolved[command]}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()
    return ExperimentConfig(command, seed, reps, out, threads, params, resolved, digest)


def _check_fit_params(p):
    if p["data"] is None:
        raise ConfigError("fit-mixture requires data = <path> in [fit-mixture]")
    if p["family"] not in ("independent", "completely_dependent", "beta_binomial", "lazy"):
        raise ConfigError("family must be one of independent, completely_dependent, "
                          "beta_binomial, lazy; got %r" % p["family"])
    if p["hyper"] not in ("none", "uniform"):
        raise ConfigError("hyper must be none or uniform, got %r" % p["hyper"])
    if p["hyper"] == "uniform" and p["family"] in ("independent", "completely_dependent"):
        raise ConfigError("hyper = uniform needs a beta_binomial or lazy family")
    if not 0.0 <= p["sigma"] < 1.0:
        raise ConfigError("sigma must lie in [0, 1)")
    if p["theta"] <= -p["sigma"]:
        raise ConfigError("theta must exceed -sigma")
    if p["n"] < 0:
        raise ConfigError("n must be >= 0")
    if not 0.0 <= p["rho"] <= 1.0:
        raise ConfigError("rho must lie in [0, 1]")
    if not (p["sweeps"] > p["burnin"] >= 0 and p["thin"] >= 1):
        raise ConfigError("need sweeps > burnin >= 0 and thin >= 1")
    try:
        lo, hi, npts = _parse_span(p["grid"])
    except ValueError as e:
        raise ConfigError("bad grid: %s" % e)
    # keep the span in lo:hi:points form so manifests reload cleanly
    p["grid"] = "%s:%s:%d" % (_fmt(lo), _fmt(hi), npts)
    if p["mu0"] != "auto":
        try:
            p["mu0"] = float(p["mu0"])
        except ValueError:
            raise ConfigError("mu0 must be a number or auto, got %r" % p["mu0"])
    for key in ("lam0", "a0", "b0"):
        if p[key] <= 0:
            raise ConfigError("%s must be positive" % key)
    truth = [p["truth_means"], p["truth_sds"], p["truth_weights"]]
    if any(t is not None for t in truth):
        if any(t is None for t in truth):
            raise ConfigError("truth_means, truth_sds, truth_weights must be given together")
        if not (len(truth[0]) == len(truth[1]) == len(truth[2])):
            raise ConfigError("truth component lists must share a length")


# --------------------------------------------------------------------------
# output plumbing
# --------------------------------------------------------------------------

def _header_line(cfg: ExperimentConfig) -> str:
    return "# msbp %s seed=%d config_sha256=%s" % (__version__, cfg.seed, cfg.config_sha256)


def _write_csv(path: str, cfg: ExperimentConfig, columns, rows) -> None:
    lines = [_header_line(cfg), ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(c) for c in row))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as e:
        raise InputError("cannot write %s: %s" % (path, e))


def _write_json(path: str, obj) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(obj, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as e:
        raise InputError("cannot write %s: %s" % (path, e))


def _write_manifest(cfg: ExperimentConfig, outputs, runtime_s: float) -> None:
    _write_json(os.path.join(cfg.out, "manifest.json"), {
        "command": cfg.command,
        "version": __version__,
        "seed": cfg.seed,
        "config_sha256": cfg.config_sha256,
        "config": cfg.resolved,
        "outputs": sorted(outputs),
        "runtime_seconds": round(runtime_s, 3),
    })


def _ensure_out(cfg: ExperimentConfig) -> None:
    try:
        os.makedirs(cfg.out, exist_ok=True)
    except OSError as e:
        raise InputError("cannot create output directory %s: %s" % (cfg.out, e))


def read_data_file(path: str) -> np.ndarray:
    """One real per line; text after # is ignored; blank lines skipped."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise InputError("cannot read data file %s: %s" % (path, e))
    vals = []
    for lineno, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            vals.append(float(body))
        except ValueError:
            raise InputError("%s line %d: %r is not a number" % (path, lineno, body))
    return np.asarray(vals, dtype=float)


# --------------------------------------------------------------------------
# prior-curves
# --------------------------------------------------------------------------

def _curve_model(family: str, sigma: float, theta: float, dep: float) -> MsbpModel:
    marg = PitmanYor(sigma, theta)
    trans = BetaBinomial(int(dep)) if family == "bmsb" else Lazy(dep)
    return MsbpModel(marg, trans)


def cmd_prior_curves(cfg: ExperimentConfig) -> int:
    t0 = time.time()
    _ensure_out(cfg)
    p = cfg.params
    family, sigma = p["family"], p["sigma"]

    tie_rows = []
    for it, theta in enumerate(p["theta_grid"]):
        for idep, dep in enumerate(p["dependence_grid"]):
            model = _curve_model(family, sigma, theta, dep)
            est, se = tie_probability_mc(model, cfg.reps, substream(cfg.seed, 1, it, idep))
            tie_rows.append((family, sigma, theta, dep, "tie_prob", est, se))
    _write_csv(os.path.join(cfg.out, "tie_prob.csv"), cfg,
               ("family", "sigma", "theta", "dependence", "statistic", "estimate", "stderr"),
               tie_rows)

    kn_grid = p["kn_grid"]
    n_max = max(kn_grid)
    kn_rows = []
    for idep, dep in enumerate(p["dependence_grid"]):
        model = _curve_model(family, sigma, p["kn_theta"], dep)
        traj = np.empty((cfg.reps, len(kn_grid)), dtype=np.int64)
        for r in range(cfg.reps):
            rng = substream(cfg.seed, 2, idep, r)
            u = rng.random(n_max)
            pref = extend_until(model, max(float(u.max()), 1e-12), rng)
            d = np.searchsorted(np.cumsum(pref.weights), u, side="right")
            seen, k, kcur = set(), np.empty(n_max, dtype=np.int64), 0
            for i, di in enumerate(d):
                if di not in seen:
                    seen.add(di)
                    kcur += 1
                k[i] = kcur
            traj[r] = k[np.asarray(kn_grid) - 1]
        mean = traj.mean(axis=0)
        se = traj.std(axis=0, ddof=1) / math.sqrt(cfg.reps)
        var = traj.var(axis=0, ddof=1)
        var_se = var * math.sqrt(2.0 / (cfg.reps - 1))
        for i, n in enumerate(kn_grid):
            kn_rows.append((family, sigma, p["kn_theta"], dep, n, mean[i], se[i], var[i], var_se[i]))
    _write_csv(os.path.join(cfg.out, "kn_curves.csv"), cfg,
               ("family", "sigma", "theta", "dependence", "n",
                "e_kn", "e_kn_stderr", "var_kn", "var_kn_stderr"),
               kn_rows)

    _write_manifest(cfg, ["tie_prob.csv", "kn_curves.csv"], time.time() - t0)
    print("prior-curves: wrote %d tie rows, %d K_n rows -> %s" % (len(tie_rows), len(kn_rows), cfg.out))
    return 0


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------

def _check_inv_roundtrip(cfg):
    rng = substream(cfg.seed, 10)
    n = 1000
    a = rng.uniform(0.2, 8.0, n)
    b = rng.uniform(0.2, 8.0, n)
    x = rng.uniform(0.01, 0.99, n)
    pvals = reg_inc_beta(a, b, x)
    with np.errstate(divide="ignore", over="ignore"):
        lpdf = (a - 1) * np.log(x) + (b - 1) * np.log1p(-x) - log_beta(a, b)
    keep = (pvals > 0.0) & (pvals < 1.0) & (lpdf > math.log(1e-5))
    back = inv_reg_inc_beta(a[keep], b[keep], pvals[keep], tol=cfg.params["inv_tol"])
    err = float(np.max(np.abs(back - x[keep])))
    return err < 1e-8, {"max_abs_error": err, "bound": 1e-8, "lanes": int(keep.sum())}


def _check_transport_roundtrip(cfg):
    rng = substream(cfg.seed, 11)
    v = rng.uniform(0.01, 0.99, 1000)
    back = transport(0.6, 7.0, 2.0, 3.0, transport(2.0, 3.0, 0.6, 7.0, v))
    err = float(np.max(np.abs(back - v)))
    return err < 1e-10, {"max_abs_error": err, "bound": 1e-10}


def _check_tie_dp(cfg):
    theta = 1.0
    est, se = tie_probability_mc(MsbpModel(ConstBeta(1.0, theta), Independent()),
                                 cfg.reps, substream(cfg.seed, 12))
    want = 1.0 / (1.0 + theta)
    return abs(est - want) < 4 * se + 1e-12, {"estimate": est, "target": want, "stderr": se}


def _check_tie_geometric(cfg):
    est, se = tie_probability_mc(MsbpModel(ConstBeta(1.0, 1.0), CompletelyDependent()),
                                 cfg.reps, substream(cfg.seed, 13))
    want = 2.0 * math.log(2.0) - 1.0
    return abs(est - want) < 4 * se + 1e-12, {"estimate": est, "target": want, "stderr": se}


def _check_tie_series_bb(cfg):
    series = tie_probability_series("bmsb_stationary", 1.0, 1.2, n=3).value
    est, se = tie_probability_mc(MsbpModel(ConstBeta(1.0, 1.2), BetaBinomial(3)),
                                 cfg.reps, substream(cfg.seed, 14))
    return abs(est - series) < 4 * se + 1e-9, {"estimate": est, "target": series, "stderr": se}


def _mc_mixed_moment(model, stats, reps, rng):
    v, _ = sample_prefix_matrix(model, stats.kappa, reps)
    a = np.asarray(stats.a, dtype=float)
    b = np.asarray(stats.b, dtype=float)
    vals = np.prod(v ** a * (1.0 - v) ** b, axis=1)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps))


def _check_moment_bb(cfg):
    stats = AllocationStats((1, 2))
    closed = mixed_moment_bmsb_stationary(1.0, 1.2, 2, stats)
    model = MsbpModel(ConstBeta(1.0, 1.2), BetaBinomial(2), seed=cfg.seed + 15)
    mc, se = _mc_mixed_moment(model, stats, cfg.reps, None)
    return abs(mc - closed) < 4 * se + 1e-9, {"closed": closed, "mc": mc, "stderr": se}


def _check_moment_lazy(cfg):
    stats = AllocationStats((1, 2))
    closed = mixed_moment_lmsb_stationary(1.0, 1.5, 0.6, stats)
    model = MsbpModel(ConstBeta(1.0, 1.5), Lazy(0.6), seed=cfg.seed + 16)
    mc, se = _mc_mixed_moment(model, stats, cfg.reps, None)
    return abs(mc - closed) < 4 * se + 1e-9, {"closed": closed, "mc": mc, "stderr": se}


def _check_gibbs_z(cfg):
    # two sticks at one half, one latent count: conditional pmf is (1/6, 2/3, 1/6)
    reps = max(cfg.reps, 2000)
    rng = substream(cfg.seed, 17)
    hits = np.zeros(3)
    for _ in range(reps):
        st = GibbsState(ConstBeta(1.0, 1.0),
                        LengthPrefix(np.array([0.5, 0.5]), np.array([0, 0], dtype=np.int64)),
                        AllocationStats(()), 2)
        bmsb_update_z(st, rng)
        hits[int(st.prefix.aux[0])] += 1
    freq = hits / reps
    want = np.array([1 / 6, 2 / 3, 1 / 6])
    se = np.sqrt(want * (1 - want) / reps)
    ok = bool(np.all(np.abs(freq - want) < 4 * se + 1e-12))
    return ok, {"freq": freq.tolist(), "target": want.tolist()}


def _check_gibbs_n(cfg):
    # uniform prior on {0..3}, flat sticks, zero counts: pmf ~ (1+N) 0.125^N
    reps = max(cfg.reps, 2000)
    rng = substream(cfg.seed, 18)
    want = np.array([(1 + n) * 0.125 ** n for n in range(4)])
    want /= want.sum()
    hits = np.zeros(4)
    for _ in range(reps):
        st = GibbsState(ConstBeta(1.0, 1.0),
                        LengthPrefix(np.array([0.5, 0.5]), np.array([0, 0], dtype=np.int64)),
                        AllocationStats(()), 2, np.full(4, 0.25))
        bmsb_update_N(st, rng)
        hits[int(st.hyper)] += 1
    freq = hits / reps
    se = np.sqrt(want * (1 - want) / reps)
    ok = bool(np.all(np.abs(freq - want) < 4 * se + 1e-12))
    return ok, {"freq": freq.tolist(), "target": want.tolist()}


def _check_kn_mean_dp(cfg):
    theta, n = 3.0, 50
    want = sum(theta / (theta + i) for i in range(n))
    reps = min(cfg.reps, 4000)
    rng = substream(cfg.seed, 19)
    model = MsbpModel(ConstBeta(1.0, theta), Independent())
    ks = np.array([sample_Kn(model, n, rng) for _ in range(reps)], dtype=float)
    est, se = float(ks.mean()), float(ks.std(ddof=1) / math.sqrt(reps))
    return abs(est - want) < 4 * se, {"estimate": est, "target": want, "stderr": se}


_VALIDATE_CHECKS = (
    ("inv_beta_roundtrip", _check_inv_roundtrip),
    ("transport_roundtrip", _check_transport_roundtrip),
    ("tie_prob_dp", _check_tie_dp),
    ("tie_prob_geometric", _check_tie_geometric),
    ("tie_series_vs_mc_bb", _check_tie_series_bb),
    ("mixed_moment_bb_vs_mc", _check_moment_bb),
    ("mixed_moment_lazy_vs_mc", _check_moment_lazy),
    ("gibbs_count_conditional", _check_gibbs_z),
    ("gibbs_coupling_posterior", _check_gibbs_n),
    ("kn_mean_dp", _check_kn_mean_dp),
)


def cmd_validate(cfg: ExperimentConfig) -> int:
    t0 = time.time()
    _ensure_out(cfg)
    report = []
    all_ok = True
    for name, fn in _VALIDATE_CHECKS:
        tc = time.time()
        try:
            ok, stats = fn(cfg)
        except Exception as e:  # a crashed check is a failed check
            ok, stats = False, {"error": "%s: %s" % (type(e).__name__, e)}
        entry = {"name": name, "passed": bool(ok), "runtime_s": round(time.time() - tc, 4)}
        entry.update(stats)
        report.append(entry)
        all_ok &= ok
        print("%s %s (%.2fs)" % ("PASS" if ok else "FAIL", name, entry["runtime_s"]))
    _write_json(os.path.join(cfg.out, "validate.json"), {
        "version": __version__,
        "seed": cfg.seed,
        "config_sha256": cfg.config_sha256,
        "all_passed": bool(all_ok),
        "checks": report,
    })
    _write_manifest(cfg, ["validate.json"], time.time() - t0)
    return 0 if all_ok else 1


# --------------------------------------------------------------------------
# moments-check
# --------------------------------------------------------------------------

_MOMENT_BATTERY = (
    ("bmsb", 1.0, 1.0, 0, (2,)),
    ("bmsb", 1.0, 1.2, 3, (1, 2)),
    ("bmsb", 2.0, 3.0, 4, (2, 1)),
    ("bmsb", 1.5, 0.8, 2, (0, 2)),
    ("bmsb", 1.0, 2.0, 5, (3,)),
    ("lmsb", 1.0, 1.0, 1.0, (2,)),
    ("lmsb", 1.0, 1.5, 0.6, (1, 2)),
    ("lmsb", 2.0, 3.0, 0.3, (2, 1)),
    ("lmsb", 0.7, 1.1, 0.0, (1, 1, 1)),
    ("lmsb", 1.0, 2.0, 0.8, (0, 3)),
)


def cmd_moments_check(cfg: ExperimentConfig) -> int:
    t0 = time.time()
    _ensure_out(cfg)
    zmax = cfg.params["z_threshold"]
    rows = []
    all_ok = True
    for i, (family, alpha, beta, par, counts) in enumerate(_MOMENT_BATTERY):
        stats = AllocationStats(counts)
        if family == "bmsb":
            closed = mixed_moment_bmsb_stationary(alpha, beta, int(par), stats)
            trans = BetaBinomial(int(par))
        else:
            closed = mixed_moment_lmsb_stationary(alpha, beta, float(par), stats)
            trans = Lazy(float(par))
        model = MsbpModel(ConstBeta(alpha, beta), trans, seed=cfg.seed + 100 + i)
        mc, se = _mc_mixed_moment(model, stats, cfg.reps, None)
        z = (mc - closed) / se if se > 0 else 0.0
        ok = abs(z) <= zmax
        all_ok &= ok
        rows.append((family, alpha, beta, par, ";".join(str(c) for c in counts),
                     closed, mc, se, z, ok))
        print("%s %s alpha=%g beta=%g par=%s z=%.2f" % ("PASS" if ok else "FAIL",
                                                        family, alpha, beta, par, z))
    _write_csv(os.path.join(cfg.out, "moments_check.csv"), cfg,
               ("family", "alpha", "beta", "par", "counts", "closed", "mc", "stderr", "z", "passed"),
               rows)
    _write_manifest(cfg, ["moments_check.csv"], time.time() - t0)
    return 0 if all_ok else 1


# --------------------------------------------------------------------------
# fit-mixture
# --------------------------------------------------------------------------

def _fit_model(p) -> MsbpModel:
    marg = PitmanYor(p["sigma"], p["theta"]) if p["sigma"] > 0 else ConstBeta(1.0, p["theta"])
    trans = {
        "independent": lambda: Independent(),
        "completely_dependent": lambda: CompletelyDependent(),
        "beta_binomial": lambda: BetaBinomial(p["n"]),
        "lazy": lambda: Lazy(p["rho"]),
    }[p["family"]]()
    return MsbpModel(marg, trans)


def _one_replicate(r, cfg, data, grid, truth_pdf):
    p = cfg.params
    mu0 = float(data.mean()) if p["mu0"] == "auto" and data.size else (
        0.0 if p["mu0"] == "auto" else p["mu0"])
    spec = MixtureSpec(_fit_model(p), mu0=mu0, lam0=p["lam0"], a0=p["a0"], b0=p["b0"],
                       data=data, hyper_prior=None if p["hyper"] == "none" else "uniform")
    draws = fit(spec, iters=p["sweeps"], burnin=p["burnin"], thin=p["thin"],
                rng=substream(cfg.seed, 3, r))
    est = density_estimate(draws, spec, grid)
    pmf = posterior_Kn(draws)
    out = {
        "replicate": r,
        "kn_pmf": [float(x) for x in pmf],
        "kn_mode": int(np.argmax(pmf)),
        "binder_partition": binder_cluster_estimate(draws) if data.size else [],
        "density": est.values,
    }
    if truth_pdf is not None:
        out["tv"] = tv_distance(est, DensityEstimate(grid, truth_pdf))
    return out


def cmd_fit_mixture(cfg: ExperimentConfig) -> int:
    t0 = time.time()
    _ensure_out(cfg)
    p = cfg.params
    data = read_data_file(p["data"])
    lo, hi, npts = _parse_span(p["grid"])
    grid = np.linspace(lo, hi, npts)
    truth_pdf = None
    if p["truth_means"] is not None:
        truth = GaussianMixtureTruth(tuple(p["truth_means"]), tuple(p["truth_sds"]),
                                     tuple(p["truth_weights"]))
        truth_pdf = truth.pdf(grid)

    reps = list(range(cfg.reps))
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda r: _one_replicate(r, cfg, data, grid, truth_pdf), reps))
    else:
        results = [_one_replicate(r, cfg, data, grid, truth_pdf) for r in reps]

    columns = ["y"] + ["density_rep%d" % r for r in reps] + ["density_mean"]
    dens = np.column_stack([res["density"] for res in results])
    rows = [(grid[i], *dens[i], dens[i].mean()) for i in range(len(grid))]
    _write_csv(os.path.join(cfg.out, "density.csv"), cfg, columns, rows)

    summary = {
        "version": __version__,
        "seed": cfg.seed,
        "config_sha256": cfg.config_sha256,
        "n_obs": int(data.size),
        "settings": {"sweeps": p["sweeps"], "burnin": p["burnin"], "thin": p["thin"]},
        "replicates": [],
    }
    for res in results:
        entry = {k: v for k, v in res.items() if k != "density"}
        summary["replicates"].append(entry)
    if truth_pdf is not None:
        tvs = [res["tv"] for res in results]
        summary["tv_mean"] = float(np.mean(tvs))
        summary["tv_sd"] = float(np.std(tvs, ddof=1)) if len(tvs) > 1 else 0.0
    _write_json(os.path.join(cfg.out, "summary.json"), summary)
    _write_manifest(cfg, ["density.csv", "summary.json"], time.time() - t0)
    if truth_pdf is not None:
        print("fit-mixture: %d replicates, mean TV %.4f -> %s"
              % (cfg.reps, summary["tv_mean"], cfg.out))
    else:
        print("fit-mixture: %d replicates -> %s" % (cfg.reps, cfg.out))
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

_COMMANDS = {
    "prior-curves": cmd_prior_curves,
    "validate": cmd_validate,
    "moments-check": cmd_moments_check,
    "fit-mixture": cmd_fit_mixture,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msbp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="INI config or manifest.json")
        sp.add_argument("--seed", type=int, default=None, help="overrides [run] seed")
        sp.add_argument("--reps", type=int, default=None, help="overrides [run] reps")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (or MSBP_THREADS)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        return _COMMANDS[args.command](cfg)
    except ConfigError as e:
        print("config error: %s" % e, file=sys.stderr)
        return 2
    except InputError as e:
        print("i/o error: %s" % e, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
