"""Batch experiment runner.

Every operation is exposed as a subcommand; each run writes its outputs plus
a ``manifest.json`` echoing the fully resolved configuration and the
artifact version, so any CSV can be reproduced from its manifest alone:

    recur-ldp tails --model '{"kind":"iid","pmf":[0.3,0.7]}' \
        --side upper --n 8,10,12 --eps 0.25 --trials 10000 --seed 7 --out runs/t
    recur-ldp tails --config runs/t/manifest.json --out runs/t2   # same CSV bytes

Exit codes: 0 success, 2 configuration error, 3 runtime guard (threshold or
memory limits).  Flags override config-file values; the merged result is
logged and recorded in the manifest.  ``--threads`` (or RECUR_LDP_THREADS)
parallelizes trials without changing any output byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, estimators, ldp, sources
from ._kernels import mix64
from .recurrence import (Realization, dump_realization, load_realization,
                         match_length, recurrence_indexed)

REALIZATION_GUARD = 2 ** 28
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration; the message names the field."""


class MemoryGuardExceeded(RuntimeError):
    """A single realization would exceed the memory guard."""


def _sizing_hint(model) -> str:
    h = sources.entropy_rate(model)
    return (f"hint: a length-n block of this source (H = {h:.5f} bits) typically "
            f"recurs within about 2**({h:.3f}*n) symbols; at n = 20 that is "
            f"{2.0 ** (h * 20):.3e}. Reduce n, epsilon or the window size.")


def _check_budget(length: int, model) -> None:
    if length > REALIZATION_GUARD:
        raise MemoryGuardExceeded(
            f"requested realization of {length} symbols exceeds the cap "
            f"{REALIZATION_GUARD} (2^28). {_sizing_hint(model)}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _parse_num_list(text, kind=int):
    if isinstance(text, (list, tuple)):
        return [kind(v) for v in text]
    try:
        return [kind(part) for part in str(text).split(",") if part != ""]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# Configuration resolution: defaults <- config file <- explicit flags
# ---------------------------------------------------------------------------

COMMON_KEYS = ("model", "model_file", "seed", "threads", "out")

DEFAULTS = {
    "model-info": {},
    "simulate": {"length": 1024, "past": None},
    "recur": {"past": 4096, "future": 64, "n": [4, 8, 12], "m": [4, 16, 64],
              "j_max": None, "realization": None},
    "estimate": {"n": [8, 12, 16], "c": 1.0, "k": 2.0, "num_seeds": 20,
                 "w_max": None, "w_cap": estimators.DEFAULT_W_CAP},
    "tails": {"side": "upper", "n": [8, 10, 12], "eps": [0.25], "trials": 10000,
              "boundary": "strict"},
    "rate-fit": {"in": None},
    "aep": {"n": [8, 10, 12], "delta": 0.2},
    "cramer": {"level_nats": None, "eps_bits": None},
    "kim-check": {"block": [0, 0, 0, 0, 0, 0, 1], "samples": 10000, "u_max": 10.0},
    "kac-check": {"block": [0, 0, 0], "samples": 100000, "u_max": 10.0},
    "compare-estimators": {"n": [8, 12], "c": 1.0, "k": 2.0, "num_seeds": 10,
                           "m": None, "w_max": None, "w_cap": estimators.DEFAULT_W_CAP},
    "plot": {"in": None, "x": "n", "y": "p_hat", "group": None, "logy": False,
             "svg": "plot.svg"},
}

MODEL_FREE = {"rate-fit", "plot"}
LIST_INT_KEYS = {"n", "m", "block"}
LIST_FLOAT_KEYS = {"eps", "level_nats", "eps_bits"}


def _load_config_file(path: str, command: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    if "subcommand" in doc:  # a manifest; replay its embedded config
        if doc["subcommand"] != command:
            raise ConfigError(
                f"manifest {path} was written by subcommand {doc['subcommand']!r}, "
                f"not {command!r}")
        doc = doc.get("config", {})
    doc = dict(doc)
    doc.pop("schema_version", None)
    return doc


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    cfg.update({"model": None, "model_file": None, "seed": 1, "threads": None, "out": None})
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config, command)
        for key, val in file_cfg.items():
            if key not in cfg:
                raise ConfigError(f"unknown config field {key!r} for subcommand {command}")
            cfg[key] = val
    for key in cfg:
        flag = key.replace("-", "_")
        if hasattr(args, flag) and getattr(args, flag) is not None:
            cfg[key] = getattr(args, flag)
    if cfg.get("threads") is None:
        cfg["threads"] = int(os.environ.get("RECUR_LDP_THREADS", "1") or 1)
    cfg["threads"] = int(cfg["threads"])
    if cfg["threads"] == 0:
        cfg["threads"] = os.cpu_count() or 1
    if cfg["threads"] < 0:
        raise ConfigError(f"threads must be >= 0, got {cfg['threads']}")
    cfg["seed"] = int(cfg["seed"])
    if isinstance(cfg.get("block"), str) and "," not in cfg["block"]:
        cfg["block"] = [int(ch) for ch in cfg["block"]]  # compact form like 0000001
    for key in LIST_INT_KEYS & cfg.keys():
        if cfg[key] is not None:
            cfg[key] = _parse_num_list(cfg[key], int)
    for key in LIST_FLOAT_KEYS & cfg.keys():
        if cfg[key] is not None:
            cfg[key] = _parse_num_list(cfg[key], float)
    return cfg


def _resolve_model(cfg: dict):
    spec = cfg.get("model")
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--model is not valid JSON: {exc}") from exc
    if spec is None and cfg.get("model_file"):
        try:
            with open(cfg["model_file"], "r", encoding="utf-8") as fh:
                spec = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read model file {cfg['model_file']}: {exc}") from exc
    if spec is None:
        raise ConfigError("a model is required: pass --model JSON or --model-file PATH")
    model = sources.model_from_spec(spec)
    cfg["model"] = sources.model_to_spec(model)  # canonical echo for the manifest
    cfg["model_file"] = None
    return model


def _seeds_for(cfg: dict, count: int):
    return [int(mix64(np.uint64(cfg["seed"]), np.uint64(i))) for i in range(count)]


# ---------------------------------------------------------------------------
# Subcommand handlers: cfg, outdir -> list of output file names
# ---------------------------------------------------------------------------

def cmd_model_info(cfg, outdir):
    model = _resolve_model(cfg)
    h = sources.entropy_rate(model)
    info = {"model_id": sources.model_id(model), "entropy_rate_bits": h,
            "alphabet_size": model.alphabet_size}
    print(f"model: {info['model_id']}")
    print(f"entropy rate H = {h:.5f} bits/symbol")
    if isinstance(model, sources.MarkovSource):
        cls = sources.classify_chain(model.transition)
        info.update({"irreducible": cls.irreducible, "aperiodic": cls.aperiodic,
                     "period": cls.period,
                     "stationary": model.stationary.tolist()})
        print(f"stationary distribution: {np.array2string(model.stationary, precision=6)}")
        print(f"classification: irreducible={cls.irreducible}, "
              f"aperiodic={cls.aperiodic}, period={cls.period}")
        if not cls.ergodic:
            why = "not irreducible" if not cls.irreducible else "not aperiodic"
            print(f"warning: exponential-mixing hypotheses not met: {why} "
                  f"(period {cls.period}); tail guarantees do not apply")
    (outdir / "model-info.json").write_text(json.dumps(info, indent=2), encoding="utf-8")
    return ["model-info.json"]


def cmd_simulate(cfg, outdir):
    model = _resolve_model(cfg)
    length = int(cfg["length"])
    if length < 2:
        raise ConfigError(f"length must be >= 2, got {length}")
    _check_budget(length, model)
    past = cfg["past"] if cfg["past"] is not None else length // 2
    past = int(past)
    if not 1 <= past <= length - 1:
        raise ConfigError(f"past must be in 1..length-1, got {past}")
    data = sources.generate(model, length, cfg["seed"])
    real = Realization(data, past - 1)
    dump_realization(real, outdir / "realization.bin")
    freq = np.bincount(data, minlength=model.alphabet_size) / length
    print(f"wrote {length} symbols (past {past}); symbol frequencies "
          f"{np.array2string(freq, precision=4)}")
    return ["realization.bin", "realization.bin.json"]


def cmd_recur(cfg, outdir):
    model = _resolve_model(cfg)
    if cfg.get("realization"):
        real = load_realization(cfg["realization"])
    else:
        past, future = int(cfg["past"]), int(cfg["future"])
        _check_budget(past + future, model)
        data = sources.generate(model, past + future, cfg["seed"])
        real = Realization(data, past - 1)
    j_max = int(cfg["j_max"]) if cfg.get("j_max") else real.past_length
    rows = []
    for n in cfg["n"]:
        if n > real.future_length:
            raise ConfigError(f"n = {n} exceeds the future length {real.future_length}")
        out = recurrence_indexed(real, n, j_max)
        rows.append(["R", n, out.r, out.censored, out.window])
    for m in cfg["m"]:
        if m > real.past_length:
            raise ConfigError(f"m = {m} exceeds the past length {real.past_length}")
        out = match_length(real, m)
        rows.append(["L", m, out.length, out.future_limited, real.future_length])
    _write_csv(outdir / "recur.csv", ["stat", "param", "value", "censored_or_limited", "window"],
               rows)
    return ["recur.csv"]


def cmd_estimate(cfg, outdir):
    model = _resolve_model(cfg)
    schedule = estimators.QSchedule(float(cfg["c"]), float(cfg["k"]))
    seeds = _seeds_for(cfg, int(cfg["num_seeds"]))
    w_max = int(cfg["w_max"]) if cfg.get("w_max") else None
    for n in cfg["n"]:
        wm = w_max if w_max is not None else estimators.default_w_max(model, n, int(cfg["w_cap"]))
        _check_budget(wm + schedule.q(n) + n, model)
    reports, summary = estimators.convergence_sweep(
        model, cfg["n"], schedule, seeds, w_max=w_max, w_cap=int(cfg["w_cap"]),
        threads=cfg["threads"])
    mid = sources.model_id(model)
    _write_csv(outdir / "estimates.csv",
               ["model_id", "n", "Q", "estimate_bits", "censored", "flag", "seed"],
               [[mid, r.n, r.q, r.estimate_bits, r.censored_count, r.flag, r.seed]
                for r in reports])
    _write_csv(outdir / "summary.csv",
               ["model_id", "n", "mean_bits", "std_bits", "censored_total"],
               [[mid, n, s["mean"], s["std"], s["censored_total"]]
                for n, s in summary.items()])
    h = sources.entropy_rate(model)
    for n, s in summary.items():
        print(f"n={n:3d}  mean J_n = {s['mean']:.5f}  (H = {h:.5f}, "
              f"|mean-H| = {abs(s['mean'] - h):.5f}, sd = {s['std']:.5f})")
    return ["estimates.csv", "summary.csv"]


def _tail_budget(model, side, n, eps):
    h = sources.entropy_rate(model)
    if side == "upper":
        return int(math.ceil(2.0 ** (n * (h + eps)))) + 2 * n
    if side == "lower":
        return int(math.ceil(2.0 ** (n * (h - eps)))) + 2 * n
    if side in ("match_upper", "match_lower"):
        return 2 * n  # n carries m; the scan block is O(log m)
    return n


def cmd_tails(cfg, outdir):
    model = _resolve_model(cfg)
    side = cfg["side"]
    if side not in ("upper", "lower", "aep", "match_upper", "match_lower"):
        raise ConfigError(f"side must be upper/lower/aep/match_upper/match_lower, got {side!r}")
    trials = int(cfg["trials"])
    rows = []
    mid = sources.model_id(model)
    for eps in cfg["eps"]:
        for n in cfg["n"]:
            _check_budget(_tail_budget(model, side, n, eps), model)
            if side == "upper":
                est = ldp.mc_tail_upper(model, n, eps, trials, cfg["seed"],
                                        threads=cfg["threads"], boundary=cfg["boundary"])
            elif side == "lower":
                est = ldp.mc_tail_lower(model, n, eps, trials, cfg["seed"],
                                        threads=cfg["threads"], boundary=cfg["boundary"])
            elif side == "aep":
                est = ldp.mc_tail_aep(model, n, eps, trials, cfg["seed"],
                                      threads=cfg["threads"])
            else:
                est = ldp.mc_tail_match(model, n, eps, side.removeprefix("match_"),
                                        trials, cfg["seed"], threads=cfg["threads"])
            rows.append([mid, est.n, est.epsilon, est.side, est.trials, est.hit_count,
                         est.p_hat, est.ci_low, est.ci_high, est.threshold_t,
                         est.master_seed])
            print(f"side={est.side} n={est.n} eps={est.epsilon}: p_hat={est.p_hat:.6g} "
                  f"[{est.ci_low:.6g}, {est.ci_high:.6g}] hits={est.hit_count}")
    _write_csv(outdir / "tails.csv",
               ["model_id", "n", "epsilon", "side", "trials", "hits", "p_hat",
                "ci_low", "ci_high", "threshold", "seed"],
               rows)
    return ["tails.csv"]


def cmd_rate_fit(cfg, outdir):
    if not cfg.get("in"):
        raise ConfigError("rate-fit requires --in TAILS_CSV")
    with open(cfg["in"], "r", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{cfg['in']} contains no rows")
    groups = {}
    for row in rows:
        key = (row["model_id"], row["side"], float(row["epsilon"]))
        groups.setdefault(key, []).append(
            (int(row["n"]), float(row["p_hat"]), int(row["hits"])))
    out_rows = []
    anchor_model = None
    if cfg.get("model") or cfg.get("model_file"):
        anchor_model = _resolve_model(cfg)
    for (mid, side, eps), pts in sorted(groups.items()):
        try:
            fit = ldp.fit_rate(pts, eps, side)
        except ldp.InsufficientPoints as exc:
            print(f"skip {mid} side={side} eps={eps}: {exc}")
            continue
        out_rows.append([mid, eps, side, fit.slope_nats, fit.intercept,
                         fit.r_squared, len(fit.points)])
        msg = (f"{mid} side={side} eps={eps}: slope = {fit.slope_nats:.5f} nats/symbol, "
               f"r^2 = {fit.r_squared:.4f}")
        if anchor_model is not None and isinstance(anchor_model, sources.IIDSource):
            anchor = ldp.aep_rate_anchor(anchor_model.pmf, eps / 2.0)
            msg += f"  [typical-set anchor at eps/2: {anchor:.5f} nats/symbol]"
        print(msg)
    if not out_rows:
        raise ConfigError("no (model, side, epsilon) group had 3 usable points")
    _write_csv(outdir / "fits.csv",
               ["model_id", "epsilon", "side", "slope_nats", "intercept", "r2",
                "points_used"],
               out_rows)
    return ["fits.csv"]


def cmd_aep(cfg, outdir):
    model = _resolve_model(cfg)
    delta = float(cfg["delta"])
    mid = sources.model_id(model)
    rows = []
    for n in cfg["n"]:
        p = ldp.aep_tail_exact(model, n, delta)
        rate = -math.log(p) / n if p > 0 else math.inf
        rows.append([mid, n, delta, p, rate])
        print(f"n={n}: P(outside typical set) = {p:.6g}  (-ln p / n = {rate:.5f})")
    _write_csv(outdir / "aep.csv", ["model_id", "n", "delta", "p_tail", "rate_nats"], rows)
    return ["aep.csv"]


def cmd_cramer(cfg, outdir):
    model = _resolve_model(cfg)
    if not isinstance(model, sources.IIDSource):
        raise ConfigError("cramer requires an iid model")
    levels = list(cfg["level_nats"] or [])
    h_nats = sources.entropy_rate(model) * math.log(2.0)
    for eps in cfg.get("eps_bits") or []:
        levels.extend([h_nats + eps * math.log(2.0), h_nats - eps * math.log(2.0)])
    if not levels:
        raise ConfigError("cramer requires --level-nats and/or --eps-bits")
    mid = sources.model_id(model)
    rows = []
    for a in levels:
        r = ldp.cramer_rate_iid(model.pmf, a)
        rows.append([mid, r.level_nats, r.rate_nats, r.argmax_lambda, r.degenerate])
        print(f"I({r.level_nats:.6f}) = {r.rate_nats:.6f} nats  "
              f"(lambda* = {r.argmax_lambda:.6f}, degenerate = {r.degenerate})")
    _write_csv(outdir / "cramer.csv",
               ["model_id", "level_nats", "rate_nats", "argmax_lambda", "degenerate"],
               rows)
    return ["cramer.csv"]


def cmd_kim_check(cfg, outdir):
    model = _resolve_model(cfg)
    block = cfg["block"]
    samples = int(cfg["samples"])
    p = sources.block_probability(model, block).probability
    _check_budget(int(math.ceil(float(cfg["u_max"]) / p)) + len(block), model)
    res = ldp.kim_check(model, block, samples, cfg["seed"],
                        u_max=float(cfg["u_max"]), threads=cfg["threads"])
    mid = sources.model_id(model)
    blk = "".join(str(int(b)) for b in block)
    print(f"block {blk}: KS distance to Exp(1) = {res.ks_distance:.5f}, "
          f"mean U = {res.mean_u:.5f}, censored = {res.censored}/{samples}")
    _write_csv(outdir / "kim.csv",
               ["model_id", "block", "samples", "ks", "mean_U", "censored"],
               [[mid, blk, samples, res.ks_distance, res.mean_u, res.censored]])
    return ["kim.csv"]


def cmd_kac_check(cfg, outdir):
    model = _resolve_model(cfg)
    block = cfg["block"]
    samples = int(cfg["samples"])
    p = sources.block_probability(model, block).probability
    _check_budget(int(math.ceil(float(cfg["u_max"]) / p)) + len(block), model)
    res = ldp.kac_check(model, block, samples, cfg["seed"],
                        u_max=float(cfg["u_max"]), threads=cfg["threads"])
    mid = sources.model_id(model)
    blk = "".join(str(int(b)) for b in block)
    print(f"block {blk}: mean R = {res.mean_rn:.4f}, target 1/P = {res.target:.4f}, "
          f"rel err = {res.rel_err:.5f}, censored = {res.censored}/{samples}")
    _write_csv(outdir / "kac.csv",
               ["model_id", "block", "samples", "mean_rn", "target", "rel_err", "censored"],
               [[mid, blk, samples, res.mean_rn, res.target, res.rel_err, res.censored]])
    return ["kac.csv"]


def cmd_compare_estimators(cfg, outdir):
    model = _resolve_model(cfg)
    schedule = estimators.QSchedule(float(cfg["c"]), float(cfg["k"]))
    seeds = _seeds_for(cfg, int(cfg["num_seeds"]))
    h = sources.entropy_rate(model)
    w_max = int(cfg["w_max"]) if cfg.get("w_max") else None
    m_list = cfg.get("m")
    mid = sources.model_id(model)
    rows = []
    for i, n in enumerate(cfg["n"]):
        m = int(m_list[i]) if m_list else max(2, math.ceil(2.0 ** (n * h)))
        wm = w_max if w_max is not None else estimators.default_w_max(model, n, int(cfg["w_cap"]))
        q = schedule.q(n)
        dual_len = m + q + max(n, 8) * 8
        _check_budget(max(wm + q + n, dual_len), model)
        for seed in seeds:
            jn = estimators.jn_for_model(model, n, schedule, seed, w_max=wm)
            data = sources.generate(model, dual_len, seed)
            dual = estimators.estimate_match_dual(Realization(data, m - 1), m, q)
            rows.append([mid, n, jn.estimate_bits, jn.censored_count, jn.flag,
                         m, dual.estimate_bits, dual.censored_count, dual.flag, seed])
    _write_csv(outdir / "compare.csv",
               ["model_id", "n", "jn_bits", "jn_censored", "jn_flag",
                "m", "match_bits", "match_censored", "match_flag", "seed"],
               rows)
    for n in cfg["n"]:
        jn_vals = [r[2] for r in rows if r[1] == n]
        mt_vals = [r[6] for r in rows if r[1] == n]
        print(f"n={n}: mean J_n = {np.mean(jn_vals):.5f}, "
              f"mean match dual = {np.mean(mt_vals):.5f}  (H = {h:.5f})")
    return ["compare.csv"]


def cmd_plot(cfg, outdir):
    if not cfg.get("in"):
        raise ConfigError("plot requires --in CSV")
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    with open(cfg["in"], "r", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{cfg['in']} contains no rows")
    x_col, y_col, group_col = cfg["x"], cfg["y"], cfg.get("group")
    for col in (x_col, y_col) + ((group_col,) if group_col else ()):
        if col not in rows[0]:
            raise ConfigError(f"column {col!r} not in {cfg['in']} "
                              f"(has {sorted(rows[0])})")
    fig, ax = plt.subplots(figsize=(6, 4))
    groups = {}
    for row in rows:
        groups.setdefault(row[group_col] if group_col else "", []).append(
            (float(row[x_col]), float(row[y_col])))
    for label, pts in sorted(groups.items()):
        pts.sort()
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, marker="o", label=label or None)
    if cfg.get("logy"):
        ax.set_yscale("log")
    ax.set_xlabel(x_col)
    ax.set_ylabel(y_col)
    if group_col:
        ax.legend(title=group_col)
    ax.grid(True, alpha=0.3)
    name = cfg["svg"]
    fig.savefig(outdir / name, format="svg")
    plt.close(fig)
    return [name]


HANDLERS = {
    "model-info": cmd_model_info,
    "simulate": cmd_simulate,
    "recur": cmd_recur,
    "estimate": cmd_estimate,
    "tails": cmd_tails,
    "rate-fit": cmd_rate_fit,
    "aep": cmd_aep,
    "cramer": cmd_cramer,
    "kim-check": cmd_kim_check,
    "kac-check": cmd_kac_check,
    "compare-estimators": cmd_compare_estimators,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recur-ldp",
        description="Recurrence-time statistics workbench: entropy estimation "
                    "and deviation-tail experiments on exact source models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, extra):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config or a manifest.json to replay")
        p.add_argument("--seed", type=int, help="master seed (64-bit)")
        p.add_argument("--out", help="output directory (default runs/<subcommand>)")
        p.add_argument("--threads", type=int,
                       help="worker threads; 0 = auto (env RECUR_LDP_THREADS)")
        if name not in MODEL_FREE:
            p.add_argument("--model", help="inline model spec as JSON")
            p.add_argument("--model-file", help="path to a model spec JSON file")
        extra(p)
        return p

    add("model-info", "entropy rate, classification, stationary distribution",
        lambda p: None)
    add("simulate", "generate a realization and dump it with its header",
        lambda p: (p.add_argument("--length", type=int),
                   p.add_argument("--past", type=int)))
    add("recur", "recurrence/match-length table on one realization",
        lambda p: (p.add_argument("--past", type=int),
                   p.add_argument("--future", type=int),
                   p.add_argument("--n"), p.add_argument("--m"),
                   p.add_argument("--j-max", type=int),
                   p.add_argument("--realization")))
    add("estimate", "shifted-window entropy estimator convergence sweep",
        lambda p: (p.add_argument("--n"), p.add_argument("--c", type=float),
                   p.add_argument("--k", type=float),
                   p.add_argument("--num-seeds", type=int),
                   p.add_argument("--w-max", type=int),
                   p.add_argument("--w-cap", type=int)))
    add("tails", "Monte Carlo deviation-tail sweep",
        lambda p: (p.add_argument("--side"), p.add_argument("--n"),
                   p.add_argument("--eps"), p.add_argument("--trials", type=int),
                   p.add_argument("--boundary", choices=["strict", "weak"])))
    add("rate-fit", "fit exponential decay rates to a tails CSV",
        lambda p: (p.add_argument("--in", dest="in_", help="tails CSV"),
                   p.add_argument("--model", help="iid model for the rate anchor"),
                   p.add_argument("--model-file")))
    add("aep", "exact typical-set tail probabilities",
        lambda p: (p.add_argument("--n"), p.add_argument("--delta", type=float)))
    add("cramer", "Legendre-transform rate oracle for iid sources",
        lambda p: (p.add_argument("--level-nats"), p.add_argument("--eps-bits")))
    add("kim-check", "conditional exponential-law check for a block",
        lambda p: (p.add_argument("--block"), p.add_argument("--samples", type=int),
                   p.add_argument("--u-max", type=float)))
    add("kac-check", "conditional mean return time vs 1/P(block)",
        lambda p: (p.add_argument("--block"), p.add_argument("--samples", type=int),
                   p.add_argument("--u-max", type=float)))
    add("compare-estimators", "recurrence estimator vs match-length dual",
        lambda p: (p.add_argument("--n"), p.add_argument("--m"),
                   p.add_argument("--c", type=float), p.add_argument("--k", type=float),
                   p.add_argument("--num-seeds", type=int),
                   p.add_argument("--w-max", type=int),
                   p.add_argument("--w-cap", type=int)))
    add("plot", "CSV to SVG line/log plot (no recomputation)",
        lambda p: (p.add_argument("--in", dest="in_", help="input CSV"),
                   p.add_argument("--x"), p.add_argument("--y"),
                   p.add_argument("--group"),
                   p.add_argument("--logy", action="store_const", const=True),
                   p.add_argument("--svg", help="output SVG file name")))
    return parser


def write_manifest(outdir: Path, command: str, cfg: dict, outputs) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "subcommand": command,
        "config": {k: v for k, v in cfg.items() if k != "out"},
        "outputs": list(outputs),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "in_"):
        args.__dict__["in"] = args.in_
    command = args.command
    try:
        cfg = resolve_config(command, args)
        outdir = Path(getattr(args, "out", None) or cfg.get("out") or f"runs/{command}")
        cfg.pop("out", None)
        outdir.mkdir(parents=True, exist_ok=True)
        outputs = HANDLERS[command](cfg, outdir)
        shown = {k: v for k, v in cfg.items() if v is not None and k != "out"}
        print(f"config: {json.dumps(shown, sort_keys=True)}")
        write_manifest(outdir, command, cfg, outputs)
        print(f"outputs in {outdir}: {', '.join(outputs)} (+ manifest.json)")
        return 0
    except (ConfigError, sources.ModelSpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ldp.ThresholdTooLarge, ldp.TooLargeToEnumerate, ldp.EpsilonExceedsEntropy,
            MemoryGuardExceeded) as exc:
        print(f"runtime guard: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
