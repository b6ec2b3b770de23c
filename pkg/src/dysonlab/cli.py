"""Command-line frontend: experiment sweeps with CSV/JSON artifacts.

Subcommands: ricci, capacity, bochner, sde, heat, all.  Every run is
deterministic for a fixed seed: per-path RNG streams are derived ahead of
any parallelism, parallel maps preserve task order, and floats are written
with shortest round-trip formatting, so output files are byte-identical
across repeated runs and across worker counts.

Exit codes: 0 when every ``--expect`` verdict matches (or none given),
1 on a verdict mismatch, 2 on invalid parameters (with a machine-readable
error JSON on stdout).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import bochner, capacity, heat, ricci, sde
from .core import ModelParams

__all__ = ["RunConfig", "run", "main"]

_EXPECT_TOKENS = (
    "be-holds",
    "be-fails",
    "wb-violated",
    "collisions",
    "no-collisions",
    "cap-null",
    "cap-positive",
)


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters of one invocation."""

    subcommand: str
    beta: float = 0.5
    n: int = 2
    N: float = math.inf
    K: float = -1.0
    seed: int = 0
    paths: int = 400
    T: float = 1.0
    samples: int = 1000
    r_grid: tuple = (0.1, 0.05, 0.025, 0.0125)
    s_grid: tuple = (1e-3, 1e-5, 1e-8)
    grid: int = 512
    t_heat: float = 0.01
    out: str = "out"
    workers: int = 1
    expect: tuple = ()

    def validate(self) -> None:
        if self.subcommand not in ("ricci", "capacity", "bochner", "sde", "heat", "all"):
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if math.isfinite(self.N) and self.N <= self.n:
            raise ValueError("finite N must exceed n")
        if self.paths < 100:
            raise ValueError("paths must be at least 100")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.grid < 64 or self.grid % 2:
            raise ValueError("grid must be an even count >= 64")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if any(r <= 0 or r >= 1 for r in self.r_grid):
            raise ValueError("r grid values must lie in (0, 1)")
        if any(s <= 0 for s in self.s_grid):
            raise ValueError("s grid values must be positive")
        for token in self.expect:
            if token not in _EXPECT_TOKENS:
                raise ValueError(f"unknown expectation {token!r}")
        if self.subcommand == "bochner" and not self.beta < 1:
            raise ValueError("the weak-Bochner construction needs beta < 1")


def _parse_grid(text: str) -> tuple:
    """Grid syntax: comma list '1e-3,1e-6' or 'geometric:start:count[:ratio]'."""
    if text.startswith("geometric:"):
        parts = text.split(":")
        start = float(parts[1])
        count = int(parts[2])
        ratio = float(parts[3]) if len(parts) > 3 else 0.5
        return tuple(start * ratio**k for k in range(count))
    return tuple(float(tok) for tok in text.split(",") if tok)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))  # shortest round-trip, stable across runs
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def _write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _pmap(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=1))


# ---------------------------------------------------------------------------
# per-module drivers
# ---------------------------------------------------------------------------


def _run_ricci(cfg: RunConfig, outdir: str) -> dict:
    rng = np.random.default_rng(cfg.seed)
    n, beta = cfg.n, cfg.beta
    nb = ricci.n_beta(n, beta)
    N = cfg.N if math.isfinite(cfg.N) else math.inf
    if math.isfinite(N) and N < nb:
        raise ValueError(f"N below the sharp bound {nb}; the sample suite expects N >= N_beta")
    ratios = np.empty(cfg.samples)
    for k in range(cfg.samples):
        x = rng.normal(size=n)
        while np.min(np.abs(np.subtract.outer(x, x))[~np.eye(n, dtype=bool)]) < 1e-9:
            x = rng.normal(size=n)
        form = ricci.ricci_form(x, ModelParams(n=n, beta=beta, N=N))
        ratios[k] = np.linalg.eigvalsh(form.matrix)[0] / form.scale
    lo, hi = float(ratios.min()), float(ratios.max())
    span = hi - lo or 1.0
    bins = 32
    counts, edges = np.histogram(ratios, bins=bins, range=(lo, lo + span))
    rows = [
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)
    ]
    _write_csv(os.path.join(outdir, "ricci_hist.csv"), ["bin_lo", "bin_hi", "count"], rows)
    negatives = int(np.sum(ratios < -1e-9))
    summary = {
        "beta": beta,
        "n": n,
        "N": "inf" if math.isinf(N) else N,
        "n_beta": nb,
        "samples": cfg.samples,
        "min_ratio": float(ratios.min()),
        "negatives": negatives,
        "verdict": "nonnegative" if negatives == 0 else "negative-found",
        "seed": cfg.seed,
    }
    _write_json(os.path.join(outdir, "ricci_summary.json"), summary)
    return summary


def _capacity_point_verdict(values: list) -> str:
    if values[-1] <= 0.05 * values[0]:
        return "null"
    if abs(values[-1] - values[-2]) <= 0.05 * abs(values[-1]):
        return "positive-floor"
    return "inconclusive"


def _run_capacity(cfg: RunConfig, outdir: str) -> dict:
    s_grid = [s for s in cfg.s_grid if s < capacity.S_MAX]
    if not s_grid:
        raise ValueError("no admissible cutoff parameters below e^-e in the s grid")
    rep = capacity.capacity_report(cfg.beta, s_grid, n=cfg.n)
    rows = [(cfg.beta, s, v, e) for s, v, e in rep.entries]
    _write_csv(
        os.path.join(outdir, "capacity_cutoff.csv"),
        ["beta", "s_or_eps", "value", "err_est"],
        rows,
    )
    eps_grid = sorted((1e-2, 1e-3, 1e-4, 1e-5, 1e-6), reverse=True)
    pvals = [capacity.point_capacity_1d(cfg.beta, e, m=cfg.grid) for e in eps_grid]
    _write_csv(
        os.path.join(outdir, "capacity_point.csv"),
        ["beta", "s_or_eps", "value", "err_est"],
        [(cfg.beta, e, v, 0.0) for e, v in zip(eps_grid, pvals)],
    )
    summary = {
        "beta": cfg.beta,
        "cutoff_verdict": rep.verdict,
        "point_verdict": _capacity_point_verdict(pvals),
        "verdict": "cap-null" if rep.verdict == "decaying" else (
            "cap-positive" if rep.verdict == "diverging" else "inconclusive"
        ),
    }
    _write_json(os.path.join(outdir, "capacity_summary.json"), summary)
    return summary


def _wb_task(args):
    r, n, beta, K, light = args
    spec = (
        bochner.WBQuadSpec(h_order=6, h_order_check=8, t_tol=1e-7)
        if light
        else bochner.WBQuadSpec()
    )
    res = bochner.wb_sides(bochner.make_params(r, n=n, beta=beta, K=K), spec)
    return (r, res.lhs, res.lhs_err, res.rhs, res.rhs_err, bool(res.inconclusive))


def _run_bochner(cfg: RunConfig, outdir: str) -> dict:
    light = cfg.n >= 3
    tasks = [(r, cfg.n, cfg.beta, cfg.K, light) for r in sorted(cfg.r_grid, reverse=True)]
    rows = _pmap(_wb_task, tasks, cfg.workers)
    _write_csv(
        os.path.join(outdir, "bochner_scan.csv"),
        ["r", "lhs", "lhs_err", "rhs", "rhs_err"],
        [row[:5] for row in rows],
    )
    lhs_fit = bochner.fit_scaling([(r, lhs) for r, lhs, *_ in rows])
    summary = {
        "beta": cfg.beta,
        "n": cfg.n,
        "K": cfg.K,
        "lhs_slope": lhs_fit.exponent,
        "lhs_sign": lhs_fit.prefactor_sign,
        "lhs_residual": lhs_fit.residual,
        "leading_constant": bochner.leading_constant(cfg.beta),
    }
    if cfg.K != 0.0:
        rhs_fit = bochner.fit_scaling([(r, row[3]) for r, *row in [(t[0], *t[1:]) for t in rows]])
        summary["rhs_slope"] = rhs_fit.exponent
        summary["rhs_sign"] = rhs_fit.prefactor_sign
    violated_at = None
    for r, lhs, lhs_err, rhs, rhs_err, bad in rows:
        if not bad and lhs + lhs_err < rhs - rhs_err:
            violated_at = r
    summary["wb_violated"] = violated_at is not None
    summary["verdict"] = (
        f"wB violated for K={cfg.K:g} at r={violated_at:g}"
        if violated_at is not None
        else "no violation found"
    )
    _write_json(os.path.join(outdir, "bochner_summary.json"), summary)
    return summary


def _sde_chunk(args):
    x0, beta, T, seeds = args
    rows = []
    for s in seeds:
        ps = sde.simulate(x0, beta, T, seed=int(s))
        rows.append(
            (
                int(s),
                int(ps.collided),
                ps.collision_time if ps.collided else "",
                ps.min_gap,
                ps.steps,
            )
            + tuple(ps.final)
        )
    return rows


def _run_sde(cfg: RunConfig, outdir: str) -> dict:
    x0 = tuple(sde.default_x0(cfg.n).tolist())
    seeds = sde._spawn_seeds(cfg.seed, cfg.paths)
    block = 64
    chunks = [
        (x0, cfg.beta, cfg.T, [int(s) for s in seeds[i : i + block]])
        for i in range(0, cfg.paths, block)
    ]
    rows = [row for part in _pmap(_sde_chunk, chunks, cfg.workers) for row in part]
    header = ["seed", "collided", "collision_time", "min_gap", "steps"] + [
        f"final_{k}" for k in range(cfg.n)
    ]
    _write_csv(os.path.join(outdir, "sde_paths.csv"), header, rows)
    hits = sum(r[1] for r in rows)
    freq = hits / cfg.paths
    lo, hi = sde._wilson_ci(hits, cfg.paths)
    summary = {
        "beta": cfg.beta,
        "n": cfg.n,
        "T": cfg.T,
        "paths": cfg.paths,
        "frequency": freq,
        "ci_low": lo,
        "ci_high": hi,
        "threshold": 1e-6,
        "seed": cfg.seed,
        "verdict": "collides" if freq > 0.02 else "no-collisions",
    }
    _write_json(os.path.join(outdir, "sde_summary.json"), summary)
    return summary


def _run_heat(cfg: RunConfig, outdir: str) -> dict:
    m = cfg.grid
    form_f = heat.assemble_form(cfg.beta, 1.0, m)
    form_c = heat.assemble_form(cfg.beta, 1.0, m // 2)
    rows = []
    for name, fn in heat.DATUM_PROFILES.items():
        rep = heat.margin_refinement(form_f, form_c, fn, cfg.t_heat, cfg.N, name)
        rows.append(
            (cfg.beta, "inf" if math.isinf(cfg.N) else cfg.N, cfg.t_heat, m, name,
             rep.fine.margin, rep.trend)
        )
    search = heat.counterexample_search(form_f, cfg.t_heat, cfg.N)
    rows.append(
        (cfg.beta, "inf" if math.isinf(cfg.N) else cfg.N, cfg.t_heat, m,
         "search:" + search.best.fine.datum, search.best.fine.margin, search.best.trend)
    )
    _write_csv(
        os.path.join(outdir, "heat_margins.csv"),
        ["beta", "N", "t", "grid", "datum", "margin", "trend"],
        rows,
    )
    be_holds = search.best.trend != "growing"
    summary = {
        "beta": cfg.beta,
        "N": "inf" if math.isinf(cfg.N) else cfg.N,
        "t": cfg.t_heat,
        "grid": m,
        "worst_margin": search.best.fine.margin,
        "worst_datum": search.best.fine.datum,
        "err_est": search.best.err_est,
        "verdict": "be-holds" if be_holds else "be-fails",
    }
    _write_json(os.path.join(outdir, "heat_summary.json"), summary)
    return summary


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def _verdict_map(results: dict) -> dict:
    flags = {}
    if "heat" in results:
        flags["be-holds"] = results["heat"]["verdict"] == "be-holds"
        flags["be-fails"] = not flags["be-holds"]
    if "bochner" in results:
        flags["wb-violated"] = bool(results["bochner"]["wb_violated"])
    if "sde" in results:
        flags["collisions"] = results["sde"]["verdict"] == "collides"
        flags["no-collisions"] = not flags["collisions"]
    if "capacity" in results:
        flags["cap-null"] = results["capacity"]["verdict"] == "cap-null"
        flags["cap-positive"] = results["capacity"]["verdict"] == "cap-positive"
    return flags


def run(cfg: RunConfig) -> int:
    """Execute one configured run; returns the process exit code."""
    try:
        cfg.validate()
    except ValueError as exc:
        print(json.dumps({"error": {"message": str(exc)}}, sort_keys=True))
        return 2
    outdir = cfg.out
    os.makedirs(outdir, exist_ok=True)
    results = {}
    try:
        if cfg.subcommand in ("ricci", "all"):
            results["ricci"] = _run_ricci(cfg, outdir)
        if cfg.subcommand in ("capacity", "all"):
            results["capacity"] = _run_capacity(cfg, outdir)
        if cfg.subcommand in ("bochner", "all"):
            if cfg.beta < 1.0:
                results["bochner"] = _run_bochner(cfg, outdir)
            elif cfg.subcommand == "all":
                results["bochner"] = {"wb_violated": False, "verdict": "not-applicable (beta >= 1)"}
        if cfg.subcommand in ("sde", "all"):
            results["sde"] = _run_sde(cfg, outdir)
        if cfg.subcommand in ("heat", "all"):
            results["heat"] = _run_heat(cfg, outdir)
    except ValueError as exc:
        print(json.dumps({"error": {"message": str(exc)}}, sort_keys=True))
        return 2
    flags = _verdict_map(results)
    if cfg.subcommand == "all":
        _write_json(
            os.path.join(outdir, "all_summary.json"),
            {"config": _config_dict(cfg), "verdicts": flags,
             "modules": {k: v.get("verdict") for k, v in results.items()}},
        )
    for token in cfg.expect:
        if not flags.get(token, False):
            print(f"expectation {token!r} not met (verdicts: {flags})")
            return 1
    return 0


def _config_dict(cfg: RunConfig) -> dict:
    d = {}
    for f in fields(cfg):
        if f.name in ("workers", "out"):  # run environment, not experiment identity
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, float) and math.isinf(v):
            v = "inf"
        elif isinstance(v, tuple):
            v = list(v)
        d[f.name] = v
    return d


def _read_config_file(path: str) -> dict:
    """Flat key-value experiment record: 'key = value' lines, # comments."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, val = line.split("=", 1)
            else:
                key, _, val = line.partition(" ")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dysonlab",
        description="numerical experiments on the Dyson Brownian motion weight",
    )
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in ("ricci", "capacity", "bochner", "sde", "heat", "all"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="flat key=value defaults file")
        sp.add_argument("--beta", type=float, default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--N", default=None, help="dimension bound, a number or 'inf'")
        sp.add_argument("--K", type=float, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--paths", type=int, default=None)
        sp.add_argument("--T", type=float, default=None)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--r-grid", dest="r_grid", default=None,
                        help="comma list or geometric:start:count[:ratio]")
        sp.add_argument("--s-grid", dest="s_grid", default=None)
        sp.add_argument("--grid", type=int, default=None, help="heat grid cells")
        sp.add_argument("--t-heat", dest="t_heat", type=float, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--expect", action="append", default=None,
                        help="verdict expectation; may repeat or comma-separate")
    return ap


_FIELD_PARSERS = {
    "beta": float, "n": int, "K": float, "seed": int, "paths": int, "T": float,
    "samples": int, "grid": int, "t_heat": float, "workers": int, "out": str,
}


def _coerce(key: str, val):
    if key == "N":
        return math.inf if str(val).lower() in ("inf", "infinity") else float(val)
    if key in ("r_grid", "s_grid"):
        return _parse_grid(val) if isinstance(val, str) else tuple(val)
    if key == "expect":
        if isinstance(val, str):
            return tuple(tok for tok in val.split(",") if tok)
        toks = []
        for item in val:
            toks.extend(t for t in item.split(",") if t)
        return tuple(toks)
    return _FIELD_PARSERS[key](val)


def build_config(argv=None) -> RunConfig:
    ns = _build_parser().parse_args(argv)
    cfg = RunConfig(subcommand=ns.subcommand)
    env_workers = os.environ.get("DCL_WORKERS")
    if env_workers:
        cfg = replace(cfg, workers=int(env_workers))
    merged = {}
    if ns.config:
        merged.update(_read_config_file(ns.config))
    for key in ("beta", "n", "N", "K", "seed", "paths", "T", "samples", "r_grid",
                "s_grid", "grid", "t_heat", "out", "workers", "expect"):
        val = getattr(ns, key)
        if val is not None:
            merged[key] = val
    for key, val in merged.items():
        if not hasattr(cfg, key):
            raise ValueError(f"unknown configuration key {key!r}")
        cfg = replace(cfg, **{key: _coerce(key, val)})
    return cfg


def main(argv=None) -> None:
    try:
        cfg = build_config(argv)
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": {"message": str(exc)}}, sort_keys=True))
        raise SystemExit(2)
    raise SystemExit(run(cfg))


if __name__ == "__main__":
    main()
