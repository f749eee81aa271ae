"""Batch command-line front end.

Usage:
    lipdev <subcommand> --config <file> [--out <dir>] [--threads N] [--seed S]

Subcommands: analyze, lipnorm, badset, deviation, distance, corpus, hypcheck,
whitney, inclusion.  Every run reads one JSON job config, validates it fully
before any computation, and writes CSV/JSON artifacts into the output
directory.  Each CSV starts with a comment line carrying the canonical config
hash (thread count excluded), so identical config + seed produce byte-identical
files at any thread count.

Exit codes: 0 success, 2 config error, 3 corpus verdict mismatch,
4 numeric check failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from lipdev.grid import GridSpec, SampledFunction, cubes_at_level
from lipdev.wavelet import analyze, coeff_norm_binf, default_system
from lipdev.difference import DiffConfig, bad_set, lip_norm, whitney_gap
from lipdev.hyperbolic import HalfSpacePoint, ball_box_bounds, mu_measure, rho, rho_ln
from lipdev.deviation import (closure_test, distance_estimate,
                              inclusion_experiment, mass_curve, parse_preset,
                              wavelet_mass_curve, _is_wavelet_preset)
from lipdev.corpus import corpus_names, make_entry

__all__ = ["JobConfig", "ConfigError", "parse_config", "run_job", "main"]


class ConfigError(ValueError):
    """Config schema or range violation; message carries the key path."""


@dataclass
class JobConfig:
    grid: GridSpec
    diff: DiffConfig
    presets: tuple[str, ...]
    eps: tuple[float, ...]
    eps_points: int
    eps_span: int
    entries: tuple[str, ...]
    input: str | None
    out: str
    seed: int
    threads: int
    wavelet_n: int | None
    whitney: dict = field(default_factory=dict)
    inclusion: dict = field(default_factory=dict)
    hypcheck: dict = field(default_factory=dict)

    def canonical(self) -> str:
        """Canonical JSON of everything that determines the outputs (thread
        count deliberately excluded: it must not change a single byte)."""
        d = {
            "grid": {"n": self.grid.n, "J": self.grid.J, "K": self.grid.K,
                     "ext": self.grid.ext},
            "diff": {"r": self.diff.r, "s": self.diff.s,
                     "h_mode": self.diff.h_mode, "D": self.diff.D,
                     "M": self.diff.M},
            "presets": list(self.presets),
            "eps": list(self.eps),
            "eps_points": self.eps_points,
            "eps_span": self.eps_span,
            "entries": list(self.entries),
            "input": self.input,
            "seed": self.seed,
            "wavelet_n": self.wavelet_n,
            "whitney": self.whitney,
            "inclusion": self.inclusion,
            "hypcheck": self.hypcheck,
        }
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _expect(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _sub(data: dict, key: str, allowed: dict, path: str) -> dict:
    block = data.get(key, {})
    _expect(isinstance(block, dict), f"{path}{key}", "must be an object")
    for k in block:
        _expect(k in allowed, f"{path}{key}.{k}", "unknown key")
    out = dict(allowed)
    out.update(block)
    return out


_GRID_KEYS = {"n": 1, "J": 10, "K": 0, "ext": "periodic"}
_DIFF_KEYS = {"r": 1, "s": 0.5, "h_mode": "exact", "D": 8, "M": 4}
_WHITNEY_KEYS = {"level": 3, "a0": 4.0, "max_cubes": 16}
_INCLUSION_KEYS = {"c_grid": [0.125, 0.25, 0.375, 0.5],
                   "r_grid": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
                   "m_max": 4}
_HYPCHECK_KEYS = {"pairs": 100_000, "triples": 100_000, "boxes": 10_000,
                  "box_points": 100}
_TOP_KEYS = ("grid", "diff", "presets", "eps", "eps_points", "eps_span",
             "entries", "input", "out", "seed", "threads", "wavelet_n",
             "whitney", "inclusion", "hypcheck")


def parse_config(text: str) -> JobConfig:
    """Validate a JSON job config: unknown keys rejected, every parameter
    range checked before any computation."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    _expect(isinstance(data, dict), "", "config must be a JSON object")
    for k in data:
        _expect(k in _TOP_KEYS, k, "unknown key")

    g = _sub(data, "grid", _GRID_KEYS, "")
    try:
        grid = GridSpec(n=int(g["n"]), J=int(g["J"]), K=int(g["K"]),
                        ext=str(g["ext"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"grid: {exc}") from exc

    d = _sub(data, "diff", _DIFF_KEYS, "")
    try:
        diff = DiffConfig(r=int(d["r"]), s=float(d["s"]),
                          h_mode=str(d["h_mode"]), D=int(d["D"]),
                          M=int(d["M"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"diff: {exc}") from exc

    presets = tuple(data.get("presets", ["jsbmo"]))
    for i, label in enumerate(presets):
        try:
            parse_preset(str(label))
        except ValueError as exc:
            raise ConfigError(f"presets[{i}]: {exc}") from exc

    eps = tuple(float(e) for e in data.get("eps", [0.25, 0.5]))
    for i, e in enumerate(eps):
        _expect(e > 0, f"eps[{i}]", f"thresholds must be positive, got {e}")
    eps_points = int(data.get("eps_points", 33))
    _expect(eps_points >= 2, "eps_points", "need at least 2 grid points")
    eps_span = int(data.get("eps_span", 8))
    _expect(eps_span >= 1, "eps_span", "span must be at least 1")

    entries = tuple(data.get("entries", list(corpus_names())))
    for i, name in enumerate(entries):
        _expect(name in corpus_names(), f"entries[{i}]",
                f"unknown corpus entry {name!r}; choices: {corpus_names()}")
    inp = data.get("input")
    if inp is not None:
        _expect(isinstance(inp, str), "input", "must be a file path string")

    wavelet_n = data.get("wavelet_n")
    if wavelet_n is not None:
        wavelet_n = int(wavelet_n)
        _expect(wavelet_n >= 1, "wavelet_n", "vanishing moments must be >= 1")

    whitney = _sub(data, "whitney", _WHITNEY_KEYS, "")
    _expect(0 <= int(whitney["level"]) <= grid.J - 2, "whitney.level",
            f"level must lie in [0, J-2], got {whitney['level']}")
    _expect(float(whitney["a0"]) > 2.0, "whitney.a0",
            "the window dilation a0 must exceed 2")

    inclusion = _sub(data, "inclusion", _INCLUSION_KEYS, "")
    for i, c in enumerate(inclusion["c_grid"]):
        _expect(0 < float(c) <= 1, f"inclusion.c_grid[{i}]",
                "threshold fractions must lie in (0, 1]")
    for i, r in enumerate(inclusion["r_grid"]):
        _expect(float(r) > 0, f"inclusion.r_grid[{i}]", "radii must be positive")
    _expect(int(inclusion["m_max"]) >= 1, "inclusion.m_max", "m_max must be >= 1")

    hypcheck = _sub(data, "hypcheck", _HYPCHECK_KEYS, "")
    for k in hypcheck:
        _expect(int(hypcheck[k]) >= 1, f"hypcheck.{k}", "counts must be >= 1")

    return JobConfig(grid=grid, diff=diff, presets=presets, eps=eps,
                     eps_points=eps_points, eps_span=eps_span,
                     entries=entries, input=inp,
                     out=str(data.get("out", "out")),
                     seed=int(data.get("seed", 0)),
                     threads=int(data.get("threads", 1)),
                     wavelet_n=wavelet_n, whitney=whitney,
                     inclusion=inclusion, hypcheck=hypcheck)


# ------------------------------------------------------------------ outputs --

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _Artifacts:
    """Collects output files; removes everything written on failure."""

    def __init__(self, out_dir: str, cfg_hash: str):
        self.out_dir = out_dir
        self.cfg_hash = cfg_hash
        self.written: list[str] = []

    def csv(self, name: str, columns: list[str], rows: list[dict]) -> str:
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, name)
        with open(path, "w", newline="") as fh:
            fh.write(f"# config {self.cfg_hash}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(row[c]) for c in columns])
        self.written.append(path)
        return path

    def json(self, name: str, payload) -> str:
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, name)
        with open(path, "w") as fh:
            json.dump({"config": self.cfg_hash, "data": payload}, fh,
                      sort_keys=True, indent=1)
            fh.write("\n")
        self.written.append(path)
        return path

    def cleanup(self) -> None:
        for path in self.written:
            try:
                os.remove(path)
            except OSError:
                pass


def _parallel(fn, items, threads: int) -> list:
    """Order-preserving map; the reduction order never depends on the thread
    count, so outputs are byte-identical for any value of `threads`."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _load_sources(cfg: JobConfig) -> list[tuple[str, object]]:
    """(name, source) pairs: corpus entries and/or an input sample file."""
    out: list[tuple[str, object]] = []
    for name in cfg.entries:
        e = make_entry(name, n=cfg.grid.n, J=cfg.grid.J, K=cfg.grid.K,
                       ext=cfg.grid.ext)
        out.append((name, e))
    if cfg.input is not None:
        values = np.load(cfg.input)
        if values.shape != cfg.grid.shape:
            raise ConfigError(
                f"input: sample shape {values.shape} != grid {cfg.grid.shape}")
        stem = os.path.splitext(os.path.basename(cfg.input))[0]
        out.append((stem, SampledFunction(cfg.grid, values.astype(float))))
    return out


def _func_of(src) -> SampledFunction:
    return src.func if hasattr(src, "func") else src


def _system_for(cfg: JobConfig, src):
    if cfg.wavelet_n is not None:
        from lipdev.wavelet import WaveletSystem
        return WaveletSystem.daubechies(cfg.wavelet_n)
    if hasattr(src, "system"):
        return src.system
    return default_system(cfg.diff.r, cfg.diff.s)


# --------------------------------------------------------------- subcommands --

def _cmd_analyze(cfg: JobConfig, art: _Artifacts) -> int:
    def work(item):
        name, src = item
        f = _func_of(src)
        c = analyze(f, _system_for(cfg, src))
        rows = []
        for j, g, arr, _off in c.iter_detail_bands():
            rows.append({"entry": name, "level": j, "gender": g,
                         "max_abs": float(np.abs(arr).max()),
                         "l2_sq": float(np.sum(arr * arr))})
        rows.append({"entry": name, "level": -1, "gender": 0,
                     "max_abs": float(np.abs(c.scaling).max()),
                     "l2_sq": float(np.sum(c.scaling**2))})
        return rows

    results = _parallel(work, _load_sources(cfg), cfg.threads)
    art.csv("analyze.csv", ["entry", "level", "gender", "max_abs", "l2_sq"],
            [r for rows in results for r in rows])
    return 0


def _cmd_lipnorm(cfg: JobConfig, art: _Artifacts) -> int:
    def work(item):
        name, src = item
        f = _func_of(src)
        sup, semi = lip_norm(f, cfg.diff)
        return {"entry": name, "sup": sup, "semi": semi, "norm": sup + semi}

    rows = _parallel(work, _load_sources(cfg), cfg.threads)
    art.csv("lipnorm.csv", ["entry", "sup", "semi", "norm"], rows)
    return 0


def _cmd_badset(cfg: JobConfig, art: _Artifacts) -> int:
    items = [(name, src, e) for name, src in _load_sources(cfg)
             for e in cfg.eps]

    def work(item):
        name, src, e = item
        m = bad_set(_func_of(src), cfg.diff, e)
        return (name, e, m)

    results = _parallel(work, items, cfg.threads)
    summary = []
    for name, e, m in results:
        art.json(f"badset_{name}_{e:g}.json", m.to_rle_json())
        summary.append({"entry": name, "epsilon": e,
                        "cells": m.cell_count(), "mu": mu_measure(m)})
    art.csv("badset.csv", ["entry", "epsilon", "cells", "mu"], summary)
    return 0


def _reports(cfg: JobConfig):
    items = [(name, src, label) for name, src in _load_sources(cfg)
             for label in cfg.presets]

    def work(item):
        name, src, label = item
        return (name, label, distance_estimate(src, cfg.diff, label))

    return _parallel(work, items, cfg.threads)


def _cmd_deviation(cfg: JobConfig, art: _Artifacts) -> int:
    rows = []
    for name, label, rep in _reports(cfg):
        for row in rep.csv_rows():
            row = dict(row, entry=name)
            rows.append(row)
    art.csv("deviation.csv",
            ["entry", "preset", "side", "s", "r", "epsilon", "J",
             "functional", "divergent"], rows)
    return 0


def _cmd_distance(cfg: JobConfig, art: _Artifacts) -> int:
    rows, summaries = [], {}
    for name, label, rep in _reports(cfg):
        for row in rep.csv_rows():
            rows.append(dict(row, entry=name))
        summaries[f"{name}:{label}"] = rep.summary()
    art.csv("distance.csv",
            ["entry", "preset", "side", "s", "r", "epsilon", "J",
             "functional", "divergent"], rows)
    art.json("distance.json", summaries)
    return 0


def _cmd_corpus(cfg: JobConfig, art: _Artifacts) -> int:
    items = []
    for name in cfg.entries:
        e = make_entry(name, n=cfg.grid.n, J=cfg.grid.J, K=cfg.grid.K,
                       ext=cfg.grid.ext)
        for label, exp in e.expected.items():
            items.append((name, e, label, exp))

    def work(item):
        name, e, label, exp = item
        p = parse_preset(label)
        s = float(e.params.get("s", cfg.diff.s))
        d = DiffConfig(r=cfg.diff.r, s=s, h_mode=cfg.diff.h_mode,
                       D=cfg.diff.D, M=cfg.diff.M)
        eps = sorted(exp.eps)
        if _is_wavelet_preset(p):
            curve = wavelet_mass_curve(e, s, p, eps)
        else:
            curve = mass_curve(e, d, p, eps)
        got = "divergent" if curve.verdicts().any() else "finite"
        return {"entry": name, "preset": label,
                "eps": ";".join(f"{x:g}" for x in eps),
                "expected": exp.verdict, "computed": got,
                "match": int(got == exp.verdict)}

    rows = _parallel(work, items, cfg.threads)
    art.csv("corpus.csv",
            ["entry", "preset", "eps", "expected", "computed", "match"], rows)
    return 0 if all(r["match"] for r in rows) else 3


def _cmd_hypcheck(cfg: JobConfig, art: _Artifacts) -> int:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.grid.n
    rows = []

    def record(check, samples, worst, tol):
        rows.append({"check": check, "samples": samples, "worst": worst,
                     "tol": tol, "pass": int(worst <= tol)})

    n_pairs = int(cfg.hypcheck["pairs"])
    xs = rng.uniform(-1, 1, (2, n_pairs, n))
    ys = np.exp(rng.uniform(np.log(1e-3), 0.0, (2, n_pairs)))
    d1 = rho((xs[0], ys[0]), (xs[1], ys[1]))
    d2 = rho_ln((xs[0], ys[0]), (xs[1], ys[1]))
    rel = np.abs(d1 - d2) / np.maximum(d1, 1e-300)
    record("rho_vs_ln", n_pairs, float(rel.max()), 1e-10)

    n_tri = int(cfg.hypcheck["triples"])
    xs = rng.uniform(-1, 1, (3, n_tri, n))
    ys = np.exp(rng.uniform(np.log(1e-3), 0.0, (3, n_tri)))
    ab = rho((xs[0], ys[0]), (xs[1], ys[1]))
    bc = rho((xs[1], ys[1]), (xs[2], ys[2]))
    ac = rho((xs[0], ys[0]), (xs[2], ys[2]))
    record("triangle", n_tri, float(np.max(ac - (ab + bc))), 1e-12)

    x0 = rng.uniform(-1, 1, (n_pairs, n))
    y1 = np.exp(rng.uniform(np.log(1e-3), 0.0, n_pairs))
    y2 = np.exp(rng.uniform(np.log(1e-3), 0.0, n_pairs))
    dv = rho((x0, y1), (x0, y2))
    record("vertical", n_pairs, float(np.max(np.abs(dv - np.abs(np.log(y2 / y1))))),
           1e-12)

    n_box = int(cfg.hypcheck["boxes"])
    n_pts = int(cfg.hypcheck["box_points"])
    viol = 0
    for _ in range(n_box):
        z = HalfSpacePoint(tuple(rng.uniform(-1, 1, n)), float(np.exp(
            rng.uniform(np.log(1e-2), 0.0))))
        t = float(rng.uniform(1e-3, 0.25))
        inner, outer = ball_box_bounds(z, t)
        # points of the inner box must fall in the ball
        px = rng.uniform(-1, 1, (n_pts, n)) * inner.radius + np.asarray(z.x)
        py = rng.uniform(inner.y_lo, inner.y_hi, n_pts)
        keep = np.linalg.norm(px - np.asarray(z.x), axis=-1) <= inner.radius
        d = rho((px[keep], py[keep]), z)
        viol += int(np.count_nonzero(d > t))
        # points of the ball must fall in the outer box
        qx = rng.uniform(-1, 1, (n_pts, n)) * outer.radius + np.asarray(z.x)
        qy = rng.uniform(outer.y_lo, outer.y_hi, n_pts)
        d = rho((qx, qy), z)
        inside = d <= t
        ok = outer.contains(qx, qy)
        viol += int(np.count_nonzero(inside & ~ok))
    record("ball_box", n_box * n_pts * 2, float(viol), 0.0)

    art.csv("hypcheck.csv", ["check", "samples", "worst", "tol", "pass"], rows)
    return 0 if all(r["pass"] for r in rows) else 4


def _cmd_whitney(cfg: JobConfig, art: _Artifacts) -> int:
    level = int(cfg.whitney["level"])
    a0 = float(cfg.whitney["a0"])
    max_cubes = int(cfg.whitney["max_cubes"])
    cubes = cubes_at_level(cfg.grid, level)[:max_cubes]
    items = [(name, src, i, cube) for name, src in _load_sources(cfg)
             for i, cube in enumerate(cubes)]

    def work(item):
        name, src, i, cube = item
        lhs, rhs = whitney_gap(_func_of(src), cube, cfg.diff, a0)
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        return {"entry": name, "level": level, "cube": i,
                "lhs": lhs, "rhs": rhs, "ratio": ratio}

    rows = _parallel(work, items, cfg.threads)
    art.csv("whitney.csv", ["entry", "level", "cube", "lhs", "rhs", "ratio"],
            rows)
    return 0


def _cmd_inclusion(cfg: JobConfig, art: _Artifacts) -> int:
    c_grid = [float(c) for c in cfg.inclusion["c_grid"]]
    r_grid = [float(r) for r in cfg.inclusion["r_grid"]]
    m_max = int(cfg.inclusion["m_max"])
    items = [(name, src, e) for name, src in _load_sources(cfg)
             for e in cfg.eps]

    def work(item):
        name, src, e = item
        res = inclusion_experiment(_func_of(src), cfg.diff, e, c_grid, r_grid,
                                   m_max=m_max)
        return (name, e, res)

    results = _parallel(work, items, cfg.threads)
    rows, best = [], {}
    for name, e, res in results:
        for row in res["rows"]:
            rows.append(dict(row, entry=name, epsilon=e))
        b = res["best"]
        best[f"{name}:{e:g}"] = (None if b is None else
                                 {"R": b["R"], "m": b["m"], "c": b["c"]})
    art.csv("inclusion.csv",
            ["entry", "epsilon", "c", "m", "R", "viol_a", "frac_a",
             "viol_b", "frac_b"], rows)
    art.json("inclusion.json", best)
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "lipnorm": _cmd_lipnorm,
    "badset": _cmd_badset,
    "deviation": _cmd_deviation,
    "distance": _cmd_distance,
    "corpus": _cmd_corpus,
    "hypcheck": _cmd_hypcheck,
    "whitney": _cmd_whitney,
    "inclusion": _cmd_inclusion,
}


def run_job(command: str, cfg: JobConfig) -> int:
    """Dispatch one subcommand; on any error, partial outputs are removed."""
    art = _Artifacts(cfg.out, cfg.config_hash())
    try:
        return _COMMANDS[command](cfg, art)
    except Exception:
        art.cleanup()
        raise


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lipdev",
        description="Difference/wavelet smoothness-deviation batch runner")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON job config")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, help="worker threads (override)")
    parser.add_argument("--seed", type=int, help="RNG seed (override)")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        if args.out is not None:
            cfg.out = args.out
        if args.threads is not None:
            cfg.threads = args.threads
        if args.seed is not None:
            cfg.seed = args.seed
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        code = run_job(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    if code == 3:
        print("corpus verdict mismatch (see corpus.csv)", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
