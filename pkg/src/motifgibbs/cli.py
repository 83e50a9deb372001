"""Command-line interface.

Every run writes ``report.json``, ``config.lock.json`` (the resolved config)
and any CSV/text artifacts into the output directory.  Reports carry the
config hash, seed and library versions, and nothing time dependent, so
rerunning a config reproduces the same bytes.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .collapsed import bottleneck_d, collapsed_posterior, collapsed_slice, projection_matrix
from .datagen import (
    GenerativeModel,
    calibrate_dirichlet_concentration,
    deterministic_model,
    median_max_dirichlet,
    sample_sequence,
    sample_study_model,
)
from .diagnostics import config_hash, run_table1_cell, study_concentrations
from .errors import (
    MotifGibbsError,
    NumericError,
    ResourceLimitError,
)
from .gibbs import Schedule, run_chain
from .landscape import export_slice, find_local_maxima
from .model import ModelParams, Sequence
from .rng import stream
from .spectral import (
    build_full_chain,
    conductance,
    exact_tv_mixing_time,
    mixing_time_bounds,
    path_bound_rho,
    spectral_gap,
)

EXIT_OK = 0
EXIT_SCHEMA = 3
EXIT_RESOURCE = 4
EXIT_NUMERIC = 5
EXIT_MODEL = 6
EXIT_IO = 7

WORKERS_ENV = "MOTIFGIBBS_WORKERS"
DNA = "ACGT"
ANALYSES = ["exact-gap", "tv-mixing", "collapsed-gap", "conductance", "path-bound",
            "bottleneck-d", "landscape", "table1"]

_num_or_list = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]}
_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "generative": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "J": {"type": "integer", "minimum": 0},
                "w": {"type": "integer", "minimum": 1},
                "M": {"type": "integer", "minimum": 2, "maximum": 9},
                "n_blocks": {"type": "integer", "minimum": 1},
                "p": _num_or_list,
                "motifs": {"type": "array", "items": {"type": "array",
                                                      "items": {"type": "integer"}}},
                "motif_matrices": {"type": "array", "items": _matrix},
                "background": {"type": "array", "items": {"type": "number"}},
                "calibration": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "motif_median_max": {"type": "number"},
                        "background_median_max": {"type": "number"},
                        "mc_samples": {"type": "integer", "minimum": 100},
                        "a0": {"type": "number", "exclusiveMinimum": 0},
                        "a1": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "sequence": {
            "type": "object",
            "additionalProperties": False,
            "required": ["path", "w", "M"],
            "properties": {
                "path": {"type": "string"},
                "w": {"type": "integer", "minimum": 1},
                "M": {"type": "integer", "minimum": 2, "maximum": 9},
            },
        },
        "inference": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p0": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "beta": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, _matrix]},
            },
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scan": {"enum": ["systematic", "random"]},
                "burn_in": {"type": "integer", "minimum": 0},
                "samples": {"type": "integer", "minimum": 1},
                "thin": {"type": "integer", "minimum": 1},
                "init": {"enum": ["zeros", "random", "truth"]},
            },
        },
        "analysis": {"type": "array", "items": {"enum": ANALYSES}},
        "limits": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "full_chain_blocks": {"type": "integer", "minimum": 1},
                "collapsed_states": {"type": "integer", "minimum": 1},
                "transition_states": {"type": "integer", "minimum": 1},
            },
        },
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "bottleneck": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["full", "restricted"]},
                "top_k": {"type": "integer", "minimum": 2},
            },
        },
        "collapsed": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "slice": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["free"],
                    "properties": {
                        "free": {"type": "array", "minItems": 2, "maxItems": 2,
                                 "items": {"type": "array", "items": {"type": "integer"}}},
                        "fixed": {"type": "array", "items": {
                            "type": "object", "additionalProperties": False,
                            "required": ["word", "count"],
                            "properties": {"word": {"type": "array",
                                                    "items": {"type": "integer"}},
                                           "count": {"type": "integer", "minimum": 0}}}},
                    },
                },
                "export_transitions": {"type": "boolean"},
            },
        },
        "landscape": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "resolution": {"type": "integer", "minimum": 2},
                "n_random": {"type": "integer", "minimum": 0},
                "p0": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "certificate_samples": {"type": "integer", "minimum": 1},
                "slice": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["x", "y"],
                    "properties": {
                        "x": {"type": "array", "items": {"type": "integer"}},
                        "y": {"type": "array", "items": {"type": "integer"}},
                        "n_points": {"type": "integer", "minimum": 2},
                    },
                },
            },
        },
        "table1": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cells": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["J", "w", "n_blocks"],
                    "properties": {"J": {"type": "integer", "minimum": 1},
                                   "w": {"type": "integer", "minimum": 1},
                                   "n_blocks": {"type": "integer", "minimum": 1},
                                   "p": {"type": "number", "exclusiveMinimum": 0,
                                         "exclusiveMaximum": 1}}}},
                "n_datasets": {"type": "integer", "minimum": 1},
                "p": {"type": "number"},
                "n_chains": {"type": "integer", "minimum": 2},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "sampler": {"scan": "systematic", "burn_in": 1000, "samples": 10000, "thin": 1,
                "init": "random"},
    "limits": {"full_chain_blocks": 14, "collapsed_states": 80_000_000,
               "transition_states": 2_000_000},
    "epsilon": 0.25,
    "bottleneck": {"mode": "full", "top_k": 32},
    "table1": {"cells": [{"J": 1, "w": 6, "n_blocks": 2000}, {"J": 2, "w": 10, "n_blocks": 3000}],
               "n_datasets": 20, "p": 0.005, "n_chains": 5},
}

SMOKE_BLOCKS = 500
SMOKE_DATASETS = 3


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# sequence codec

def encode_symbols(symbols, M):
    """Text form of a symbol vector: ACGT for M=4, digits otherwise."""
    symbols = np.asarray(symbols)
    if M == 4:
        return "".join(DNA[s - 1] for s in symbols)
    return "".join(str(int(s)) for s in symbols)


def decode_text(text, M):
    """Parse sequence text; FASTA header lines and whitespace are skipped."""
    body = "".join(
        line.strip() for line in text.splitlines() if not line.lstrip().startswith(">")
    )
    body = "".join(body.split()).upper()
    alphabet = DNA if M == 4 else "".join(str(m) for m in range(1, M + 1))
    table = {ch: i + 1 for i, ch in enumerate(alphabet)}
    try:
        return np.array([table[ch] for ch in body], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"symbol {exc.args[0]!r} is outside the alphabet {alphabet}") from None


def write_sequence(path, S: Sequence, width=60):
    text = encode_symbols(S.symbols, S.M)
    with open(path, "w") as fh:
        for i in range(0, len(text), width):
            fh.write(text[i:i + width] + "\n")


def read_sequence(path, w, M):
    return Sequence.from_symbols(decode_text(Path(path).read_text(), M), w, M)


# ---------------------------------------------------------------------------
# config handling

def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, overrides=None):
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg[key] = val
    return cfg


def _generative_model(cfg, seed):
    g = cfg.get("generative")
    if g is None:
        raise ConfigError("this command needs a 'generative' section or a 'sequence' file")
    for key in ("w", "M"):
        if key not in g:
            raise ConfigError(f"generative.{key} is required")
    w, M = g["w"], g["M"]
    background = np.asarray(g.get("background", np.full(M, 1.0 / M)), dtype=float)
    if "motifs" in g:
        J = len(g["motifs"])
        p = np.broadcast_to(np.asarray(g.get("p", 0.005), dtype=float), (J,))
        return deterministic_model(g["motifs"], p, background)
    if "motif_matrices" in g:
        mats = np.asarray(g["motif_matrices"], dtype=float)
        p = np.broadcast_to(np.asarray(g.get("p", 0.005), dtype=float), (mats.shape[0],))
        return GenerativeModel(p, mats, background)
    J = g.get("J", 1)
    cal = g.get("calibration", {})
    a0, a1 = cal.get("a0"), cal.get("a1")
    if a0 is None or a1 is None:
        c0, c1 = study_concentrations(
            M, cal.get("motif_median_max", 0.95), cal.get("background_median_max", 0.30),
            cal.get("mc_samples", 100_000),
        )
        a0 = c0 if a0 is None else a0
        a1 = c1 if a1 is None else a1
    return sample_study_model(J, w, M, g.get("p", 0.005), a0, a1, rng=stream(seed, 0))


def _data(cfg):
    """(Sequence, labels or None, GenerativeModel or None)."""
    seed = cfg["seed"]
    if "sequence" in cfg:
        sq = cfg["sequence"]
        return read_sequence(sq["path"], sq["w"], sq["M"]), None, None
    gen = _generative_model(cfg, seed)
    n_blocks = cfg["generative"].get("n_blocks")
    if n_blocks is None:
        raise ConfigError("generative.n_blocks is required to simulate a sequence")
    S, labels = sample_sequence(gen, n_blocks, rng=stream(seed, 1))
    return S, labels, gen


def _params(cfg, S, gen):
    inf = cfg.get("inference", {})
    if "p0" in inf:
        p0 = inf["p0"]
    elif gen is not None and gen.J > 0:
        p0 = float(gen.p.sum())
    else:
        raise ConfigError("inference.p0 is required when there is no generative model")
    beta = inf.get("beta", 1.0)
    beta = np.full((S.w + 1, S.M), float(beta)) if np.isscalar(beta) else np.asarray(beta)
    return ModelParams(p0, beta)


# ---------------------------------------------------------------------------
# output

class Run:
    def __init__(self, cfg, command, out):
        self.cfg = cfg
        self.command = command
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.hash = config_hash({k: v for k, v in cfg.items() if k != "output"})
        self.report = {
            "command": command,
            "config_hash": self.hash,
            "seed": cfg["seed"],
            "versions": {"motifgibbs": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__},
            "results": {},
        }

    def path(self, name):
        return self.out / name

    def finish(self):
        lock = dict(self.cfg, config_hash=self.hash)
        self.path("config.lock.json").write_text(
            json.dumps(lock, indent=2, sort_keys=True, default=_jsonable) + "\n")
        self.path("report.json").write_text(
            json.dumps(self.report, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    raise TypeError(f"not serializable: {type(x)}")


def _write_rows(path, header, rows, config_hash_value):
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash_value}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# analyses

def _full_chain(run, S, params):
    if "_full_chain" not in run.__dict__:
        run._full_chain = build_full_chain(S, params, limit=run.cfg["limits"]["full_chain_blocks"])
    return run._full_chain


def _collapsed_chain(run, S, params):
    if "_collapsed" not in run.__dict__:
        run._collapsed = projection_matrix(S, params,
                                           max_states=run.cfg["limits"]["transition_states"])
    return run._collapsed


def analysis_exact_gap(run, S, params, gen):
    chain = _full_chain(run, S, params)
    gap = spectral_gap(chain)
    lower, upper = mixing_time_bounds(gap, float(chain.log_pi.min()), run.cfg["epsilon"])
    return {"n_states": chain.n, "gap": gap, "min_log_pi": float(chain.log_pi.min()),
            "epsilon": run.cfg["epsilon"], "mixing_time_lower": lower,
            "mixing_time_upper": upper}


def analysis_tv_mixing(run, S, params, gen):
    chain = _full_chain(run, S, params)
    return {"epsilon": run.cfg["epsilon"],
            "tau": exact_tv_mixing_time(chain, run.cfg["epsilon"])}


def analysis_collapsed_gap(run, S, params, gen):
    cc = _collapsed_chain(run, S, params)
    chain = cc.to_reversible_chain()
    cc.write_pi_csv(run.path("pi_bar.csv"))
    if run.cfg.get("collapsed", {}).get("export_transitions", False):
        cc.write_triplets(run.path("transitions.txt"))
    return {"n_states": cc.n_states, "gap": spectral_gap(chain)}


def analysis_conductance(run, S, params, gen):
    chain = _collapsed_chain(run, S, params).to_reversible_chain()
    return conductance(chain).to_dict()


def analysis_path_bound(run, S, params, gen):
    chain = _collapsed_chain(run, S, params).to_reversible_chain()
    return path_bound_rho(chain).to_dict()


def analysis_bottleneck(run, S, params, gen):
    cc = collapsed_posterior(S, params, max_states=run.cfg["limits"]["collapsed_states"])
    b = run.cfg["bottleneck"]
    res = bottleneck_d(cc, mode=b["mode"], top_k=b["top_k"])
    out = res.to_dict()
    out["n_states"] = cc.n_states
    out["words"] = [[int(x) + 1 for x in word] for word in cc.space.words]
    return out


def analysis_landscape(run, S, params, gen):
    if gen is None:
        raise ConfigError("landscape analysis needs a generative model")
    ls = run.cfg.get("landscape", {})
    res = find_local_maxima(
        gen, resolution=ls.get("resolution", 20), p0=ls.get("p0"),
        n_random=ls.get("n_random", 20), seed=run.cfg["seed"],
        certificate_samples=ls.get("certificate_samples", 1000),
    )
    if "slice" in ls:
        sl = ls["slice"]
        base = res.modes[0].theta
        export_slice(run.path("landscape_slice.csv"), gen, base, tuple(sl["x"]), tuple(sl["y"]),
                     n_points=sl.get("n_points", 41), p0=ls.get("p0"))
    return res.to_dict()


def _table1(run, cells, n_datasets, workers):
    t1 = run.cfg["table1"]
    rows, reports = [], []
    for cell in cells:
        rep = run_table1_cell(cell["J"], cell["w"], cell["n_blocks"], p=cell.get("p", t1["p"]),
                              n_datasets=n_datasets, seed=run.cfg["seed"],
                              n_chains=t1["n_chains"], workers=workers,
                              schedule=_schedule(run.cfg))
        reports.append(rep.to_dict())
        rows.append([cell["J"], cell["w"], cell["n_blocks"], cell.get("p", t1["p"]), n_datasets,
                     rep.flagged_percentage])
    _write_rows(run.path("table1.csv"), ["J", "w", "n_blocks", "p", "n_datasets", "flagged_pct"],
                rows, run.hash)
    return {"cells": reports}


def _schedule(cfg):
    s = cfg["sampler"]
    return Schedule(s["burn_in"], s["samples"], s["thin"], s["scan"])


ANALYSIS_FUNCS = {
    "exact-gap": analysis_exact_gap,
    "tv-mixing": analysis_tv_mixing,
    "collapsed-gap": analysis_collapsed_gap,
    "conductance": analysis_conductance,
    "path-bound": analysis_path_bound,
    "bottleneck-d": analysis_bottleneck,
    "landscape": analysis_landscape,
}


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(run, args):
    S, labels, gen = _data(run.cfg)
    if labels is None:
        raise ConfigError("simulate needs a 'generative' section")
    write_sequence(run.path("sequence.txt"), S)
    _write_rows(run.path("truth.csv"), ["block", "label"],
                [[i + 1, int(lab)] for i, lab in enumerate(labels)], run.hash)
    run.report["results"] = {"n_blocks": S.n_blocks, "L": S.L, "w": S.w, "M": S.M,
                             "generative": gen.to_dict(),
                             "label_counts": np.bincount(labels, minlength=gen.J + 1).tolist()}


def cmd_sample(run, args):
    S, labels, gen = _data(run.cfg)
    params = _params(run.cfg, S, gen)
    init_kind = run.cfg["sampler"]["init"]
    seed = run.cfg["seed"]
    if init_kind == "zeros":
        init = np.zeros(S.n_blocks, dtype=np.int8)
    elif init_kind == "truth":
        if labels is None:
            raise ConfigError("init 'truth' needs simulated data")
        init = (labels == 1).astype(np.int8)
    else:
        init = (stream(seed, 2).random(S.n_blocks) < params.p0).astype(np.int8)
    trace = run_chain(S, params, init, _schedule(run.cfg), rng=stream(seed, 3), seed=seed)
    trace.metadata["config_hash"] = run.hash
    trace.to_csv(run.path("trace.csv"))
    run.report["results"] = {
        "records": len(trace),
        "mean": {n: float(trace.column(n).mean()) for n in trace.names},
    }


def _run_analyses(run, names):
    S, labels, gen = _data(run.cfg)
    params = _params(run.cfg, S, gen)
    for name in names:
        run.report["results"][name] = ANALYSIS_FUNCS[name](run, S, params, gen)


def cmd_exact_gap(run, args):
    names = ["exact-gap"] + (["tv-mixing"] if args.tv else [])
    _run_analyses(run, names)


def cmd_collapsed(run, args):
    S, labels, gen = _data(run.cfg)
    params = _params(run.cfg, S, gen)
    results = {}
    sl = run.cfg.get("collapsed", {}).get("slice")
    if sl is not None:
        fixed = {tuple(f["word"]): f["count"] for f in sl.get("fixed", [])}
        cx, cy, lp, globally = collapsed_slice(
            S, params, [tuple(w) for w in sl["free"]], fixed,
            max_states=run.cfg["limits"]["collapsed_states"])
        names = ["c_" + "".join(map(str, w)) for w in sl["free"]]
        _write_rows(run.path("collapsed_slice.csv"), names + ["log_pi_bar"],
                    [[int(a), int(b), repr(float(v))] for a, b, v in zip(cx, cy, lp)], run.hash)
        best = int(np.argmax(lp))
        results["slice"] = {"points": int(lp.size), "normalized_over_full_space": globally,
                            "argmax": [int(cx[best]), int(cy[best])],
                            "max_log_pi_bar": float(lp[best])}
    else:
        results.update(analysis_collapsed_gap(run, S, params, gen))
    run.report["results"]["collapsed"] = results


def cmd_bottleneck(run, args):
    _run_analyses(run, ["bottleneck-d"])


def cmd_landscape(run, args):
    gen = _generative_model(run.cfg, run.cfg["seed"])
    run.report["results"]["landscape"] = analysis_landscape(run, None, None, gen)


def smoke_cells(cells, p):
    """Shrink cells to SMOKE_BLOCKS blocks, raising the motif frequency so each
    cell keeps its expected number of motif instances."""
    out = []
    for cell in cells:
        scale = cell["n_blocks"] / SMOKE_BLOCKS
        out.append(dict(cell, n_blocks=SMOKE_BLOCKS, p=min(cell.get("p", p) * scale, 0.5)))
    return out


def cmd_table1(run, args):
    if args.smoke:
        cells = smoke_cells(run.cfg["table1"]["cells"], run.cfg["table1"]["p"])
        n_datasets = SMOKE_DATASETS
    else:
        cells, n_datasets = run.cfg["table1"]["cells"], run.cfg["table1"]["n_datasets"]
    run.report["results"]["table1"] = _table1(run, cells, n_datasets, args.workers)
    run.report["results"]["smoke"] = bool(args.smoke)


def cmd_calibrate(run, args):
    a = calibrate_dirichlet_concentration(args.target, args.M, args.mc_samples, run.cfg["seed"])
    check = median_max_dirichlet(a, args.M, args.mc_samples, run.cfg["seed"] + 1)
    run.report["results"] = {"target": args.target, "M": args.M, "a": a,
                             "mc_samples": args.mc_samples, "resimulated_median_max": check}


def cmd_analyze(run, args):
    names = run.cfg.get("analysis")
    if not names:
        raise ConfigError("config has no 'analysis' list")
    data_names = [n for n in names if n != "table1"]
    if data_names:
        _run_analyses(run, data_names)
    if "table1" in names:
        t1 = run.cfg["table1"]
        run.report["results"]["table1"] = _table1(run, t1["cells"], t1["n_datasets"],
                                                  args.workers)


COMMANDS = {
    "simulate": (cmd_simulate, "simulate a sequence and its true block labels"),
    "sample": (cmd_sample, "run one Gibbs chain and write its trace"),
    "exact-gap": (cmd_exact_gap, "spectral gap of the full random-scan chain"),
    "collapsed": (cmd_collapsed, "collapsed posterior, its chain, or a 2-D slice"),
    "bottleneck": (cmd_bottleneck, "bottleneck statistic d of the collapsed chain"),
    "landscape": (cmd_landscape, "local maxima of the expected log density"),
    "table1": (cmd_table1, "multi-chain convergence study cells"),
    "calibrate": (cmd_calibrate, "Dirichlet concentration for a median-max target"),
    "analyze": (cmd_analyze, "run every analysis listed in the config"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="motifgibbs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="base seed (overrides the config)")
        p.add_argument("--workers", type=int,
                       default=int(os.environ.get(WORKERS_ENV, "1")),
                       help=f"worker processes (default ${WORKERS_ENV} or 1)")
        p.add_argument("--out", help="output directory (default: config output.dir or ./run)")
        if name == "exact-gap":
            p.add_argument("--tv", action="store_true", help="also compute the exact TV mixing time")
        if name == "table1":
            p.add_argument("--smoke", action="store_true",
                           help="500 blocks and 3 datasets per cell, motif frequency "
                                "scaled to keep the expected instance count")
        if name == "calibrate":
            p.add_argument("--target", type=float, default=0.95)
            p.add_argument("-M", type=int, default=4)
            p.add_argument("--mc-samples", type=int, default=100_000)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config, {"seed": args.seed})
        out = args.out or cfg.get("output", {}).get("dir", "run")
        run = Run(cfg, args.command, out)
        func(run, args)
        run.finish()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MotifGibbsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {run.out}/report.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
