"""Gibbs samplers over the motif assignment vector.

Two update schemes share one compiled site update:

* ``random``: pick a block uniformly, hold with probability 1/2, otherwise
  redraw it from its full conditional (the lazy random-scan kernel T).
* ``systematic``: redraw blocks 0..n-1 in order; one call is one sweep.

The site update keeps motif/background count vectors incrementally and
evaluates the conditional log-odds from precomputed log tables, so a sweep
costs O(n_blocks * w).
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from .model import ModelParams, Sequence, as_assignment, count_vectors
from .rng import as_generator

__all__ = [
    "Schedule",
    "ChainTrace",
    "summary_names",
    "random_scan_step",
    "systematic_sweep",
    "run_chain",
    "one_step_samples",
    "state_code",
]

SCAN_CODES = {"systematic": 0, "random": 1}


def summary_names(w, M):
    """Column names of a trace: |A|, motif estimates, background estimates."""
    names = ["n_motif"]
    names += [f"theta_{k}_{m}" for k in range(1, w + 1) for m in range(1, M + 1)]
    names += [f"theta_0_{m}" for m in range(1, M + 1)]
    return names


class _Kernel:
    """Mutable sampler state plus the lookup tables of the site update."""

    def __init__(self, S: Sequence, params: ModelParams, A):
        n, w, M = S.n_blocks, S.w, S.M
        beta = params.beta
        self.blocks = np.ascontiguousarray(S.blocks - 1)
        self.A = as_assignment(A, n).copy()
        cv = count_vectors(S, self.A)
        self.mc = cv.motif_counts.astype(np.int64)
        self.bg = cv.background_counts.astype(np.int64)
        # scalars: [n_ones, background total]
        self.scal = np.array([int(self.A.sum()), int(self.bg.sum())], dtype=np.int64)
        c = np.arange(n + 1, dtype=float)
        self.log_mc = np.log(c[None, None, :] + beta[1:, :, None])
        self.log_mtot = np.log(c[None, :] + beta[1:].sum(axis=1)[:, None])
        cl = np.arange(S.L + 1, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            # only entries with count >= 1 are read
            self.log_bg = np.log(cl[None, :] + beta[0][:, None] - 1.0)
            self.log_bgtot = np.log(cl + beta[0].sum() - 1.0)
        self.logit_p0 = float(np.log(params.p0) - np.log1p(-params.p0))
        self.beta = np.ascontiguousarray(beta)

    def tables(self):
        return (
            self.blocks, self.A, self.mc, self.bg, self.scal,
            self.log_mc, self.log_mtot, self.log_bg, self.log_bgtot, self.logit_p0,
        )


@nb.njit(cache=True)
def _site_update(i, u, blocks, A, mc, bg, scal, log_mc, log_mtot, log_bg, log_bgtot, logit_p0):
    w = blocks.shape[1]
    if A[i] == 1:
        for k in range(w):
            m = blocks[i, k]
            mc[k, m] -= 1
            bg[m] += 1
        scal[0] -= 1
        scal[1] += w
    n_ones = scal[0]
    lo = logit_p0
    for k in range(w):
        m = blocks[i, k]
        lo += log_mc[k, m, mc[k, m]] - log_mtot[k, n_ones]
    # move the block's symbols out of the background one at a time
    tot = scal[1]
    for k in range(w):
        m = blocks[i, k]
        lo += log_bgtot[tot] - log_bg[m, bg[m]]
        bg[m] -= 1
        tot -= 1
    if lo >= 0:
        p1 = 1.0 / (1.0 + np.exp(-lo))
    else:
        e = np.exp(lo)
        p1 = e / (1.0 + e)
    if u < p1:
        A[i] = 1
        for k in range(w):
            mc[k, blocks[i, k]] += 1
        scal[0] += 1
        scal[1] = tot
    else:
        A[i] = 0
        for k in range(w):
            bg[blocks[i, k]] += 1


@nb.njit(cache=True)
def _update(scan, rng, blocks, A, mc, bg, scal, log_mc, log_mtot, log_bg, log_bgtot, logit_p0):
    n = blocks.shape[0]
    if scan == 0:
        for i in range(n):
            _site_update(i, rng.random(), blocks, A, mc, bg, scal,
                         log_mc, log_mtot, log_bg, log_bgtot, logit_p0)
    else:
        i = int(rng.random() * n)
        if i >= n:
            i = n - 1
        if rng.random() >= 0.5:
            _site_update(i, rng.random(), blocks, A, mc, bg, scal,
                         log_mc, log_mtot, log_bg, log_bgtot, logit_p0)


@nb.njit(cache=True)
def _record(out, r, mc, bg, scal, beta):
    w, M = mc.shape
    n_ones = scal[0]
    out[r, 0] = n_ones
    col = 1
    for k in range(w):
        denom = n_ones + beta[k + 1].sum()
        for m in range(M):
            out[r, col] = (mc[k, m] + beta[k + 1, m]) / denom
            col += 1
    denom = scal[1] + beta[0].sum()
    for m in range(M):
        out[r, col] = (bg[m] + beta[0, m]) / denom
        col += 1


@nb.njit(cache=True)
def _run(scan, burn_in, n_records, thin, rng, beta, out, snaps, record_snaps,
         blocks, A, mc, bg, scal, log_mc, log_mtot, log_bg, log_bgtot, logit_p0):
    for _ in range(burn_in):
        _update(scan, rng, blocks, A, mc, bg, scal, log_mc, log_mtot, log_bg, log_bgtot, logit_p0)
    for r in range(n_records):
        for _ in range(thin):
            _update(scan, rng, blocks, A, mc, bg, scal,
                    log_mc, log_mtot, log_bg, log_bgtot, logit_p0)
        _record(out, r, mc, bg, scal, beta)
        if record_snaps:
            snaps[r, :] = A


@nb.njit(cache=True)
def _one_step_codes(n_trials, rng, blocks, A, mc, bg, scal,
                    log_mc, log_mtot, log_bg, log_bgtot, logit_p0):
    n = blocks.shape[0]
    codes = np.empty(n_trials, dtype=np.int64)
    A0 = A.copy()
    mc0 = mc.copy()
    bg0 = bg.copy()
    s0 = scal.copy()
    for t in range(n_trials):
        A[:] = A0
        mc[:, :] = mc0
        bg[:] = bg0
        scal[:] = s0
        _update(1, rng, blocks, A, mc, bg, scal, log_mc, log_mtot, log_bg, log_bgtot, logit_p0)
        c = 0
        for i in range(n):
            c += np.int64(A[i]) << i
        codes[t] = c
    return codes


def state_code(A):
    """Integer code of an assignment: bit i holds A[i]."""
    A = np.asarray(A, dtype=np.int64)
    return int(np.sum(A << np.arange(A.size, dtype=np.int64)))


def random_scan_step(S: Sequence, A, params: ModelParams, rng=None):
    """One step of the lazy random-scan kernel; returns a new assignment."""
    k = _Kernel(S, params, A)
    _update(1, as_generator(rng), *k.tables())
    return k.A


def systematic_sweep(S: Sequence, A, params: ModelParams, rng=None):
    """Redraw every block in order from its full conditional (no holding)."""
    k = _Kernel(S, params, A)
    _update(0, as_generator(rng), *k.tables())
    return k.A


def one_step_samples(S: Sequence, A, params: ModelParams, n_trials, rng=None):
    """Codes (see :func:`state_code`) of ``n_trials`` independent random-scan
    steps taken from the same state ``A``.  Requires ``n_blocks <= 62``."""
    if S.n_blocks > 62:
        raise ValueError("state codes need n_blocks <= 62")
    k = _Kernel(S, params, A)
    return _one_step_codes(int(n_trials), as_generator(rng), *k.tables())


@dataclass
class Schedule:
    """Run lengths in updates; an update is a sweep or a single random-scan step."""

    burn_in: int = 1000
    samples: int = 10_000
    thin: int = 1
    scan: str = "systematic"

    def __post_init__(self):
        if self.scan not in SCAN_CODES:
            raise ValueError(f"scan must be one of {sorted(SCAN_CODES)}")
        if self.burn_in < 0 or self.samples < 0 or self.thin < 1:
            raise ValueError("burn_in and samples must be >= 0 and thin >= 1")

    @property
    def n_records(self):
        return self.samples // self.thin


@dataclass
class ChainTrace:
    records: np.ndarray
    names: list
    metadata: dict = field(default_factory=dict)
    states: np.ndarray | None = None

    def __len__(self):
        return self.records.shape[0]

    def column(self, name):
        return self.records[:, self.names.index(name)]

    def to_csv(self, path):
        """Write one row per record, with metadata in ``<path>.json``."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["record"] + self.names)
            for r, row in enumerate(self.records):
                writer.writerow([r] + [repr(float(x)) for x in row])
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(self.metadata, indent=2, sort_keys=True)
        )

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        names = rows[0][1:]
        records = np.array([[float(x) for x in r[1:]] for r in rows[1:]]).reshape(-1, len(names))
        meta_path = path.with_suffix(path.suffix + ".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(records, names, meta)


def run_chain(S: Sequence, params: ModelParams, init, schedule: Schedule | None = None,
              rng=None, record_states=False, seed=None):
    """Run burn-in, then record posterior-mean summaries every ``thin`` updates."""
    schedule = schedule or Schedule()
    if rng is None and seed is not None:
        rng = seed
    k = _Kernel(S, params, init)
    names = summary_names(S.w, S.M)
    n_rec = schedule.n_records
    out = np.empty((n_rec, len(names)))
    snaps = np.empty((n_rec if record_states else 0, S.n_blocks), dtype=np.int8)
    _run(SCAN_CODES[schedule.scan], schedule.burn_in, n_rec, schedule.thin,
         as_generator(rng), k.beta, out, snaps, record_states, *k.tables())
    meta = asdict(schedule)
    meta.update(seed=seed, n_blocks=S.n_blocks, w=S.w, M=S.M, p0=params.p0)
    return ChainTrace(out, names, meta, snaps if record_states else None)
