"""Gelman-Rubin scale factors and the multi-chain simulation-study harness."""

from __future__ import annotations

import csv
import functools
import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .datagen import calibrate_dirichlet_concentration, sample_sequence, sample_study_model
from .errors import ContractError
from .gibbs import Schedule, run_chain
from .model import ModelParams
from .rng import stream

__all__ = [
    "gelman_rubin",
    "geweke_z",
    "ExperimentReport",
    "DatasetResult",
    "study_concentrations",
    "run_table1_cell",
    "config_hash",
]

FLAG_THRESHOLD = 1.5
MOTIF_MEDIAN_MAX = 0.95
BACKGROUND_MEDIAN_MAX = 0.30


def gelman_rubin(traces) -> float:
    """Potential scale reduction factor of m chains of length n.

    B = n var(chain means), W = mean within-chain variance (both with
    ddof=1); R = sqrt(((n-1)/n W + B/n) / W).  W = 0 gives 1 when the chains
    agree and ``inf`` when they do not.
    """
    try:
        x = np.vstack([np.asarray(t, dtype=float) for t in traces])
    except ValueError as exc:
        raise ContractError("chains must have equal lengths") from exc
    m, n = x.shape
    if m < 2:
        raise ContractError("need at least two chains")
    if n < 10:
        raise ContractError("need at least 10 records per chain")
    means = x.mean(axis=1)
    B = n * means.var(ddof=1)
    W = x.var(axis=1, ddof=1).mean()
    if W <= 0:
        return 1.0 if B <= 0 else float("inf")
    return float(np.sqrt(((n - 1) / n * W + B / n) / W))


def geweke_z(x, first=0.1, last=0.5) -> float:
    """Difference of early and late means over naive standard errors."""
    x = np.asarray(x, dtype=float)
    n = x.size
    a = x[: int(first * n)]
    b = x[n - int(last * n):]
    if a.size < 2 or b.size < 2:
        raise ContractError("series too short for the requested windows")
    se = np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    diff = a.mean() - b.mean()
    if se == 0:
        return 0.0 if diff == 0 else float(np.sign(diff) * np.inf)
    return float(diff / se)


@functools.lru_cache(maxsize=None)
def study_concentrations(M=4, motif_target=MOTIF_MEDIAN_MAX,
                         background_target=BACKGROUND_MEDIAN_MAX, mc_samples=100_000, seed=0):
    """(a0, a1) Dirichlet concentrations for background and motif columns."""
    a1 = calibrate_dirichlet_concentration(motif_target, M, mc_samples, seed)
    a0 = calibrate_dirichlet_concentration(background_target, M, mc_samples, seed)
    return a0, a1


def config_hash(config) -> str:
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


@dataclass
class DatasetResult:
    dataset: int
    max_rhat: float
    flagged: bool
    rhat: dict
    geweke: dict
    seed_path: list
    n_true: list  # blocks per label (background, motif 1, ...)

    def to_dict(self):
        return asdict(self)


@dataclass
class ExperimentReport:
    config: dict
    datasets: list = field(default_factory=list)
    config_hash: str = ""

    @property
    def flagged_percentage(self):
        if not self.datasets:
            return 0.0
        return 100.0 * sum(d.flagged for d in self.datasets) / len(self.datasets)

    def to_dict(self):
        return {
            "config": self.config,
            "config_hash": self.config_hash,
            "flag_threshold": FLAG_THRESHOLD,
            "scale_factor": "plain PSRF, no degrees-of-freedom correction, no split chains",
            "flagged_percentage": self.flagged_percentage,
            "datasets": [d.to_dict() for d in self.datasets],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)

    def csv_row(self):
        """``J, w, n_blocks, n_datasets, flagged_percentage`` as one CSV line."""
        c = self.config
        buf = io.StringIO()
        csv.writer(buf).writerow(
            [c["J"], c["w"], c["n_blocks"], len(self.datasets), f"{self.flagged_percentage:g}"]
        )
        return buf.getvalue()


def _initial_states(labels, J, n_chains, p0, rng_for):
    inits = []
    for c in range(n_chains):
        if c < J and c < 2:
            inits.append((labels == c + 1).astype(np.int8))
        else:
            inits.append((rng_for(c).random(labels.size) < p0).astype(np.int8))
    return inits


def _run_dataset(args):
    (d, seed, J, w, M, n_blocks, p, p0, beta, a0, a1, sched, n_chains) = args
    gen = sample_study_model(J, w, M, p, a0, a1, rng=stream(seed, d, 0))
    S, labels = sample_sequence(gen, n_blocks, rng=stream(seed, d, 1))
    params = ModelParams(p0, np.full((w + 1, M), beta) if np.isscalar(beta) else np.asarray(beta))
    inits = _initial_states(labels, J, n_chains, p0, lambda c: stream(seed, d, 2, c))
    schedule = Schedule(**sched)
    traces = [run_chain(S, params, init, schedule, rng=stream(seed, d, 3, c))
              for c, init in enumerate(inits)]
    names = traces[0].names
    rhat = {}
    geweke = {}
    for j, name in enumerate(names):
        rhat[name] = gelman_rubin([t.records[:, j] for t in traces])
        geweke[name] = [geweke_z(t.records[:, j]) for t in traces]
    max_rhat = max(rhat.values())
    return DatasetResult(
        d, max_rhat, bool(max_rhat > FLAG_THRESHOLD), rhat, geweke, [seed, d],
        np.bincount(labels, minlength=J + 1).tolist(),
    )


def default_workers():
    return int(os.environ.get("MOTIFGIBBS_WORKERS", "1"))


def run_table1_cell(J, w, n_blocks, p=0.005, params=None, n_datasets=20, seed=0, M=4,
                    schedule=None, n_chains=5, a0=None, a1=None, workers=None,
                    dataset_offset=0):
    """One cell of the multi-chain convergence study.

    Each dataset draws a fresh generative model and sequence; five
    systematic-scan chains start at the motif-1 indicators, the motif-2
    indicators (when J >= 2) and Bernoulli(p0) vectors.  A dataset is flagged
    when the largest scale factor over all summaries exceeds 1.5.

    ``params`` may be a :class:`ModelParams` or ``None`` (p0 = sum of motif
    frequencies, all beta = 1).
    """
    p = np.broadcast_to(np.asarray(p, dtype=float), (J,)).copy()
    if params is None:
        p0, beta = float(p.sum()), 1.0
    else:
        p0, beta = params.p0, params.beta
    if a0 is None or a1 is None:
        c0, c1 = study_concentrations(M)
        a0 = c0 if a0 is None else a0
        a1 = c1 if a1 is None else a1
    schedule = schedule or Schedule()
    sched = asdict(schedule)
    config = {
        "J": J, "w": w, "M": M, "n_blocks": n_blocks, "p": p.tolist(), "p0": p0,
        "beta": beta if np.isscalar(beta) else np.asarray(beta).tolist(),
        "n_datasets": n_datasets, "seed": seed, "schedule": sched, "n_chains": n_chains,
        "a0": a0, "a1": a1,
    }
    jobs = [(d, seed, J, w, M, n_blocks, p, p0, beta, a0, a1, sched, n_chains)
            for d in range(dataset_offset, dataset_offset + n_datasets)]
    workers = default_workers() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_dataset, jobs))
    else:
        results = [_run_dataset(job) for job in jobs]
    return ExperimentReport(config, results, config_hash(config))
