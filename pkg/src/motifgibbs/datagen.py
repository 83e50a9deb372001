"""Generative model for simulated sequences and the simulation-study setup.

Blocks are drawn i.i.d. from a mixture of ``J`` true motifs (each a
position-specific frequency matrix) and a background distribution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, NumericError
from .model import Sequence, all_words
from .rng import as_generator

__all__ = [
    "GenerativeModel",
    "deterministic_model",
    "disagreement_fraction",
    "generative_pmf",
    "generative_pmf_all",
    "sample_sequence",
    "sample_dirichlet",
    "median_max_dirichlet",
    "calibrate_dirichlet_concentration",
    "sample_study_model",
]


@dataclass(frozen=True)
class GenerativeModel:
    """Mixture of J motif matrices and a background vector.

    ``motif_matrices`` has shape ``(J, w, M)`` and ``p`` has length J.
    """

    p: np.ndarray
    motif_matrices: np.ndarray
    background: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        mats = np.asarray(self.motif_matrices, dtype=float)
        bg = np.asarray(self.background, dtype=float)
        if p.size == 0:
            mats = mats.reshape(0, *mats.shape[-2:]) if mats.ndim == 3 else mats
        if mats.ndim != 3 or mats.shape[0] != p.size or mats.shape[2] != bg.size:
            raise DimensionError("motif_matrices must have shape (J, w, M) matching p and background")
        if np.any(p <= 0) or p.sum() >= 1:
            raise DomainError("motif frequencies must be positive with sum below 1")
        if np.any(bg <= 0) or abs(bg.sum() - 1) > 1e-12:
            raise DomainError("background must be a strictly positive probability vector")
        if np.any(mats < 0) or np.any(np.abs(mats.sum(axis=2) - 1) > 1e-12):
            raise DomainError("motif columns must be probability vectors")
        for name, val in (("p", p), ("motif_matrices", mats), ("background", bg)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def J(self):
        return self.p.size

    @property
    def w(self):
        return self.motif_matrices.shape[1]

    @property
    def M(self):
        return self.background.size

    def to_dict(self):
        return {
            "J": self.J,
            "w": self.w,
            "M": self.M,
            "p": self.p.tolist(),
            "motif_matrices": self.motif_matrices.tolist(),
            "background": self.background.tolist(),
        }

    @classmethod
    def from_dict(cls, d, w=None):
        mats = np.asarray(d["motif_matrices"], dtype=float)
        if mats.size == 0:
            w = d.get("w", w)
            mats = np.zeros((0, w, len(d["background"])))
        return cls(np.asarray(d["p"], dtype=float), mats, np.asarray(d["background"]))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def deterministic_model(words, p, background):
    """Mixture whose motifs are fixed words (each column a point mass)."""
    background = np.asarray(background, dtype=float)
    M = background.size
    words = np.asarray(words, dtype=np.int64)
    if words.ndim != 2:
        raise DimensionError("words must be a (J, w) array")
    if words.size and (words.min() < 1 or words.max() > M):
        raise DomainError(f"word symbols must lie in 1..{M}")
    mats = np.zeros((words.shape[0], words.shape[1], M))
    for j, word in enumerate(words):
        mats[j, np.arange(word.size), word - 1] = 1.0
    return GenerativeModel(np.asarray(p, dtype=float), mats, background)


def disagreement_fraction(words):
    """Smallest pairwise fraction of positions at which two words differ."""
    words = np.asarray(words)
    best = np.inf
    for a in range(len(words)):
        for b in range(a + 1, len(words)):
            best = min(best, float(np.mean(words[a] != words[b])))
    return best


def generative_pmf_all(gen: GenerativeModel):
    """g(s) for every word, indexed by word index."""
    s = all_words(gen.w, gen.M) - 1
    ks = np.arange(gen.w)
    background = np.prod(gen.background[s], axis=1)
    out = (1.0 - gen.p.sum()) * background
    for j in range(gen.J):
        out = out + gen.p[j] * np.prod(gen.motif_matrices[j][ks, s], axis=1)
    return out


def generative_pmf(gen: GenerativeModel, s) -> float:
    s = np.asarray(s, dtype=np.int64) - 1
    if s.shape != (gen.w,):
        raise DimensionError(f"word has length {s.size}, expected {gen.w}")
    ks = np.arange(gen.w)
    total = (1.0 - gen.p.sum()) * np.prod(gen.background[s])
    for j in range(gen.J):
        total += gen.p[j] * np.prod(gen.motif_matrices[j][ks, s])
    return float(total)


def sample_sequence(gen: GenerativeModel, n_blocks: int, rng=None):
    """Draw ``n_blocks`` i.i.d. blocks.

    Returns the sequence and per-block labels (0 = background, j = motif j).
    """
    if n_blocks < 1:
        raise DomainError("n_blocks must be at least 1")
    rng = as_generator(rng)
    weights = np.concatenate([[1.0 - gen.p.sum()], gen.p])
    labels = rng.choice(gen.J + 1, size=n_blocks, p=weights)
    probs = np.empty((n_blocks, gen.w, gen.M))
    probs[:] = gen.background
    motif = labels > 0
    if motif.any():
        probs[motif] = gen.motif_matrices[labels[motif] - 1]
    cdf = np.cumsum(probs, axis=2)
    cdf[..., -1] = 1.0
    u = rng.random((n_blocks, gen.w, 1))
    symbols = (u >= cdf).sum(axis=2) + 1
    return Sequence(symbols.ravel(), gen.w, gen.M), labels


def sample_dirichlet(rng, a, size, M):
    """Symmetric Dirichlet(a, ..., a) draws of shape ``(size, M)``.

    Normalized Gamma variates, formed in log space as
    ``log Gamma(a + 1) + log(U) / a`` so very small ``a`` does not underflow.
    """
    logg = np.log(rng.gamma(a + 1.0, size=(size, M))) + np.log(rng.random((size, M))) / a
    logg -= logg.max(axis=1, keepdims=True)
    x = np.exp(logg)
    return x / x.sum(axis=1, keepdims=True)


def median_max_dirichlet(a, M, mc_samples=100_000, seed=0):
    """Monte Carlo median of max_m theta_m for theta ~ Dirichlet(a 1_M)."""
    rng = np.random.Generator(np.random.Philox(seed))
    theta = sample_dirichlet(rng, a, int(mc_samples), M)
    return float(np.median(theta.max(axis=1)))


def calibrate_dirichlet_concentration(
    target_median_max, M, mc_samples=100_000, seed=0, tol=0.001, max_iter=80
):
    """Concentration ``a`` whose Dirichlet(a 1_M) has the given median max.

    Bisection on ``log a`` over ``[1e-4, 1e4]``.  Each evaluation reuses the
    same random stream so the Monte Carlo objective is a smooth function of
    ``a``.  The returned value reproduces the target within 0.005 on the
    calibration sample.
    """
    if not 1.0 / M < target_median_max < 1.0:
        raise DomainError(f"target must lie in (1/M, 1) = ({1.0 / M:.4g}, 1)")

    def f(log_a):
        return median_max_dirichlet(np.exp(log_a), M, mc_samples, seed) - target_median_max

    lo, hi = np.log(1e-4), np.log(1e4)
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo > 0 > f_hi):
        raise NumericError(
            f"bisection does not bracket the target: f(1e-4)={f_lo:.4g}, f(1e4)={f_hi:.4g}"
        )
    mid, f_mid = lo, f_lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) <= tol:
            break
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
    if abs(f_mid) > 0.005:
        raise NumericError(f"calibration stalled at median error {f_mid:.4g}")
    return float(np.exp(mid))


def sample_study_model(J, w, M, p, a0, a1, rng=None):
    """Random motif matrices (columns ~ Dirichlet(a1)) and background (~ Dirichlet(a0))."""
    rng = as_generator(rng)
    p = np.broadcast_to(np.asarray(p, dtype=float), (J,)).copy()
    mats = sample_dirichlet(rng, a1, J * w, M).reshape(J, w, M)
    background = sample_dirichlet(rng, a0, 1, M)[0]
    return GenerativeModel(p, mats, background)
