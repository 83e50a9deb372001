"""Inference model for the block-aligned motif sampler.

A sequence of length ``L`` over the alphabet ``{1..M}`` is split into
``L/w`` blocks of width ``w``.  The latent state is a binary assignment
``A`` marking which blocks are motif instances.  With Dirichlet priors on
the motif columns and the background frequencies integrated out, the
posterior on ``A`` depends only on count vectors, and every quantity here
is computed in log space through ``gammaln``.

Symbols are 1-based everywhere in the public API.  Words of length ``w``
are encoded as base-``M`` integers, ``sum_k (s_k - 1) * M**(k-1)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit, gammaln

from .errors import DimensionError, DomainError

__all__ = [
    "Sequence",
    "ModelParams",
    "CountVectors",
    "word_index",
    "word_from_index",
    "all_words",
    "check_theta",
    "as_assignment",
    "count_vectors",
    "log_likelihood_given_theta",
    "log_posterior_unnorm",
    "log_posterior_from_counts",
    "marginal_block_density",
    "log_conditional_odds",
    "conditional_odds",
    "conditional_prob_one",
    "conditional_lower_bounds",
    "posterior_mean_estimates",
]


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def word_index(word, M):
    """Base-M index of a 1-based word (first position least significant)."""
    word = np.asarray(word, dtype=np.int64)
    powers = M ** np.arange(word.shape[-1], dtype=np.int64)
    return (word - 1) @ powers


def word_from_index(index, w, M):
    """Inverse of :func:`word_index`; returns a length-w tuple of symbols."""
    out = []
    for _ in range(w):
        out.append(int(index % M) + 1)
        index //= M
    return tuple(out)


def all_words(w, M):
    """All ``M**w`` words as a ``(M**w, w)`` array ordered by word index."""
    idx = np.arange(M**w, dtype=np.int64)
    return (idx[:, None] // (M ** np.arange(w, dtype=np.int64))) % M + 1


@dataclass(frozen=True)
class Sequence:
    """Observed symbol string pre-split into blocks of width ``w``."""

    symbols: np.ndarray
    w: int
    M: int

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=np.int64).ravel()
        if self.w < 1 or self.M < 1:
            raise DomainError("w and M must be positive")
        if sym.size == 0 or sym.size % self.w:
            raise DimensionError(
                f"sequence length {sym.size} is not a positive multiple of w={self.w}"
            )
        if sym.min() < 1 or sym.max() > self.M:
            raise DomainError(f"symbols must lie in 1..{self.M}")
        object.__setattr__(self, "symbols", _frozen(sym))

    @classmethod
    def from_symbols(cls, symbols, w, M):
        """Build a sequence, dropping (with a warning) a tail shorter than w."""
        sym = np.asarray(symbols, dtype=np.int64).ravel()
        extra = sym.size % w
        if extra:
            warnings.warn(
                f"sequence length {sym.size} not divisible by w={w}; "
                f"dropping the last {extra} symbols",
                stacklevel=2,
            )
            sym = sym[: sym.size - extra]
        return cls(sym, w, M)

    @classmethod
    def from_blocks(cls, blocks, M):
        blocks = np.asarray(blocks, dtype=np.int64)
        return cls(blocks.ravel(), blocks.shape[1], M)

    @property
    def L(self):
        return self.symbols.size

    @property
    def n_blocks(self):
        return self.symbols.size // self.w

    @property
    def blocks(self):
        """``(n_blocks, w)`` view of the symbols."""
        return self.symbols.reshape(self.n_blocks, self.w)

    @property
    def word_indices(self):
        return word_index(self.blocks, self.M)

    @property
    def total_counts(self):
        """N(S): symbol counts over the whole sequence."""
        return np.bincount(self.symbols - 1, minlength=self.M)


@dataclass(frozen=True)
class ModelParams:
    """Prior motif probability ``p0`` and Dirichlet hyperparameters.

    ``beta`` has shape ``(w + 1, M)``; row 0 is the background prior.
    """

    p0: float
    beta: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.p0 < 1.0:
            raise DomainError(f"p0 must lie strictly inside (0, 1), got {self.p0}")
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 2 or beta.shape[0] < 2:
            raise DimensionError("beta must have shape (w + 1, M)")
        if not np.all(beta > 0):
            raise DomainError("all Dirichlet hyperparameters must be positive")
        object.__setattr__(self, "p0", float(self.p0))
        object.__setattr__(self, "beta", _frozen(beta))

    @classmethod
    def uniform(cls, w, M, p0, beta=1.0):
        return cls(p0, np.full((w + 1, M), float(beta)))

    @property
    def w(self):
        return self.beta.shape[0] - 1

    @property
    def M(self):
        return self.beta.shape[1]


class CountVectors(NamedTuple):
    motif_counts: np.ndarray  # (w, M): N(A^(k))
    background_counts: np.ndarray  # (M,): N(A^c)
    total_counts: np.ndarray  # (M,): N(S)


def check_theta(theta, w=None, M=None, atol=1e-12):
    """Validate a ``(w + 1, M)`` frequency matrix and return it as an array."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2:
        raise DimensionError("theta must be a (w + 1, M) matrix")
    if w is not None and theta.shape[0] != w + 1:
        raise DimensionError(f"theta has {theta.shape[0]} rows, expected {w + 1}")
    if M is not None and theta.shape[1] != M:
        raise DimensionError(f"theta has {theta.shape[1]} columns, expected {M}")
    if np.any(theta < 0) or np.any(np.abs(theta.sum(axis=1) - 1.0) > atol):
        raise DomainError("every theta row must be a probability vector")
    return theta


def as_assignment(A, n_blocks):
    A = np.asarray(A)
    if A.shape != (n_blocks,):
        raise DimensionError(f"assignment has shape {A.shape}, expected ({n_blocks},)")
    if not np.all((A == 0) | (A == 1)):
        raise DomainError("assignment entries must be 0 or 1")
    return A.astype(np.int8)


def _check_params(S, params):
    if params.beta.shape != (S.w + 1, S.M):
        raise DimensionError(
            f"beta shape {params.beta.shape} does not match (w+1, M) = {(S.w + 1, S.M)}"
        )


def count_vectors(S: Sequence, A) -> CountVectors:
    """Motif, background and total symbol counts for assignment ``A``."""
    A = as_assignment(A, S.n_blocks)
    motif_blocks = S.blocks[A == 1] - 1
    motif = np.zeros((S.w, S.M), dtype=np.int64)
    for k in range(S.w):
        motif[k] = np.bincount(motif_blocks[:, k], minlength=S.M)
    total = S.total_counts
    return CountVectors(motif, total - motif.sum(axis=0), total)


def log_likelihood_given_theta(S: Sequence, A, theta) -> float:
    """log of theta_0^N(A^c) * prod_k theta_k^N(A^(k)); -inf on a zero entry."""
    theta = check_theta(theta, S.w, S.M)
    cv = count_vectors(S, A)
    with np.errstate(divide="ignore"):
        logt = np.log(theta)
    counts = np.vstack([cv.background_counts, cv.motif_counts])
    mask = counts > 0
    return float(np.sum(counts[mask] * logt[mask]))


def log_posterior_from_counts(motif_counts, n_ones, total_counts, n_blocks, params):
    """Unnormalized log pi(A|S) from count vectors.

    ``motif_counts`` may carry leading batch dimensions ``(..., w, M)`` with
    ``n_ones`` of shape ``(...)``.
    """
    motif_counts = np.asarray(motif_counts, dtype=float)
    n_ones = np.asarray(n_ones, dtype=float)
    beta = params.beta
    bg = np.asarray(total_counts, dtype=float) - motif_counts.sum(axis=-2)
    out = n_ones * np.log(params.p0) + (n_blocks - n_ones) * np.log1p(-params.p0)
    out = out + gammaln(bg + beta[0]).sum(axis=-1) - gammaln(bg.sum(axis=-1) + beta[0].sum())
    mk = gammaln(motif_counts + beta[1:]).sum(axis=-1) - gammaln(
        motif_counts.sum(axis=-1) + beta[1:].sum(axis=-1)
    )
    return out + mk.sum(axis=-1)


def log_posterior_unnorm(S: Sequence, A, params: ModelParams) -> float:
    """log pi(A|S) up to an additive constant that depends only on (S, params)."""
    _check_params(S, params)
    cv = count_vectors(S, A)
    n_ones = int(np.sum(A))
    return float(
        log_posterior_from_counts(cv.motif_counts, n_ones, cv.total_counts, S.n_blocks, params)
    )


def marginal_block_density(s, theta, p0) -> float:
    """f(s|theta) = p0 prod_k theta_{k,s_k} + (1 - p0) prod_k theta_{0,s_k}."""
    theta = np.asarray(theta, dtype=float)
    s = np.asarray(s, dtype=np.int64) - 1
    w = theta.shape[0] - 1
    if s.shape != (w,):
        raise DimensionError(f"word has length {s.size}, expected {w}")
    motif = np.prod(theta[np.arange(1, w + 1), s])
    background = np.prod(theta[0, s])
    return float(p0 * motif + (1.0 - p0) * background)


def _block_terms(S, A, i, params):
    """Counts with block ``i`` forced to background, plus the block's symbols."""
    n = S.n_blocks
    if not 0 <= i < n:
        raise IndexError(f"block index {i} out of range 0..{n - 1}")
    A0 = as_assignment(A, n).copy()
    A0[i] = 0
    cv = count_vectors(S, A0)
    return cv, S.blocks[i] - 1


def log_conditional_odds(S: Sequence, A, i: int, params: ModelParams) -> float:
    """log[pi(A_i=1 | A_-i, S) / pi(A_i=0 | A_-i, S)] for 0-based block ``i``.

    Uses the closed form: prior odds, a background Gamma ratio, and the
    product of current motif-column estimates at the block's symbols.
    """
    _check_params(S, params)
    cv, s = _block_terms(S, A, i, params)
    beta = params.beta
    w = S.w
    n0 = cv.background_counts.astype(float)  # block i counted as background
    n1 = n0 - np.bincount(s, minlength=S.M)  # block i moved out
    bg = (
        np.sum(gammaln(n1 + beta[0]) - gammaln(n0 + beta[0]))
        + gammaln(n0.sum() + beta[0].sum())
        - gammaln(n1.sum() + beta[0].sum())
    )
    nk = cv.motif_counts
    ks = np.arange(w)
    theta_check = (nk[ks, s] + beta[ks + 1, s]) / (nk.sum(axis=1) + beta[1:].sum(axis=1))
    return float(np.log(params.p0) - np.log1p(-params.p0) + bg + np.sum(np.log(theta_check)))


def conditional_odds(S: Sequence, A, i: int, params: ModelParams) -> float:
    return float(np.exp(log_conditional_odds(S, A, i, params)))


def conditional_prob_one(S: Sequence, A, i: int, params: ModelParams) -> float:
    """pi(A_i = 1 | A_-i, S) via a stable logistic of the log-odds."""
    return float(expit(log_conditional_odds(S, A, i, params)))


def conditional_lower_bounds(S: Sequence, params: ModelParams):
    """Per-block lower bounds on pi(A_i=1|.) and pi(A_i=0|.), uniform in A.

    Returns ``(lower_one, lower_zero)``, each of length ``n_blocks``:
    ``(p0/2) prod_k beta_{k,s_k}/(L+|beta_k|)`` and the background analogue
    ``((1-p0)/2) prod_k beta_{0,s_k}/(L+|beta_0|)``.
    """
    _check_params(S, params)
    beta = params.beta
    s = S.blocks - 1
    ks = np.arange(S.w)
    motif = beta[ks + 1, s] / (S.L + beta[1:].sum(axis=1))
    background = beta[0, s] / (S.L + beta[0].sum())
    return (
        0.5 * params.p0 * np.prod(motif, axis=1),
        0.5 * (1.0 - params.p0) * np.prod(background, axis=1),
    )


def posterior_mean_estimates(S: Sequence, A, params: ModelParams) -> np.ndarray:
    """Posterior means of theta given A; row 0 is the background."""
    _check_params(S, params)
    cv = count_vectors(S, A)
    counts = np.vstack([cv.background_counts, cv.motif_counts]).astype(float) + params.beta
    return counts / counts.sum(axis=1, keepdims=True)
