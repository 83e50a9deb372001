"""Collapsed chain on word-instance counts and the bottleneck statistic d.

The posterior on ``A`` depends on it only through ``c = C(A)``, the number
of motif instances of each distinct word.  The collapsed space is the
lattice ``prod_s {0..C(S)_s}`` over words present in the data; states are
stored in mixed-radix order with the first present word varying fastest.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
import scipy.sparse as sp
from scipy.special import expit, gammaln, logsumexp

from .errors import ResourceLimitError, StructuralError
from .model import (
    ModelParams,
    Sequence,
    as_assignment,
    log_posterior_from_counts,
    word_from_index,
)

__all__ = [
    "CollapsedState",
    "CollapsedSpace",
    "CollapsedChain",
    "BottleneckResult",
    "sequence_counts",
    "collapse",
    "collapsed_posterior",
    "projection_matrix",
    "bottleneck_d",
    "maximin_bottleneck",
    "collapsed_log_density",
    "collapsed_slice",
]

DEFAULT_MAX_STATES = 80_000_000
DEFAULT_MAX_TRANSITION_STATES = 2_000_000


def sequence_counts(S: Sequence) -> np.ndarray:
    """C(S): occurrences of each word (length ``M**w``, by word index)."""
    return np.bincount(S.word_indices, minlength=S.M**S.w)


@dataclass(frozen=True)
class CollapsedState:
    """Instance counts for the words present in the data (sparse form)."""

    word_ids: np.ndarray
    counts: np.ndarray
    w: int
    M: int

    def dense(self):
        out = np.zeros(self.M**self.w, dtype=np.int64)
        out[self.word_ids] = self.counts
        return out


def collapse(S: Sequence, A) -> CollapsedState:
    A = as_assignment(A, S.n_blocks)
    word_ids = np.flatnonzero(sequence_counts(S))
    dense = np.bincount(S.word_indices[A == 1], minlength=S.M**S.w)
    return CollapsedState(word_ids, dense[word_ids], S.w, S.M)


@dataclass(frozen=True)
class CollapsedSpace:
    """Mixed-radix lattice of collapsed states."""

    word_ids: np.ndarray  # present words, ascending
    capacities: np.ndarray  # C(S)_s for those words
    words: np.ndarray  # (D, w) 0-based symbols
    M: int

    @classmethod
    def from_sequence(cls, S: Sequence):
        C = sequence_counts(S)
        ids = np.flatnonzero(C)
        words = np.array([word_from_index(int(i), S.w, S.M) for i in ids], dtype=np.int64) - 1
        return cls(ids, C[ids].astype(np.int64), words.reshape(len(ids), S.w), S.M)

    @property
    def dims(self):
        return self.capacities + 1

    @property
    def strides(self):
        return np.concatenate([[1], np.cumprod(self.dims)[:-1]]).astype(np.int64)

    @property
    def n_states(self):
        return int(np.prod(self.dims.astype(object)))

    def index(self, c):
        return int(np.asarray(c, dtype=np.int64) @ self.strides)

    def state(self, index):
        return (int(index) // self.strides) % self.dims

    def states(self, indices=None):
        if indices is None:
            indices = np.arange(self.n_states, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        return (indices[:, None] // self.strides) % self.dims

    def log_multiplicity(self, indices=None):
        """log |D_c| = sum_s log binom(C_s, c_s)."""
        c = self.states(indices)
        C = self.capacities
        return np.sum(gammaln(C + 1) - gammaln(c + 1) - gammaln(C - c + 1), axis=1)


@nb.njit(cache=True)
def _lattice_log_post(dims, words, M, total, n_blocks, beta, log_p0, log_q0, out):
    """Unnormalized log pi(A_c|S) + log|D_c| for every lattice state."""
    D = dims.shape[0]
    w = words.shape[1]
    c = np.zeros(D, dtype=np.int64)
    nk = np.zeros((w, M))
    bg = np.zeros(M)
    btot = np.zeros(w + 1)
    for k in range(w + 1):
        btot[k] = beta[k].sum()
    # log binomials per word
    lb = np.zeros((D, dims.max()))
    for d in range(D):
        C = dims[d] - 1
        for x in range(dims[d]):
            lb[d, x] = math.lgamma(C + 1.0) - math.lgamma(x + 1.0) - math.lgamma(C - x + 1.0)
    n = out.shape[0]
    for idx in range(n):
        nk[:, :] = 0.0
        ones = 0
        lbin = 0.0
        for d in range(D):
            x = c[d]
            ones += x
            lbin += lb[d, x]
            for k in range(w):
                nk[k, words[d, k]] += x
        val = ones * log_p0 + (n_blocks - ones) * log_q0 + lbin
        for m in range(M):
            s = 0.0
            for k in range(w):
                s += nk[k, m]
            bg[m] = total[m] - s
        tot0 = 0.0
        for m in range(M):
            val += math.lgamma(bg[m] + beta[0, m])
            tot0 += bg[m]
        val -= math.lgamma(tot0 + btot[0])
        for k in range(w):
            for m in range(M):
                val += math.lgamma(nk[k, m] + beta[k + 1, m])
            val -= math.lgamma(ones + btot[k + 1])
        out[idx] = val
        # advance the mixed-radix counter
        for d in range(D):
            c[d] += 1
            if c[d] < dims[d]:
                break
            c[d] = 0


@dataclass
class CollapsedChain:
    """Marginal posterior over collapsed states and its projection chain.

    ``log_pi_bar`` is normalized.  The sparse transition matrix is built on
    first access of :attr:`transitions`.
    """

    space: CollapsedSpace
    log_pi_bar: np.ndarray
    n_blocks: int
    max_transition_states: int = DEFAULT_MAX_TRANSITION_STATES
    _transitions: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def n_states(self):
        return self.log_pi_bar.size

    @property
    def pi_bar(self):
        return np.exp(self.log_pi_bar)

    def log_post(self):
        """Per-assignment log posterior up to a constant: log pi_bar - log|D_c|."""
        return self.log_pi_bar - self.space.log_multiplicity()

    @property
    def transitions(self):
        if self._transitions is None:
            self._transitions = self._build_transitions()
        return self._transitions

    def _build_transitions(self):
        n = self.n_states
        if n > self.max_transition_states:
            raise ResourceLimitError(
                f"collapsed chain has {n} states; transition matrix limit is "
                f"{self.max_transition_states}"
            )
        lp = self.log_post()
        states = self.space.states()
        idx = np.arange(n, dtype=np.int64)
        rows, cols, vals = [], [], []
        scale = 0.5 / self.n_blocks
        for d, (C, stride) in enumerate(zip(self.space.capacities, self.space.strides)):
            c = states[:, d]
            up = c < C
            src, dst = idx[up], idx[up] + stride
            vals.append(scale * (C - c[up]) * expit(lp[dst] - lp[src]))
            rows.append(src)
            cols.append(dst)
            down = c > 0
            src, dst = idx[down], idx[down] - stride
            vals.append(scale * c[down] * expit(lp[dst] - lp[src]))
            rows.append(src)
            cols.append(dst)
        rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        vals = np.concatenate(vals) if vals else np.zeros(0)
        off = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        diag = 1.0 - np.asarray(off.sum(axis=1)).ravel()
        return (off + sp.diags(diag)).tocsr()

    def to_reversible_chain(self, **kwargs):
        from .spectral import DENSE_STORAGE_LIMIT, ReversibleChain

        P = self.transitions
        if self.n_states <= kwargs.pop("dense_limit", DENSE_STORAGE_LIMIT):
            P = P.toarray()
        return ReversibleChain.from_matrix(P, log_pi=self.log_pi_bar, lazy=True, **kwargs)

    def write_triplets(self, path):
        """Coordinate-triplet text: ``row col value`` per nonzero."""
        P = self.transitions.tocoo()
        with open(path, "w") as fh:
            fh.write(f"% {P.shape[0]} {P.shape[1]} {P.nnz}\n")
            for r, c, v in zip(P.row, P.col, P.data):
                fh.write(f"{r} {c} {float(v)!r}\n")

    def write_pi_csv(self, path):
        names = [
            "c_" + "".join(str(s + 1) for s in word) for word in self.space.words
        ]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["state"] + names + ["log_pi_bar"])
            for i, (c, lp) in enumerate(zip(self.space.states(), self.log_pi_bar)):
                writer.writerow([i] + [int(x) for x in c] + [repr(float(lp))])


def collapsed_posterior(S: Sequence, params: ModelParams, max_states=DEFAULT_MAX_STATES):
    """Normalized log pi_bar over the whole collapsed lattice."""
    space = CollapsedSpace.from_sequence(S)
    n = space.n_states
    if n > max_states:
        raise ResourceLimitError(
            f"collapsed space has {n} states, enumeration limit is {max_states}"
        )
    out = collapsed_posterior_unnormalized(S, params, space)
    out -= logsumexp(out)
    return CollapsedChain(space, out, S.n_blocks)


def projection_matrix(S: Sequence, params: ModelParams,
                      max_states=DEFAULT_MAX_TRANSITION_STATES) -> CollapsedChain:
    """Collapsed chain with its closed-form transition matrix built."""
    chain = collapsed_posterior(S, params, max_states=max_states)
    chain.max_transition_states = max_states
    chain.transitions  # noqa: B018 - force construction under the budget
    return chain


def collapsed_log_density(S: Sequence, params: ModelParams, counts, space=None):
    """Unnormalized log pi_bar for rows of ``counts`` (one column per present word).

    Uses the same additive constant as :func:`collapsed_posterior` before
    normalization, so values from both can be compared after subtracting
    a common normalizer.
    """
    space = space or CollapsedSpace.from_sequence(S)
    c = np.atleast_2d(np.asarray(counts, dtype=np.int64))
    if c.shape[1] != space.word_ids.size or np.any(c < 0) or np.any(c > space.capacities):
        raise ValueError("counts must satisfy 0 <= c_s <= C(S)_s for every present word")
    mc = np.zeros((c.shape[0], S.w, S.M))
    for d, word in enumerate(space.words):
        mc[:, np.arange(S.w), word] += c[:, d:d + 1]
    lp = log_posterior_from_counts(mc, c.sum(axis=1), S.total_counts, S.n_blocks, params)
    C = space.capacities
    lbin = np.sum(gammaln(C + 1) - gammaln(c + 1) - gammaln(C - c + 1), axis=1)
    return lp + lbin


def collapsed_slice(S: Sequence, params: ModelParams, free, fixed=None,
                    max_states=DEFAULT_MAX_STATES):
    """log pi_bar on the lattice of two free words with all other counts fixed.

    ``free`` is a pair of 1-based words; ``fixed`` maps further words to
    counts (unlisted words are 0).  Values are normalized over the full
    collapsed space when it fits in ``max_states``, otherwise over the slice,
    and the returned flag says which.  Returns ``(cx, cy, log_pi_bar, normalized_globally)``.
    """
    space = CollapsedSpace.from_sequence(S)
    lookup = {tuple(int(x) + 1 for x in word): d for d, word in enumerate(space.words)}
    base = np.zeros(space.word_ids.size, dtype=np.int64)
    for word, val in (fixed or {}).items():
        base[lookup[tuple(word)]] = val
    dx, dy = (lookup[tuple(word)] for word in free)
    cx = np.arange(space.capacities[dx] + 1)
    cy = np.arange(space.capacities[dy] + 1)
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    counts = np.repeat(base[None, :], gx.size, axis=0)
    counts[:, dx] = gx.ravel()
    counts[:, dy] = gy.ravel()
    vals = collapsed_log_density(S, params, counts, space)
    if space.n_states <= max_states:
        norm = logsumexp(collapsed_posterior_unnormalized(S, params, space))
        globally = True
    else:
        norm = logsumexp(vals)
        globally = False
    return gx.ravel(), gy.ravel(), vals - norm, globally


def collapsed_posterior_unnormalized(S: Sequence, params: ModelParams, space=None):
    space = space or CollapsedSpace.from_sequence(S)
    out = np.empty(space.n_states)
    _lattice_log_post(
        space.dims, space.words, S.M, S.total_counts.astype(float), S.n_blocks,
        np.ascontiguousarray(params.beta), np.log(params.p0), np.log1p(-params.p0), out,
    )
    return out


# ---------------------------------------------------------------------------
# bottleneck statistic

@nb.njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@nb.njit(cache=True)
def _merge(parent, size, best, lw, v, u, result):
    """Union the components of v and u; update the running minimum ratio.

    ``result`` holds [log ratio, pair a, pair b, bottleneck vertex].
    """
    rv = _find(parent, v)
    ru = _find(parent, u)
    if rv == ru:
        return 0
    bv, bu = best[rv], best[ru]
    if bv >= 0 and bu >= 0:
        val = lw[v] - lw[bv] - lw[bu]
        if val < result[0]:
            result[0] = val
            result[1] = bv
            result[2] = bu
            result[3] = v
    if size[rv] < size[ru]:
        rv, ru = ru, rv
    parent[ru] = rv
    size[rv] += size[ru]
    if bv < 0 or (bu >= 0 and lw[bu] > lw[bv]):
        best[rv] = bu
    else:
        best[rv] = bv
    return 1


@nb.njit(cache=True)
def _join(parent, size, best, lw, v, rv, ru, result):
    """Join root ``ru`` into the component of ``v`` (root ``rv``); return the new root."""
    bv, bu = best[rv], best[ru]
    if bv >= 0 and bu >= 0:
        val = lw[v] - lw[bv] - lw[bu]
        if val < result[0]:
            result[0] = val
            result[1] = bv
            result[2] = bu
            result[3] = v
    if size[rv] < size[ru]:
        rv, ru = ru, rv
    parent[ru] = rv
    size[rv] += size[ru]
    if bv < 0 or (bu >= 0 and lw[bu] > lw[bv]):
        best[rv] = bu
    else:
        best[rv] = bv
    return rv


@nb.njit(cache=True)
def _lattice_sweep(order, lw, dims, strides, candidate):
    # union-find runs in rank space (rank = position in ``order``) so the
    # per-vertex bookkeeping is touched sequentially
    n = order.shape[0]
    D = dims.shape[0]
    rank = np.empty(n, dtype=np.int32)
    lws = np.empty(n)
    for t in range(n):
        rank[order[t]] = t
        lws[t] = lw[order[t]]
    parent = np.arange(n, dtype=np.int32)
    size = np.ones(n, dtype=np.int32)
    best = np.full(n, -1, dtype=np.int32)
    result = np.array([np.inf, -1.0, -1.0, -1.0])
    merges = 0
    for t in range(n):
        v = np.int64(order[t])
        if candidate[v]:
            best[t] = t
        root = t
        rem = v
        for d in range(D):
            coord = rem % dims[d]
            rem //= dims[d]
            for side in range(2):
                if side == 0:
                    if coord == 0:
                        continue
                    r = rank[v - strides[d]]
                else:
                    if coord == dims[d] - 1:
                        continue
                    r = rank[v + strides[d]]
                if r < t:
                    ru = _find(parent, r)
                    if ru != root:
                        root = _join(parent, size, best, lws, t, root, ru, result)
                        merges += 1
    for j in range(1, 4):
        if result[j] >= 0:
            result[j] = order[int(result[j])]
    return result, n - merges


@nb.njit(cache=True)
def _graph_sweep(order, lw, indptr, indices, candidate):
    n = order.shape[0]
    parent = np.arange(n, dtype=np.int32)
    size = np.ones(n, dtype=np.int32)
    best = np.full(n, -1, dtype=np.int32)
    added = np.zeros(n, dtype=np.bool_)
    result = np.array([np.inf, -1.0, -1.0, -1.0])
    merges = 0
    for t in range(n):
        v = order[t]
        added[v] = True
        if candidate[v]:
            best[v] = v
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if u != v and added[u]:
                merges += _merge(parent, size, best, lw, v, u, result)
    return result, n - merges


@dataclass
class BottleneckResult:
    log_d: float
    pair: tuple  # (state index, state index)
    bottleneck: int  # state index of the path-minimum vertex
    mode: str = "full"
    heuristic: bool = False
    pair_states: tuple = ()
    bottleneck_state: object = None

    @property
    def d(self):
        return float(np.exp(self.log_d))

    def to_dict(self):
        return {
            "log_d": self.log_d,
            "d": self.d,
            "pair": [int(x) for x in self.pair],
            "bottleneck": int(self.bottleneck),
            "pair_states": [np.asarray(s).tolist() for s in self.pair_states],
            "bottleneck_state": np.asarray(self.bottleneck_state).tolist(),
            "mode": self.mode,
            "heuristic": self.heuristic,
        }


def _finish(result, n_components, lw, mode):
    if n_components > 1:
        raise StructuralError(f"transition graph has {n_components} components")
    if not np.isfinite(result[0]):
        # a single state: the only pair is (c, c)
        v = int(np.argmax(lw))
        return BottleneckResult(float(-lw[v]), (v, v), v, mode, mode != "full")
    a, b, v = (int(x) for x in result[1:])
    return BottleneckResult(float(result[0]), (a, b), v, mode, mode != "full")


def _candidates(lw, mode, top_k):
    if mode == "full":
        return np.ones(lw.size, dtype=np.bool_)
    if mode != "restricted":
        raise ValueError("mode must be 'full' or 'restricted'")
    cand = np.zeros(lw.size, dtype=np.bool_)
    cand[np.argsort(-lw, kind="stable")[:top_k]] = True
    return cand


def maximin_bottleneck(adjacency, log_weights, mode="full", top_k=32):
    """d = min over pairs of [best path-minimum weight] / (w(c1) w(c2)), in logs.

    Vertices are added in decreasing weight; when a vertex joins two
    components, it is the best achievable path-minimum between every pair
    split across them, so only the heaviest member of each side matters.
    """
    adj = sp.csr_matrix(adjacency)
    adj = (adj + adj.T).tocsr()
    lw = np.asarray(log_weights, dtype=float)
    order = np.argsort(-lw).astype(np.int32)
    result, ncomp = _graph_sweep(order, lw, adj.indptr.astype(np.int64),
                                 adj.indices.astype(np.int64), _candidates(lw, mode, top_k))
    return _finish(result, ncomp, lw, mode)


def bottleneck_d(chain: CollapsedChain, mode="full", top_k=32) -> BottleneckResult:
    """Bottleneck statistic of a collapsed chain on its nearest-neighbour lattice.

    ``mode="restricted"`` limits the outer minimum to the ``top_k`` most
    probable states (a heuristic; flagged in the result).
    """
    lw = chain.log_pi_bar
    order = np.argsort(-lw).astype(np.int32)
    space = chain.space
    result, ncomp = _lattice_sweep(order, lw, space.dims, space.strides,
                                   _candidates(lw, mode, top_k))
    res = _finish(result, ncomp, lw, mode)
    res.pair_states = tuple(space.state(i) for i in res.pair)
    res.bottleneck_state = space.state(res.bottleneck)
    return res
