"""Reversible finite chains: gaps, mixing times, conductance and path bounds.

A :class:`ReversibleChain` carries its transition matrix (dense ``ndarray``
or ``scipy.sparse`` CSR) and its stationary log-probabilities.  Spectral
quantities are computed on the symmetrized operator
``D^{1/2} P D^{-1/2}`` with ``D = diag(pi)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numba as nb
import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree
from scipy.special import expit, logsumexp

from .errors import ContractError, NumericError, ResourceLimitError, StructuralError
from .model import ModelParams, Sequence, log_posterior_from_counts
from .rng import as_generator

__all__ = [
    "ReversibleChain",
    "build_full_chain",
    "spectral_gap",
    "mixing_time_bounds",
    "exact_tv_mixing_time",
    "tv_distance_curve",
    "conductance",
    "conductance_of_set",
    "path_bound_rho",
    "restrict_chain",
    "projection_chain",
    "lazy_power_gap_check",
    "product_chain",
    "two_state_chain",
    "path_chain",
    "random_reversible_chain",
]

FULL_CHAIN_LIMIT = 14
DENSE_LIMIT = 4096  # largest chain for exact TV mixing (dense powers)
DENSE_STORAGE_LIMIT = 1024  # above this, chains are stored sparse for the eigensolver
EXACT_CONDUCTANCE_LIMIT = 24


@dataclass
class ReversibleChain:
    P: object  # ndarray or csr_matrix
    log_pi: np.ndarray
    lazy: bool = False
    verified: bool = False

    @classmethod
    def from_matrix(cls, P, log_pi=None, pi=None, lazy=None, verify=True, rtol=1e-10,
                    row_tol=1e-12):
        """Wrap a transition matrix.

        Without ``log_pi``/``pi`` the stationary law is solved for (dense only).
        ``verify`` checks stochastic rows and detailed balance and raises
        :class:`ContractError` on failure.
        """
        if sp.issparse(P):
            P = sp.csr_matrix(P, dtype=float)
        else:
            P = np.array(P, dtype=float)
        n = P.shape[0]
        if P.shape != (n, n):
            raise ContractError(f"transition matrix must be square, got {P.shape}")
        if log_pi is None:
            if pi is None:
                pi = _stationary(P)
            with np.errstate(divide="ignore"):
                log_pi = np.log(np.asarray(pi, dtype=float))
        log_pi = np.asarray(log_pi, dtype=float)
        log_pi = log_pi - logsumexp(log_pi)
        diag = P.diagonal()
        if lazy is None:
            lazy = bool(np.all(diag >= 0.5 - row_tol))
        chain = cls(P, log_pi, bool(lazy), False)
        if verify:
            chain.verify(rtol=rtol, row_tol=row_tol)
        return chain

    @property
    def n(self):
        return self.log_pi.size

    @property
    def pi(self):
        return np.exp(self.log_pi)

    @property
    def is_sparse(self):
        return sp.issparse(self.P)

    def dense(self):
        return self.P.toarray() if self.is_sparse else self.P

    def flows(self):
        """Q(x, y) = pi(x) P(x, y), same storage as ``P``."""
        if self.is_sparse:
            return sp.diags(self.pi) @ self.P
        return self.pi[:, None] * self.P

    def verify(self, rtol=1e-10, row_tol=1e-12):
        rows = np.asarray(self.P.sum(axis=1)).ravel()
        if np.max(np.abs(rows - 1.0)) > row_tol * max(1, self.n ** 0.5):
            raise ContractError(f"rows not stochastic: max deviation {np.max(np.abs(rows - 1)):.3g}")
        if (self.P.min() if self.is_sparse else self.P.min()) < -row_tol:
            raise ContractError("negative transition probability")
        F = self.flows()
        if self.is_sparse:
            F = sp.csr_matrix(F)
            diff = abs(F - F.T)
            scale = abs(F).maximum(abs(F.T))
            bad = diff - scale * rtol
            worst = bad.max() if bad.nnz else 0.0
        else:
            worst = np.max(np.abs(F - F.T) - rtol * np.maximum(np.abs(F), np.abs(F.T)))
        if worst > 1e-300:
            raise ContractError(f"detailed balance fails (excess {worst:.3g})")
        self.verified = True
        return self

    def symmetrized(self):
        """S = D^{1/2} P D^{-1/2}, symmetrized against round-off."""
        h = 0.5 * self.log_pi
        if self.is_sparse:
            C = self.P.tocoo()
            vals = C.data * np.exp(h[C.row] - h[C.col])
            S = sp.csr_matrix((vals, (C.row, C.col)), shape=C.shape)
            return (0.5 * (S + S.T)).tocsr()
        S = self.P * np.exp(h[:, None] - h[None, :])
        return 0.5 * (S + S.T)

    def to_dict(self):
        return {"n_states": self.n, "lazy": self.lazy, "verified": self.verified,
                "sparse": self.is_sparse}

    def write_triplets(self, path):
        C = sp.coo_matrix(self.P)
        with open(path, "w") as fh:
            fh.write(f"% {C.shape[0]} {C.shape[1]} {C.nnz}\n")
            for r, c, v in zip(C.row, C.col, C.data):
                fh.write(f"{r} {c} {float(v)!r}\n")


def _stationary(P):
    if sp.issparse(P):
        raise ContractError("pass the stationary distribution for sparse chains")
    vals, vecs = la.eig(P.T)
    k = int(np.argmin(np.abs(vals - 1.0)))
    v = np.real(vecs[:, k])
    v = np.abs(v)
    return v / v.sum()


# ---------------------------------------------------------------------------
# constructors

def _all_assignment_log_post(S: Sequence, params: ModelParams):
    n = S.n_blocks
    codes = np.arange(2**n, dtype=np.int64)
    A = ((codes[:, None] >> np.arange(n)) & 1).astype(np.int8)
    blocks = S.blocks - 1
    mc = np.zeros((codes.size, S.w, S.M))
    for k in range(S.w):
        onehot = np.eye(S.M)[blocks[:, k]]
        mc[:, k, :] = A @ onehot
    lp = log_posterior_from_counts(mc, A.sum(axis=1), S.total_counts, n, params)
    return A, lp


def build_full_chain(S: Sequence, params: ModelParams, limit=FULL_CHAIN_LIMIT,
                     dense_limit=DENSE_STORAGE_LIMIT, rtol=1e-10):
    """Lazy random-scan Gibbs kernel T on {0,1}^n_blocks.

    State ``x`` encodes the assignment with bit i = A[i]; off-diagonal moves
    flip one bit with probability ``(1/(2n)) pi(A')/(pi(A) + pi(A'))``.
    """
    n = S.n_blocks
    if n > limit:
        raise ResourceLimitError(
            f"full chain needs n_blocks <= {limit} (enumeration limit), got {n}"
        )
    _, lp = _all_assignment_log_post(S, params)
    N = lp.size
    codes = np.arange(N, dtype=np.int64)
    rows = np.repeat(codes, n)
    cols = (codes[:, None] ^ (np.int64(1) << np.arange(n))).ravel()
    vals = expit(lp[cols] - lp[rows]) / (2.0 * n)
    off = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    diag = 1.0 - np.asarray(off.sum(axis=1)).ravel()
    P = (off + sp.diags(diag)).tocsr()
    if N <= dense_limit:
        P = P.toarray()
    return ReversibleChain.from_matrix(P, log_pi=lp, lazy=True, rtol=rtol)


def two_state_chain(p, q):
    """P = [[1-p, p], [q, 1-q]] with pi = (q, p)/(p+q)."""
    P = np.array([[1.0 - p, p], [q, 1.0 - q]])
    return ReversibleChain.from_matrix(P, pi=np.array([q, p]) / (p + q))


def path_chain(n, move=0.25):
    """Lazy nearest-neighbour walk on a path of n states with uniform pi."""
    P = np.zeros((n, n))
    i = np.arange(n - 1)
    P[i, i + 1] = move
    P[i + 1, i] = move
    P[np.arange(n), np.arange(n)] = 1.0 - P.sum(axis=1)
    return ReversibleChain.from_matrix(P, pi=np.full(n, 1.0 / n))


def random_reversible_chain(n, rng=None, density=0.5, lazy=True):
    """Metropolis chain on a random connected graph with a random target.

    Edge weights are symmetric, a spanning path keeps the graph connected,
    and rows are scaled so the holding probability is at least 1/2 when
    ``lazy``.
    """
    rng = as_generator(rng)
    pi = rng.dirichlet(np.ones(n))
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    W = np.triu(W, 1)
    W = W + W.T
    perm = rng.permutation(n)
    link = 0.1 + rng.random(n - 1)
    W[perm[:-1], perm[1:]] += link
    W[perm[1:], perm[:-1]] += link
    ratio = np.minimum(1.0, pi[None, :] / pi[:, None])
    P = W * ratio
    scale = (0.5 if lazy else 1.0) / P.sum(axis=1).max()
    P *= scale
    P[np.arange(n), np.arange(n)] = 1.0 - P.sum(axis=1)
    return ReversibleChain.from_matrix(P, pi=pi)


def product_chain(components, weights):
    """P = sum_k b_k (I x ... x P_k x ... x I); component 0 is most significant."""
    weights = np.asarray(weights, dtype=float)
    if len(components) != weights.size or np.any(weights <= 0) or abs(weights.sum() - 1) > 1e-12:
        raise ContractError("weights must be positive, sum to 1 and match the components")
    sizes = [c.n for c in components]
    N = int(np.prod(sizes))
    P = np.zeros((N, N))
    for k, (c, b) in enumerate(zip(components, weights)):
        left = int(np.prod(sizes[:k]))
        right = int(np.prod(sizes[k + 1:]))
        P += b * np.kron(np.kron(np.eye(left), c.dense()), np.eye(right))
    log_pi = np.zeros(1)
    for c in components:
        log_pi = (log_pi[:, None] + c.log_pi[None, :]).ravel()
    return ReversibleChain.from_matrix(P, log_pi=log_pi)


def restrict_chain(chain: ReversibleChain, subset):
    """Restriction to ``subset``: moves leaving it are rejected (held)."""
    idx = _as_index(subset, chain.n)
    if idx.size == 0:
        raise ContractError("cannot restrict to an empty subset")
    P = chain.dense()[np.ix_(idx, idx)].copy()
    P[np.arange(idx.size), np.arange(idx.size)] += 1.0 - P.sum(axis=1)
    return ReversibleChain.from_matrix(P, log_pi=chain.log_pi[idx])


def projection_chain(chain: ReversibleChain, labels):
    """Projection matrix of a partition given by integer ``labels``."""
    labels = np.asarray(labels)
    uniq, lab = np.unique(labels, return_inverse=True)
    J = uniq.size
    Z = sp.csr_matrix((np.ones(chain.n), (np.arange(chain.n), lab)), shape=(chain.n, J))
    F = sp.csr_matrix(chain.flows())
    block_flow = (Z.T @ F @ Z).toarray()
    mass = np.asarray(Z.T @ chain.pi).ravel()
    P = block_flow / mass[:, None]
    return ReversibleChain.from_matrix(P, pi=mass)


def _as_index(subset, n):
    subset = np.asarray(subset)
    if subset.dtype == bool:
        if subset.size != n:
            raise ContractError("boolean subset must have one entry per state")
        return np.flatnonzero(subset)
    return np.unique(subset.astype(np.int64))


# ---------------------------------------------------------------------------
# spectra and mixing

def _second_pair(chain: ReversibleChain, vectors=False, rng=None, tol=1e-10, restarts=4):
    n = chain.n
    if n == 1:
        return 0.0, np.zeros(1)
    S = chain.symmetrized()
    if not chain.is_sparse:
        if vectors:
            vals, vecs = la.eigh(S, subset_by_index=[n - 2, n - 1])
            return float(vals[0]), vecs[:, 0]
        vals = la.eigvalsh(S, subset_by_index=[n - 2, n - 1])
        return float(vals[0]), None
    u = np.exp(0.5 * chain.log_pi)
    op = spla.LinearOperator((n, n), matvec=lambda x: S @ x - u * (u @ x), dtype=float)
    rng = as_generator(0 if rng is None else rng)
    last = None
    for _ in range(restarts):
        try:
            vals, vecs = spla.eigsh(op, k=1, which="LA", tol=tol, v0=rng.standard_normal(n),
                                    maxiter=20 * n)
            return float(vals[0]), vecs[:, 0]
        except spla.ArpackNoConvergence as exc:
            last = exc
    raise NumericError(f"sparse eigensolver did not converge after {restarts} restarts: {last}")


def spectral_gap(chain: ReversibleChain, rng=None) -> float:
    """1 - lambda_2 of a reversible chain (dense or sparse path)."""
    if not chain.verified:
        raise ContractError("spectral_gap needs a chain with verified reversibility")
    lam2, _ = _second_pair(chain, rng=rng)
    return 1.0 - lam2


def mixing_time_bounds(gap, min_log_pi, epsilon=0.25):
    """Lower and upper bounds on tau_eps implied by the spectral gap."""
    if not 0 < gap <= 1:
        raise ValueError("gap must lie in (0, 1]")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    upper = (-min_log_pi - np.log(epsilon)) / gap
    lower = 0.5 * (1.0 - gap) / gap * (-np.log(2.0 * epsilon))
    return float(lower), float(upper)


def _worst_tv(Pt, pi):
    return float(0.5 * np.max(np.abs(Pt - pi[None, :]).sum(axis=1)))


def tv_distance_curve(chain: ReversibleChain, t_max):
    """d(t) = max_x ||P^t(x, .) - pi||_TV for t = 0..t_max."""
    P = chain.dense()
    pi = chain.pi
    Pt = np.eye(chain.n)
    out = [_worst_tv(Pt, pi)]
    for _ in range(t_max):
        Pt = Pt @ P
        out.append(_worst_tv(Pt, pi))
    return np.array(out)


def exact_tv_mixing_time(chain: ReversibleChain, epsilon=0.25, max_doublings=40,
                         dense_limit=DENSE_LIMIT):
    """Smallest t with max_x TV(P^t(x, .), pi) <= eps.

    The worst-case distance d(t) is non-increasing in t, so the first
    crossing is the mixing time.  Powers ``P^(2^j)`` are formed by repeated
    squaring until d drops below ``eps``; the crossing is then located by
    binary descent through the stored powers.
    """
    if chain.n > dense_limit:
        raise ResourceLimitError(f"exact TV mixing needs n <= {dense_limit}, got {chain.n}")
    pi = chain.pi
    if _worst_tv(np.eye(chain.n), pi) <= epsilon:
        return 0
    powers = [chain.dense()]
    dists = [_worst_tv(powers[0], pi)]
    while dists[-1] > epsilon:
        if len(powers) > max_doublings:
            raise ResourceLimitError(
                f"TV distance still {dists[-1]:.3g} after 2^{max_doublings} steps",
                partial={"t": 2**max_doublings, "tv": dists[-1]},
            )
        powers.append(powers[-1] @ powers[-1])
        dists.append(_worst_tv(powers[-1], pi))
    if np.any(np.diff(dists) > 1e-12):
        raise NumericError("worst-case TV distance increased along powers")
    k = len(powers) - 1
    if k == 0:
        return 1
    # invariant: d(t) > eps with current = P^t
    t = 2 ** (k - 1)
    current = powers[k - 1]
    for j in range(k - 2, -1, -1):
        cand = current @ powers[j]
        if _worst_tv(cand, pi) > epsilon:
            current = cand
            t += 2**j
    return t + 1


# ---------------------------------------------------------------------------
# conductance

def conductance_of_set(chain: ReversibleChain, subset) -> float:
    """Phi(B) = sum_{x in B} pi(x) P(x, B^c) / (pi(B) pi(B^c))."""
    idx = _as_index(subset, chain.n)
    mask = np.zeros(chain.n, dtype=bool)
    mask[idx] = True
    mass = float(chain.pi[mask].sum())
    if not 0 < mass < 1:
        raise ContractError("subset must have stationary mass strictly between 0 and 1")
    F = sp.csr_matrix(chain.flows())
    flow = float(F[mask][:, ~mask].sum())
    return flow / (mass * (1.0 - mass))


@nb.njit(cache=True)
def _gray_min_conductance(Q, pi):
    # subsets of the first n-1 states; the last state stays outside so each
    # cut is visited once (Phi(B) = Phi(B^c) by reversibility)
    n = pi.shape[0]
    m = n - 1
    inside = np.zeros(n, dtype=np.bool_)
    flow = 0.0
    mass = 0.0
    best = np.inf
    best_code = 0
    code = 0
    for g in range(1, 1 << m):
        j = 0
        while not (g >> j) & 1:
            j += 1
        # toggle state j
        delta = 0.0
        for y in range(n):
            if y != j:
                if inside[y]:
                    delta -= Q[j, y]
                else:
                    delta += Q[j, y]
        if inside[j]:
            inside[j] = False
            flow -= delta
            mass -= pi[j]
        else:
            inside[j] = True
            flow += delta
            mass += pi[j]
        code ^= 1 << j
        if (g & 4095) == 0:
            flow = 0.0
            mass = 0.0
            for x in range(n):
                if inside[x]:
                    mass += pi[x]
                    for y in range(n):
                        if not inside[y]:
                            flow += Q[x, y]
        val = flow / (mass * (1.0 - mass))
        if val < best:
            best = val
            best_code = code
    return best, best_code


def _sweep_cut(chain: ReversibleChain, rng=None):
    _, vec = _second_pair(chain, vectors=True, rng=rng)
    score = vec * np.exp(-0.5 * chain.log_pi)
    order = np.argsort(score, kind="stable")
    rank = np.empty(chain.n, dtype=np.int64)
    rank[order] = np.arange(chain.n)
    F = sp.coo_matrix(chain.flows())
    keep = F.row != F.col
    rx, ry, q = rank[F.row[keep]], rank[F.col[keep]], F.data[keep]
    fwd = rx < ry
    # prefix B_t (first t states in sweep order) is crossed by x->y when rx < t <= ry
    diff = np.zeros(chain.n + 1)
    np.add.at(diff, rx[fwd] + 1, q[fwd])
    np.add.at(diff, ry[fwd] + 1, -q[fwd])
    cut = np.cumsum(diff)[1:chain.n]
    mass = np.cumsum(chain.pi[order])[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = cut / (mass * (1.0 - mass))
    phi[~np.isfinite(phi)] = np.inf
    t = int(np.argmin(phi))
    return float(phi[t]), np.sort(order[: t + 1])


@dataclass
class ConductanceResult:
    phi: float
    subset: np.ndarray
    mode: str

    @property
    def heuristic(self):
        return self.mode != "exact"

    def to_dict(self):
        return {"phi": self.phi, "subset": self.subset.tolist(), "mode": self.mode,
                "heuristic": self.heuristic}


def conductance(chain: ReversibleChain, mode="auto", rng=None, check=True) -> ConductanceResult:
    """Conductance by exhaustive cuts (``n <= 24``) or eigenvector sweep cuts.

    The sweep-cut value is an upper bound on the true conductance.  In exact
    mode ``Gap <= 2 Phi`` is checked and a violation raises
    :class:`NumericError`.
    """
    n = chain.n
    if mode == "auto":
        mode = "exact" if n <= EXACT_CONDUCTANCE_LIMIT else "heuristic"
    if n < 2:
        raise ContractError("conductance needs at least two states")
    if mode == "exact":
        if n > EXACT_CONDUCTANCE_LIMIT:
            raise ResourceLimitError(
                f"exact conductance enumerates 2^(n-1) cuts; limit n <= {EXACT_CONDUCTANCE_LIMIT}"
            )
        Q = np.asarray(chain.pi[:, None] * chain.dense())
        _, code = _gray_min_conductance(Q, chain.pi)
        subset = np.flatnonzero((code >> np.arange(n)) & 1)
        phi = conductance_of_set(chain, subset)
        if check and spectral_gap(chain) > 2 * phi + 1e-10:
            raise NumericError("gap exceeds twice the conductance")
        return ConductanceResult(phi, subset, "exact")
    if mode == "heuristic":
        phi, subset = _sweep_cut(chain, rng=rng)
        return ConductanceResult(phi, subset, "heuristic")
    raise ValueError("mode must be 'auto', 'exact' or 'heuristic'")


# ---------------------------------------------------------------------------
# canonical paths

def _graph(chain):
    A = sp.csr_matrix(chain.P, copy=True)
    A.setdiag(0)
    A.eliminate_zeros()
    A = ((A + A.T) > 0).astype(np.int8).tocsr()
    ncomp, _ = connected_components(A, directed=False)
    if ncomp > 1:
        raise StructuralError(f"transition graph has {ncomp} components")
    return A


def _bottleneck_tree(chain, A):
    """Maximum spanning tree under edge weight min(pi(u), pi(v))."""
    C = A.tocoo()
    lp = chain.log_pi
    w = np.minimum(lp[C.row], lp[C.col])
    # minimum spanning tree of a positive decreasing transform
    cost = (lp.max() - w) + 1.0
    T = minimum_spanning_tree(sp.csr_matrix((cost, (C.row, C.col)), shape=A.shape))
    T = ((T + T.T) > 0).astype(np.int8).tocsr()
    return T


def _bfs(indptr, indices, src, n):
    parent = np.full(n, -1, dtype=np.int64)
    depth = np.zeros(n, dtype=np.int64)
    order = [src]
    parent[src] = src
    q = deque([src])
    while q:
        x = q.popleft()
        for y in indices[indptr[x]:indptr[x + 1]]:
            if parent[y] < 0:
                parent[y] = x
                depth[y] = depth[x] + 1
                order.append(y)
                q.append(y)
    return np.array(order), parent, depth


@dataclass
class PathBoundResult:
    rho: float
    edge: tuple
    path_choice: str
    gap_lower: float

    def to_dict(self):
        return {"rho": self.rho, "edge": [int(e) for e in self.edge],
                "path_choice": self.path_choice, "gap_lower_bound": self.gap_lower}


def path_bound_rho(chain: ReversibleChain, path_choice="bottleneck", check=True,
                   directed=False) -> PathBoundResult:
    """Canonical-path congestion rho; Gap >= 1/rho.

    Paths: ``"bottleneck"`` uses the unique path in the maximum spanning tree
    under vertex-minimum weights; ``"shortest"`` uses each source's BFS tree.
    By default the load of an edge counts every ordered pair whose path
    crosses it in either direction; ``directed=True`` separates directions.
    """
    A = _graph(chain)
    n = chain.n
    if path_choice == "bottleneck":
        G = _bottleneck_tree(chain, A)
    elif path_choice == "shortest":
        G = A
    else:
        raise ValueError("path_choice must be 'bottleneck' or 'shortest'")
    pi = chain.pi
    load = {}
    for x in range(n):
        order, parent, depth = _bfs(G.indptr, G.indices, x, n)
        # sum of pi(y) * len(path x->y) over each subtree
        acc = pi * depth
        for y in order[:0:-1]:
            acc[parent[y]] += acc[y]
        for y in order[1:]:
            key = (int(parent[y]), int(y))
            load[key] = load.get(key, 0.0) + pi[x] * acc[y]
    Pd = sp.csr_matrix(chain.P)
    best, best_edge = 0.0, (0, 0)
    seen = set()
    for (z, v), val in load.items():
        if directed:
            total = val
        else:
            key = (min(z, v), max(z, v))
            if key in seen:
                continue
            seen.add(key)
            total = load.get((z, v), 0.0) + load.get((v, z), 0.0)
        q = pi[z] * Pd[z, v]
        r = total / q
        if r > best:
            best, best_edge = r, (z, v)
    res = PathBoundResult(float(best), best_edge, path_choice, 1.0 / best if best > 0 else np.inf)
    if check and n > 1 and spectral_gap(chain) < res.gap_lower - 1e-10:
        raise NumericError("gap is below the canonical-path lower bound")
    return res


def lazy_power_gap_check(chain: ReversibleChain, N=2):
    """Compare Gap(P) with Gap(P^N)/N."""
    P = chain.dense()
    PN = np.linalg.matrix_power(P, N)
    chain_N = ReversibleChain.from_matrix(PN, log_pi=chain.log_pi, lazy=chain.lazy)
    g = spectral_gap(chain)
    gN = spectral_gap(chain_N)
    slack = g - gN / N
    return {"N": N, "gap": g, "gap_power": gN, "slack": slack, "holds": slack >= -1e-10}
