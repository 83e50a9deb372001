"""Expected log model density eta(theta) under a generative law, and a grid
scan for its local maxima.

theta has shape ``(w+1, M)`` with row 0 the background.  The grid keeps every
entry at least ``delta`` away from zero: a row with integer composition
``n`` (summing to the resolution ``R``) maps to ``delta + (1 - M delta) n/R``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .datagen import GenerativeModel, deterministic_model, generative_pmf_all
from .errors import DimensionError
from .model import all_words, check_theta
from .rng import as_generator

__all__ = [
    "LandscapeGrid",
    "Mode",
    "eta",
    "kl_divergence",
    "log_density_all",
    "find_local_maxima",
    "multimodality_threshold",
    "export_slice",
]

DELTA = 1e-4


def log_density_all(theta, p0, w, M, words=None):
    """log f(s|theta) for all words (or the given 0-based ``words``).

    ``theta`` may carry leading batch dimensions ``(..., w+1, M)``.
    """
    theta = np.asarray(theta, dtype=float)
    if words is None:
        words = all_words(w, M) - 1
    with np.errstate(divide="ignore"):
        logt = np.log(theta)
    ks = np.arange(w)
    motif = logt[..., ks + 1, :][..., ks, words].sum(axis=-1)
    background = logt[..., 0, :][..., words].sum(axis=-1)
    return np.logaddexp(np.log(p0) + motif, np.log1p(-p0) + background)


def _default_p0(gen, p0):
    return float(gen.p.sum()) if p0 is None else float(p0)


def eta(theta, gen: GenerativeModel, p0=None) -> float:
    """sum_s g(s) log f(s|theta), by exhaustive word sum.

    Returns ``-inf`` when f vanishes on a word with positive g mass.
    """
    theta = check_theta(theta, gen.w, gen.M)
    g = generative_pmf_all(gen)
    logf = log_density_all(theta, _default_p0(gen, p0), gen.w, gen.M)
    mask = g > 0
    if np.any(np.isneginf(logf[mask])):
        return -math.inf
    return math.fsum(g[mask] * logf[mask])


def kl_divergence(gen: GenerativeModel, theta, p0=None) -> float:
    """sum_s g(s) log(g(s)/f(s|theta)) >= 0."""
    theta = check_theta(theta, gen.w, gen.M)
    g = generative_pmf_all(gen)
    logf = log_density_all(theta, _default_p0(gen, p0), gen.w, gen.M)
    mask = g > 0
    if np.any(np.isneginf(logf[mask])):
        return math.inf
    return math.fsum(g[mask] * (np.log(g[mask]) - logf[mask]))


@dataclass(frozen=True)
class LandscapeGrid:
    w: int
    M: int
    resolution: int = 20
    delta: float = DELTA

    def theta(self, counts):
        counts = np.asarray(counts, dtype=float)
        return self.delta + (1.0 - self.M * self.delta) * counts / self.resolution

    def project(self, theta):
        """Nearest grid counts (largest-remainder rounding per row)."""
        theta = np.asarray(theta, dtype=float)
        x = (theta - self.delta) / (1.0 - self.M * self.delta) * self.resolution
        x = np.clip(x, 0, None)
        x = x / x.sum(axis=1, keepdims=True) * self.resolution
        base = np.floor(x).astype(np.int64)
        for k in range(base.shape[0]):
            short = self.resolution - base[k].sum()
            order = np.lexsort((np.arange(self.M), -(x[k] - base[k])))
            base[k, order[:short]] += 1
        return base

    def random_counts(self, rng):
        out = np.empty((self.w + 1, self.M), dtype=np.int64)
        for k in range(self.w + 1):
            cuts = np.sort(rng.integers(0, self.resolution + 1, size=self.M - 1))
            out[k] = np.diff(np.concatenate([[0], cuts, [self.resolution]]))
        return out

    def moves(self):
        """(row, from, to) unit moves in lexicographic order."""
        return [
            (k, a, b)
            for k in range(self.w + 1)
            for a in range(self.M)
            for b in range(self.M)
            if a != b
        ]


@dataclass
class Mode:
    counts: np.ndarray
    theta: np.ndarray
    eta: float
    starts: list = field(default_factory=list)

    def to_dict(self):
        return {"theta": self.theta.tolist(), "counts": self.counts.tolist(), "eta": self.eta,
                "starts": self.starts}


@dataclass
class LandscapeResult:
    modes: list
    certificates: list  # dicts per mode pair
    grid: LandscapeGrid
    raw_modes: int

    @property
    def n_modes(self):
        return len(self.modes)

    def to_dict(self):
        return {
            "n_modes": self.n_modes,
            "raw_modes": self.raw_modes,
            "resolution": self.grid.resolution,
            "delta": self.grid.delta,
            "modes": [m.to_dict() for m in self.modes],
            "certificates": self.certificates,
            "certificate_kind": "heuristic: sampled midpoint hyperplane",
        }


class _Evaluator:
    def __init__(self, gen, p0, grid):
        self.g = generative_pmf_all(gen)
        keep = self.g > 0
        self.words = (all_words(gen.w, gen.M) - 1)[keep]
        self.g = self.g[keep]
        self.p0 = p0
        self.grid = grid

    def batch(self, thetas):
        logf = log_density_all(thetas, self.p0, self.grid.w, self.grid.M, self.words)
        return logf @ self.g

    def exact(self, theta):
        logf = log_density_all(theta, self.p0, self.grid.w, self.grid.M, self.words)
        return math.fsum(self.g * logf)


def _climb(ev: _Evaluator, counts, moves, max_steps):
    grid = ev.grid
    counts = counts.copy()
    value = ev.exact(grid.theta(counts))
    for _ in range(max_steps):
        cand = []
        for k, a, b in moves:
            if counts[k, a] > 0:
                c = counts.copy()
                c[k, a] -= 1
                c[k, b] += 1
                cand.append(c)
        cand = np.array(cand)
        vals = ev.batch(grid.theta(cand))
        j = int(np.argmax(vals))  # first maximum = lexicographic tie-break
        if vals[j] <= value + 1e-13 * abs(value):
            break
        exact = ev.exact(grid.theta(cand[j]))
        if exact <= value:
            break
        counts, value = cand[j], exact
    return counts, value


def _hyperplane_max(ev, ta, tb, n_samples, rng, delta):
    """Max eta over random points of the bisecting hyperplane of ta, tb."""
    mid = 0.5 * (ta + tb)
    d = (tb - ta).ravel()
    d /= np.linalg.norm(d)
    pts = [mid]
    for _ in range(n_samples - 1):
        v = rng.standard_normal(mid.shape)
        v -= v.mean(axis=1, keepdims=True)  # stay on the simplex rows
        v = v.ravel()
        v -= (v @ d) * d
        v = v.reshape(mid.shape)
        v -= v.mean(axis=1, keepdims=True)
        neg = v < 0
        if not neg.any():
            continue
        t_max = np.min((mid[neg] - delta) / -v[neg])
        pts.append(mid + rng.random() * t_max * v)
    pts = np.array(pts)
    vals = ev.batch(pts)
    j = int(np.argmax(vals))
    return float(vals[j]), pts[j]


def find_local_maxima(gen: GenerativeModel, resolution=20, p0=None, n_random=20, seed=0,
                      delta=DELTA, merge_radius=2, certificate_samples=1000, max_steps=10_000,
                      extra_starts=(), tol=1e-9, equiv_tol=1e-6):
    """Hill-climb eta on the grid from the true-motif starts and random starts.

    Starts: each ``(theta_0*, theta^{j*})`` projected to the grid, any
    ``extra_starts``, then ``n_random`` uniform grid points.  Modes within
    ``merge_radius`` cells (sup norm) are merged, as are modes inducing the
    same density f (symmetric KL at most ``equiv_tol``), since eta depends
    on theta only through f.  Remaining pairs whose bisecting hyperplane
    contains a sampled point with eta at least the lower mode value are
    merged as well, the worse mode joining the better one.  Surviving modes
    are sorted by eta.
    """
    grid = LandscapeGrid(gen.w, gen.M, int(resolution), delta)
    ev = _Evaluator(gen, _default_p0(gen, p0), grid)
    rng = as_generator(seed)
    starts = []
    for j in range(gen.J):
        starts.append(("motif", j + 1, np.vstack([gen.background, gen.motif_matrices[j]])))
    for i, th in enumerate(extra_starts):
        starts.append(("extra", i, np.asarray(th, dtype=float)))
    moves = grid.moves()
    found = []
    for kind, label, th in starts:
        c, v = _climb(ev, grid.project(th), moves, max_steps)
        found.append((c, v, f"{kind}:{label}"))
    for r in range(n_random):
        c, v = _climb(ev, grid.random_counts(rng), moves, max_steps)
        found.append((c, v, f"random:{r}"))
    raw = len(found)

    # merge by grid distance, best first
    found.sort(key=lambda x: -x[1])
    modes = []
    for c, v, tag in found:
        for m in modes:
            if np.max(np.abs(m.counts - c)) <= merge_radius:
                m.starts.append(tag)
                break
        else:
            modes.append(Mode(c, grid.theta(c), v, [tag]))

    # separation certificates, best mode first: a mode that induces the same
    # density as a better survivor, or is not separated from it, is absorbed
    # into that survivor; merges never chain two survivors together
    survivors, certs, logf = [], [], []
    for m in modes:
        lf = log_density_all(m.theta, ev.p0, grid.w, grid.M)
        pending = []
        absorbed = False
        for k, (s, ls) in enumerate(zip(survivors, logf)):
            sym_kl = float(np.sum((np.exp(lf) - np.exp(ls)) * (lf - ls)))
            if sym_kl <= equiv_tol:
                absorbed = True
            else:
                peak, _ = _hyperplane_max(ev, s.theta, m.theta, certificate_samples, rng, delta)
                floor = min(s.eta, m.eta)
                absorbed = not peak < floor - tol
                pending.append({"pair": [k, len(survivors)], "surface_max": peak,
                                "mode_min": floor, "separated": not absorbed})
            if absorbed:
                s.starts.extend(m.starts)
                break
        if not absorbed:
            survivors.append(m)
            logf.append(lf)
            certs.extend(pending)
    return LandscapeResult(survivors, certs, grid, raw)


def constant_words(J, w):
    """Motif j is the word (j, j, ..., j)."""
    return np.repeat(np.arange(1, J + 1)[:, None], w, axis=1)


def multimodality_threshold(J, M, p, w_values, words_for_w=constant_words, background=None,
                            **kwargs):
    """Smallest w in ``w_values`` at which at least J separated modes are found.

    Motifs are deterministic words from ``words_for_w(J, w)``.  Returns
    ``(w_star or None, {w: n_modes})``; this is an empirical probe only.
    """
    if background is None:
        background = np.full(M, 1.0 / M)
    counts = {}
    w_star = None
    for w in w_values:
        gen = deterministic_model(words_for_w(J, w), np.broadcast_to(p, (J,)), background)
        res = find_local_maxima(gen, **kwargs)
        counts[int(w)] = res.n_modes
        if w_star is None and res.n_modes >= J:
            w_star = int(w)
    return w_star, counts


def export_slice(path, gen: GenerativeModel, base_theta, coord_x, coord_y, n_points=41,
                 p0=None, delta=DELTA):
    """CSV of eta over a 2-D slice.

    ``coord_x`` and ``coord_y`` are ``(row, symbol)`` pairs (0-based).  Along
    each, the entry sweeps ``[delta, 1 - delta]`` and the rest of its row is
    rescaled to keep the row on the simplex; the two coordinates must lie in
    different rows.
    """
    base = check_theta(base_theta, gen.w, gen.M).copy()
    (kx, mx), (ky, my) = coord_x, coord_y
    if kx == ky:
        raise DimensionError("slice coordinates must lie in different rows")
    p0 = _default_p0(gen, p0)
    grid = np.linspace(delta, 1 - delta, n_points)

    def set_entry(th, k, m, value):
        rest = np.delete(np.arange(gen.M), m)
        other = th[k, rest]
        other = other / other.sum() if other.sum() > 0 else np.full(rest.size, 1.0 / rest.size)
        th[k, rest] = (1 - value) * other
        th[k, m] = value

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"theta_{kx}_{mx + 1}", f"theta_{ky}_{my + 1}", "eta"])
        for x in grid:
            for y in grid:
                th = base.copy()
                set_entry(th, kx, mx, x)
                set_entry(th, ky, my, y)
                writer.writerow([repr(float(x)), repr(float(y)), repr(eta(th, gen, p0))])
