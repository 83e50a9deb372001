import csv
import math

import numpy as np
import pytest

from motifgibbs.datagen import GenerativeModel, deterministic_model, generative_pmf_all
from motifgibbs.errors import DimensionError
from motifgibbs.landscape import (
    LandscapeGrid,
    constant_words,
    eta,
    export_slice,
    find_local_maxima,
    kl_divergence,
    log_density_all,
    multimodality_threshold,
)
from motifgibbs.model import all_words, marginal_block_density
from motifgibbs.rng import stream

UNIFORM4 = np.full(4, 0.25)


def test_log_density_matches_marginal(rng):
    theta = rng.dirichlet(np.ones(3), size=4)
    logf = log_density_all(theta, 0.2, 3, 3)
    for s, lf in zip(all_words(3, 3), logf):
        assert math.exp(lf) == pytest.approx(marginal_block_density(s, theta, 0.2), rel=1e-13)


def test_log_density_batched(rng):
    thetas = rng.dirichlet(np.ones(2), size=(5, 3))
    batch = log_density_all(thetas, 0.3, 2, 2)
    for i in range(5):
        assert np.allclose(batch[i], log_density_all(thetas[i], 0.3, 2, 2))


def test_eta_maximized_by_truth():
    gen = GenerativeModel([0.2], np.array([[[0.7, 0.3], [0.1, 0.9], [0.5, 0.5]]]), [0.6, 0.4])
    truth = np.vstack([gen.background, gen.motif_matrices[0]])
    g = generative_pmf_all(gen)
    entropy = math.fsum(g * np.log(g))
    assert eta(truth, gen) == pytest.approx(entropy, abs=1e-13)
    assert kl_divergence(gen, truth) == pytest.approx(0.0, abs=1e-13)
    r = np.random.default_rng(0)
    for _ in range(20):
        other = r.dirichlet(np.ones(2), size=4)
        assert eta(other, gen) <= entropy
        assert kl_divergence(gen, other) >= 0


def test_eta_minus_infinity_on_vanishing_density():
    gen = deterministic_model([[1, 1]], [0.5], [0.5, 0.5])
    theta = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    assert eta(theta, gen, p0=0.5) == -math.inf
    assert kl_divergence(gen, theta, p0=0.5) == math.inf


def test_grid_roundtrip(rng):
    grid = LandscapeGrid(3, 4, 20)
    for _ in range(10):
        c = grid.random_counts(rng)
        assert (c.sum(axis=1) == 20).all()
        theta = grid.theta(c)
        assert np.allclose(theta.sum(axis=1), 1)
        assert theta.min() >= grid.delta
        assert (grid.project(theta) == c).all()
    p = grid.project(rng.dirichlet(np.ones(4), size=4))
    assert (p.sum(axis=1) == 20).all() and p.min() >= 0


def test_grid_moves():
    moves = LandscapeGrid(1, 3).moves()
    assert len(moves) == 2 * 3 * 2
    assert moves[0] == (0, 0, 1)


def test_single_motif_single_mode():
    gen = GenerativeModel([0.3], np.array([[[0.8, 0.2], [0.2, 0.8]]]), [0.5, 0.5])
    res = find_local_maxima(gen, resolution=10, n_random=8, seed=1)
    assert res.n_modes == 1
    best = res.modes[0]
    truth = np.vstack([gen.background, gen.motif_matrices[0]])
    assert kl_divergence(gen, best.theta) < kl_divergence(gen, np.full((3, 2), 0.5))
    assert np.max(np.abs(best.theta - truth)) <= 0.2


def test_modes_are_grid_local_maxima():
    gen = deterministic_model([[1, 1, 1], [2, 2, 2]], [0.05, 0.05], [0.5, 0.5])
    res = find_local_maxima(gen, resolution=10, p0=0.01, n_random=5, seed=2)
    grid = res.grid
    for m in res.modes:
        for k, a, b in grid.moves():
            if m.counts[k, a] == 0:
                continue
            c = m.counts.copy()
            c[k, a] -= 1
            c[k, b] += 1
            assert eta(grid.theta(c), gen, p0=0.01) <= m.eta + 1e-12


def test_two_deterministic_motifs_give_two_modes():
    gen = deterministic_model([[1, 1, 1, 1, 1], [2, 2, 2, 2, 2]], [0.005, 0.001], UNIFORM4)
    res = find_local_maxima(gen, resolution=20, p0=0.001, n_random=4, seed=0)
    assert res.n_modes >= 2
    assert all(c["separated"] for c in res.certificates)
    d = res.to_dict()
    assert d["n_modes"] == res.n_modes and "heuristic" in d["certificate_kind"]


def test_constant_words():
    assert constant_words(2, 3).tolist() == [[1, 1, 1], [2, 2, 2]]


def test_multimodality_threshold_reports_counts():
    w_star, counts = multimodality_threshold(2, 2, 0.05, [1, 2], resolution=6, n_random=2, p0=0.01)
    assert set(counts) == {1, 2}
    assert w_star is None or w_star in counts


def test_export_slice(tmp_path):
    gen = deterministic_model([[1, 1]], [0.1], [0.5, 0.5])
    base = np.full((3, 2), 0.5)
    export_slice(tmp_path / "s.csv", gen, base, (1, 0), (2, 0), n_points=5)
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["theta_1_1", "theta_2_1", "eta"]
    assert len(rows) == 26
    vals = np.array([float(r[2]) for r in rows[1:]])
    assert np.isfinite(vals).all()
    with pytest.raises(DimensionError):
        export_slice(tmp_path / "t.csv", gen, base, (1, 0), (1, 1))


def test_results_reproducible():
    gen = deterministic_model([[1, 2], [2, 1]], [0.1, 0.1], [0.5, 0.5])
    a = find_local_maxima(gen, resolution=8, n_random=5, seed=stream(3))
    b = find_local_maxima(gen, resolution=8, n_random=5, seed=stream(3))
    assert a.to_dict() == b.to_dict()


def test_uniform_theta_eta():
    gen = deterministic_model([[1, 2, 3]], [0.1], UNIFORM4)
    assert eta(np.full((4, 4), 0.25), gen) == pytest.approx(-3 * math.log(4), abs=1e-13)


def test_kl_identity_and_sign():
    gen = deterministic_model([[1, 4, 2], [4, 2, 4]], [0.05, 0.02], UNIFORM4)
    g = generative_pmf_all(gen)
    neg_entropy = math.fsum(g[g > 0] * np.log(g[g > 0]))
    r = np.random.default_rng(1)
    for _ in range(1000):
        theta = r.dirichlet(np.ones(4), size=4)
        kl = kl_divergence(gen, theta)
        assert kl >= -1e-12
        assert abs(kl - (neg_entropy - eta(theta, gen))) < 1e-12


def test_example_motif_is_grid_local_maximum():
    gen = deterministic_model([[1, 4, 2, 2, 3], [4, 2, 4, 1, 3]], [0.005, 0.001], UNIFORM4)
    grid = LandscapeGrid(5, 4, 20)
    c = grid.project(np.vstack([gen.background, gen.motif_matrices[0]]))
    top = eta(grid.theta(c), gen)
    for k, a, b in grid.moves():
        if c[k, a]:
            d = c.copy()
            d[k, a] -= 1
            d[k, b] += 1
            assert eta(grid.theta(d), gen) < top


def test_single_stochastic_motif_gives_one_mode():
    gen = GenerativeModel([0.2], np.array([[[0.9, 0.1], [0.3, 0.7]]]), [0.5, 0.5])
    assert find_local_maxima(gen, resolution=20, n_random=10, seed=0).n_modes == 1


def test_constant_word_motifs_separate():
    gen = deterministic_model([[1, 1, 1, 1], [2, 2, 2, 2]], [0.01, 0.01], [0.5, 0.5])
    res = find_local_maxima(gen, resolution=20, n_random=10, seed=0)
    assert res.n_modes >= 2 and all(c["separated"] for c in res.certificates)
    for j in range(2):
        target = np.vstack([gen.background, gen.motif_matrices[j]])
        assert min(np.max(np.abs(m.theta - target)) for m in res.modes) <= 0.2


def test_modes_invariant_under_symbol_swap():
    a = deterministic_model([[1, 1, 1, 1], [2, 2, 2, 2]], [0.01, 0.02], [0.5, 0.5])
    b = deterministic_model([[2, 2, 2, 2], [1, 1, 1, 1]], [0.01, 0.02], [0.5, 0.5])
    ea = sorted(m.eta for m in find_local_maxima(a, resolution=16, n_random=0).modes)
    eb = sorted(m.eta for m in find_local_maxima(b, resolution=16, n_random=0).modes)
    assert np.allclose(ea, eb, atol=1e-8, rtol=0)


def test_weak_mode_does_not_chain_merges():
    # mirrored modes of a symmetric model stay apart even with many random starts
    gen = deterministic_model([[1, 1], [2, 2]], [0.05, 0.05], [0.5, 0.5])
    res = find_local_maxima(gen, resolution=40, n_random=20, seed=0)
    assert res.n_modes == 2
    assert res.modes[0].eta == pytest.approx(res.modes[1].eta, abs=1e-12)
