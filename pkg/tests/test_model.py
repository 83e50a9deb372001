import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import enumerate_posterior, naive_counts, naive_log_post, random_instance
from motifgibbs.collapsed import collapse
from motifgibbs.errors import DimensionError, DomainError
from motifgibbs.model import (
    ModelParams,
    Sequence,
    all_words,
    conditional_lower_bounds,
    conditional_odds,
    conditional_prob_one,
    count_vectors,
    log_conditional_odds,
    log_likelihood_given_theta,
    log_posterior_unnorm,
    marginal_block_density,
    posterior_mean_estimates,
    word_from_index,
    word_index,
)


def test_sequence_validation():
    with pytest.raises(DimensionError):
        Sequence([1, 2, 1], 2, 2)
    with pytest.raises(DomainError):
        Sequence([1, 3], 2, 2)
    S = Sequence([1, 2, 2, 1], 2, 2)
    assert S.L == 4 and S.n_blocks == 2
    assert S.blocks.tolist() == [[1, 2], [2, 1]]
    with pytest.raises(ValueError):
        S.symbols[0] = 2


def test_tail_truncated_with_warning():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        S = Sequence.from_symbols([1, 2, 1, 2, 1], 2, 2)
    assert S.L == 4
    assert any("dropping" in str(c.message) for c in caught)


def test_params_validation():
    with pytest.raises(DomainError):
        ModelParams(0.0, np.ones((2, 2)))
    with pytest.raises(DomainError):
        ModelParams(1.0, np.ones((2, 2)))
    with pytest.raises(DomainError):
        ModelParams(0.5, np.zeros((2, 2)))


def test_word_index_roundtrip():
    for w, M in [(1, 2), (3, 2), (2, 4)]:
        words = all_words(w, M)
        idx = word_index(words, M)
        assert idx.tolist() == list(range(M**w))
        assert all(tuple(words[i]) == word_from_index(i, w, M) for i in range(M**w))


def test_counts_no_motif():
    S = Sequence(np.tile([1, 4, 2, 2, 3], 6), 5, 4)
    cv = count_vectors(S, np.zeros(6))
    assert not cv.motif_counts.any()
    assert cv.background_counts.tolist() == cv.total_counts.tolist()


def test_counts_single_motif_block():
    S = Sequence([1, 4, 2, 2, 3], 5, 4)
    cv = count_vectors(S, [1])
    expected = np.zeros((5, 4), dtype=int)
    for k, s in enumerate([1, 4, 2, 2, 3]):
        expected[k, s - 1] = 1
    assert (cv.motif_counts == expected).all()
    assert not cv.background_counts.any()


def test_counts_match_naive_tally(rng):
    for _ in range(20):
        symbols = rng.integers(1, 3, size=24)
        A = rng.integers(0, 2, size=12)
        S = Sequence(symbols, 2, 2)
        cv = count_vectors(S, A)
        motif, background, total = naive_counts(symbols.tolist(), 2, 2, A.tolist())
        assert cv.motif_counts.tolist() == motif
        assert cv.background_counts.tolist() == background
        assert cv.total_counts.tolist() == total


def test_counts_length_mismatch():
    S = Sequence([1, 2, 1, 2], 2, 2)
    with pytest.raises(DimensionError):
        count_vectors(S, [1, 0, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(2, 4), st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_count_vector_invariants(w, M, n, seed):
    r = np.random.default_rng(seed)
    S = Sequence(r.integers(1, M + 1, size=n * w), w, M)
    A = r.integers(0, 2, size=n)
    cv = count_vectors(S, A)
    assert (cv.motif_counts.sum(axis=1) == A.sum()).all()
    assert (cv.background_counts >= 0).all()
    assert (cv.background_counts == cv.total_counts - cv.motif_counts.sum(axis=0)).all()
    assert cv.total_counts.sum() == S.L


def test_likelihood_uniform_background():
    S = Sequence(np.tile([1, 2, 3, 4], 3), 2, 4)
    theta = np.full((3, 4), 0.25)
    assert log_likelihood_given_theta(S, np.zeros(6), theta) == pytest.approx(-12 * math.log(4))


def test_likelihood_deterministic_motif():
    S = Sequence([2, 1], 2, 2)
    theta = np.array([[0.5, 0.5], [0.0, 1.0], [1.0, 0.0]])
    assert log_likelihood_given_theta(S, [1], theta) == 0.0
    assert log_likelihood_given_theta(Sequence([1, 1], 2, 2), [1], theta) == -math.inf


def test_likelihood_matches_positionwise_loop(rng):
    for _ in range(10):
        S, _ = random_instance(rng, M=3)
        A = rng.integers(0, 2, size=S.n_blocks)
        theta = rng.dirichlet(np.ones(3), size=S.w + 1)
        direct = 0.0
        for pos, s in enumerate(S.symbols):
            i, k = divmod(pos, S.w)
            direct += math.log(theta[k + 1 if A[i] else 0, s - 1])
        assert log_likelihood_given_theta(S, A, theta) == pytest.approx(direct, rel=1e-12)


def test_posterior_matches_naive_formula(rng):
    for _ in range(30):
        S, params = random_instance(rng)
        A = rng.integers(0, 2, size=S.n_blocks)
        expected = naive_log_post(S.symbols.tolist(), S.w, S.M, A.tolist(), params.p0,
                                  params.beta.tolist())
        assert log_posterior_unnorm(S, A, params) == pytest.approx(expected, abs=1e-10)


def test_posterior_depends_on_word_counts_only(rng):
    for _ in range(20):
        S, params = random_instance(rng, min_blocks=4)
        A = rng.integers(0, 2, size=S.n_blocks)
        # permute motif flags among blocks carrying the same word
        B = A.copy()
        words = S.word_indices
        for word in np.unique(words):
            idx = np.flatnonzero(words == word)
            B[idx] = rng.permutation(A[idx])
        assert (collapse(S, A).counts == collapse(S, B).counts).all()
        assert abs(log_posterior_unnorm(S, A, params) - log_posterior_unnorm(S, B, params)) < 1e-10


def test_posterior_normalizes_by_enumeration(rng):
    S, params = random_instance(rng, max_blocks=12, min_blocks=12, w=1)
    As, p = enumerate_posterior(S, params)
    lp = np.array([log_posterior_unnorm(S, A, params) for A in As])
    q = np.exp(lp - lp.max())
    q /= q.sum()
    assert abs(q.sum() - 1) < 1e-10
    assert np.max(np.abs(q - p)) < 1e-10


def test_exchangeable_blocks_constant_sequence():
    S = Sequence(np.ones(6, dtype=int), 1, 2)
    params = ModelParams.uniform(1, 2, 0.3)
    by_size = {}
    for code in range(64):
        A = [(code >> i) & 1 for i in range(6)]
        by_size.setdefault(sum(A), []).append(log_posterior_unnorm(S, A, params))
    for vals in by_size.values():
        assert np.ptp(vals) < 1e-12


def test_marginal_density_uniform():
    theta = np.full((4, 2), 0.5)
    assert marginal_block_density([1, 2, 1], theta, 0.3) == pytest.approx(2.0**-3, rel=1e-14)


def test_marginal_density_sums_to_one(rng):
    for w, M in [(1, 4), (3, 2), (2, 3)]:
        theta = rng.dirichlet(np.ones(M), size=w + 1)
        p0 = rng.uniform()
        total = sum(marginal_block_density(s, theta, p0) for s in all_words(w, M))
        assert abs(total - 1) < 1e-12


def test_marginal_density_degenerate():
    theta = np.array([[0.5, 0.5], [0.0, 1.0], [1.0, 0.0]])
    assert marginal_block_density([2, 1], theta, 1.0) == 1.0


def test_conditional_odds_matches_posterior_ratio(rng):
    for _ in range(100):
        S, params = random_instance(rng)
        A = rng.integers(0, 2, size=S.n_blocks)
        i = int(rng.integers(S.n_blocks))
        A1, A0 = A.copy(), A.copy()
        A1[i], A0[i] = 1, 0
        ratio = log_posterior_unnorm(S, A1, params) - log_posterior_unnorm(S, A0, params)
        lo = log_conditional_odds(S, A, i, params)
        assert abs(lo - ratio) <= 1e-10 * max(1.0, abs(ratio))
        assert conditional_odds(S, A, i, params) == pytest.approx(math.exp(ratio), rel=1e-10)


def test_conditional_odds_prior_factor(rng):
    S, params = random_instance(rng, min_blocks=3)
    A = rng.integers(0, 2, size=S.n_blocks)
    other = ModelParams(0.5 * params.p0, params.beta)
    ratio = conditional_odds(S, A, 0, params) / conditional_odds(S, A, 0, other)
    prior = (params.p0 / (1 - params.p0)) / (other.p0 / (1 - other.p0))
    assert ratio == pytest.approx(prior, rel=1e-12)


def test_conditional_index_out_of_range():
    S = Sequence([1, 2], 1, 2)
    with pytest.raises(IndexError):
        conditional_odds(S, [0, 1], 2, ModelParams.uniform(1, 2, 0.2))


def test_conditional_lower_bounds_hold(rng):
    for _ in range(30):
        S, params = random_instance(rng, max_blocks=8)
        lower_one, lower_zero = conditional_lower_bounds(S, params)
        for _ in range(5):
            A = rng.integers(0, 2, size=S.n_blocks)
            for i in range(S.n_blocks):
                p1 = conditional_prob_one(S, A, i, params)
                assert p1 >= lower_one[i]
                assert 1 - p1 >= lower_zero[i]


def test_posterior_mean_prior():
    S = Sequence([1, 2, 2, 2], 2, 2)
    theta = posterior_mean_estimates(S, [0, 0], ModelParams.uniform(2, 2, 0.2))
    assert np.allclose(theta[1:], 0.5)


def test_posterior_mean_rows_sum_to_one(rng):
    for _ in range(10):
        S, params = random_instance(rng, M=3)
        theta = posterior_mean_estimates(S, rng.integers(0, 2, size=S.n_blocks), params)
        assert np.max(np.abs(theta.sum(axis=1) - 1)) < 1e-12


def test_posterior_mean_hand_checked():
    # one block (1, 2) marked as motif, beta = 1: motif rows (2/3, 1/3) and (1/3, 2/3)
    S = Sequence([1, 2, 2, 2], 2, 2)
    theta = posterior_mean_estimates(S, [1, 0], ModelParams.uniform(2, 2, 0.2))
    assert np.allclose(theta[1], [2 / 3, 1 / 3])
    assert np.allclose(theta[2], [1 / 3, 2 / 3])
    # background holds the second block (2, 2): (0 + 1, 2 + 1) / 4
    assert np.allclose(theta[0], [1 / 4, 3 / 4])
