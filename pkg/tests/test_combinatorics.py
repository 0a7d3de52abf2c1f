import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qchaos import combinatorics as cb
from qchaos.symmetrizer import build_symmetrizer, permutation_matrix

Q_GRID = (-0.9, -0.5, 0.0, 0.5, 0.9)


def test_inversion_examples():
    assert cb.inversion_count((1, 2, 3)) == 0
    assert cb.inversion_count((2, 1)) == 1
    assert cb.inversion_count((4, 3, 2, 1)) == 6


def test_inversion_rejects_non_permutation():
    with pytest.raises(ValueError):
        cb.inversion_count((1, 1, 2))


@given(st.permutations(list(range(1, 7))))
def test_inversion_of_self_inverse_product_is_zero(p):
    assert cb.inversion_count(cb.compose(p, cb.inverse(p))) == 0


@given(st.permutations(list(range(1, 7))))
def test_inversion_count_matches_inverse(p):
    assert cb.inversion_count(p) == cb.inversion_count(cb.inverse(p))


@pytest.mark.parametrize("n", range(0, 7))
@pytest.mark.parametrize("q", Q_GRID)
def test_q_factorial_identity(n, q):
    lhs = sum(q ** cb.inversion_count(p) for p in cb.permutations(n))
    rhs = math.prod(sum(q**i for i in range(j)) for j in range(1, n + 1))
    assert abs(lhs - rhs) <= 1e-12
    assert abs(cb.q_factorial(n, q) - rhs) <= 1e-12


def _brute_force_reps(n, k):
    """One minimal-inversion element from each coset of the Young subgroup, by scanning S_n."""
    young = cb.young_subgroup(n, k)
    seen, reps = set(), []
    for p in cb.permutations(n):
        if p in seen:
            continue
        coset = {cb.compose(p, r) for r in young}
        seen |= coset
        reps.append(min(coset, key=lambda s: (cb.inversion_count(s), s)))
    return sorted(reps)


@pytest.mark.parametrize("n", range(0, 6))
def test_coset_reps_match_brute_force(n):
    for k in range(n + 1):
        reps = cb.enumerate_coset_reps(n, k)
        assert len(reps) == math.comb(n, k)
        assert list(reps.reps) == _brute_force_reps(n, k)
        assert all(cb.is_shuffle(p, k) for p in reps.reps)


def test_coset_examples():
    reps = cb.enumerate_coset_reps(2, 1).reps
    assert sorted(cb.inversion_count(p) for p in reps) == [0, 1]
    assert cb.enumerate_coset_reps(3, 0).reps == ((1, 2, 3),)
    reps = cb.enumerate_coset_reps(4, 2).reps
    assert len(reps) == 6
    assert sum(1.0 ** cb.inversion_count(p) for p in reps) == 6


@pytest.mark.parametrize("n", range(1, 7))
def test_inversion_generating_polynomial_is_gaussian_binomial(n):
    for k in range(n + 1):
        counts = [0] * (k * (n - k) + 1)
        for p in cb.enumerate_coset_reps(n, k).reps:
            counts[cb.inversion_count(p)] += 1
        assert counts == cb.q_binomial_coefficients(n, k)


def test_coset_reps_reject_bad_k():
    with pytest.raises(ValueError):
        cb.enumerate_coset_reps(3, 4)
    with pytest.raises(ValueError):
        cb.enumerate_coset_reps(3, -1)


@pytest.mark.parametrize("n", range(1, 6))
def test_unique_factorization_with_additive_lengths(n):
    for k in range(n + 1):
        reps = cb.enumerate_coset_reps(n, k).reps
        young = cb.young_subgroup(n, k)
        for pi in cb.permutations(n):
            # the shuffle is applied last: pi = sigma o rho
            found = [(s, r) for s in reps for r in young if cb.compose(s, r) == pi]
            assert len(found) == 1
            s, r = found[0]
            assert cb.inversion_count(pi) == cb.inversion_count(s) + cb.inversion_count(r)


def test_factorization_fails_with_shuffle_applied_first():
    # rho o sigma does not give a unique factorization with additive lengths
    n, k = 3, 1
    reps = cb.enumerate_coset_reps(n, k).reps
    young = cb.young_subgroup(n, k)
    bad = 0
    for pi in cb.permutations(n):
        found = [(s, r) for s in reps for r in young if cb.compose(r, s) == pi]
        ok = len(found) == 1 and cb.inversion_count(pi) == sum(cb.inversion_count(v) for v in found[0])
        bad += not ok
    assert bad > 0


def test_permute_tensor_index():
    assert cb.permute_tensor_index((1, 2, 3), (1, 2, 3)) == (1, 2, 3)
    assert cb.permute_tensor_index((2, 1), (5, 7)) == (7, 5)
    assert cb.permute_tensor_index((2, 3, 1), ("a", "b", "c")) == ("b", "c", "a")
    with pytest.raises(ValueError):
        cb.permute_tensor_index((1, 2), (1, 2, 3))


def test_reindexing_matches_matrix_action_at_q_one():
    # P_3 at q = 1 is the sum of all permutation matrices, i.e. 3! times the averaging projection
    dim = 2
    p3 = build_symmetrizer(1.0, dim, 3).matrix
    total = sum(permutation_matrix(p, dim) for p in cb.permutations(3))
    assert np.array_equal(p3, total)
    proj = p3 / 6
    assert np.allclose(proj @ proj, proj, atol=1e-14)
    words = list(itertools.product(range(dim), repeat=3))
    for p in cb.permutations(3):
        mat = permutation_matrix(p, dim)
        for col, w in enumerate(words):
            row = words.index(cb.permute_tensor_index(p, w))
            assert mat[row, col] == 1


def test_q_binomial_values():
    assert cb.q_binomial_coefficients(4, 2) == [1, 1, 2, 1, 1]
    assert cb.q_binomial(4, 2, 1.0) == 6
    assert abs(cb.q_binomial(3, 1, 0.5) - 1.75) < 1e-15
