import itertools

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qchaos import lpnorms as lp
from qchaos.qfock import WeightProfile


def _weights(m, lam=None, mu=None):
    lam = np.ones(m) if lam is None else np.asarray(lam, float)
    mu = np.ones(m) if mu is None else np.asarray(mu, float)
    return WeightProfile(lam, mu)


def _no_repetition(rng, m, d, real=False):
    x = rng.standard_normal((m,) * d)
    if not real:
        x = x + 1j * rng.standard_normal((m,) * d)
    for idx in itertools.product(range(m), repeat=d):
        if len(set(idx)) < d:
            x[idx] = 0
    return lp.CoefficientTensor(x, d, "no-repetition")


def _cvxpy_k1(x: lp.CoefficientTensor, weights: WeightProfile, assignments) -> float:
    """Independent oracle: K-type norm at p = 1 as a nuclear-norm program (real data)."""
    ys = [cp.Variable(lp.reshape_matrix(x, a, weights, 1.0).shape) for a in assignments]
    # each reshape orders its row legs and column legs lexicographically; constrain entrywise
    cons = []
    d, m = x.d, x.m
    for idx in itertools.product(range(m), repeat=d):
        expr = 0
        for a, y in zip(assignments, ys):
            w = lp.assignment_weight_tensor(weights, 1.0, a)
            r = sum(idx[t] * m ** (len([s for s in range(t + 1, d) if a[s] == "c"])) for t in range(d) if a[t] == "c")
            c = sum(idx[t] * m ** (len([s for s in range(t + 1, d) if a[s] == "r"])) for t in range(d) if a[t] == "r")
            expr = expr + y[r, c] / w[idx]
        cons.append(expr == float(np.real(x.entries[idx])))
    prob = cp.Problem(cp.Minimize(sum(cp.normNuc(y) for y in ys)), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)


# --------------------------------------------------------------------------
# basic norms


def test_conjugate_exponent():
    assert lp.conjugate_exponent(1) == np.inf
    assert lp.conjugate_exponent(np.inf) == 1
    assert lp.conjugate_exponent(4.0) == pytest.approx(4 / 3)
    with pytest.raises(ValueError):
        lp.conjugate_exponent(0.5)


def test_schatten_examples():
    a = np.diag([3.0, 4.0])
    assert lp.schatten_norm(a, 1) == pytest.approx(7)
    assert lp.schatten_norm(a, 2) == pytest.approx(5)
    assert lp.schatten_norm(a, np.inf) == pytest.approx(4)
    assert lp.schatten_norm(np.array([[1.0, 1.0], [1.0, 1.0]]), 1) == pytest.approx(2)
    with pytest.raises(ValueError):
        lp.schatten_norm(a, 0.9)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 1.5, 2.0, 3.0, np.inf]))
def test_schatten_triangle_and_homogeneity(seed, p):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, 3, 4))
    assert lp.schatten_norm(a + b, p) <= lp.schatten_norm(a, p) + lp.schatten_norm(b, p) + 1e-12
    assert lp.schatten_norm(-2.5 * a, p) == pytest.approx(2.5 * lp.schatten_norm(a, p), rel=1e-12)


def test_tensor_validation():
    with pytest.raises(ValueError):
        lp.CoefficientTensor(np.ones((2, 2)), 2, "no-repetition")
    with pytest.raises(ValueError):
        lp.CoefficientTensor(np.ones((2, 3)), 2)
    with pytest.raises(ValueError):
        lp.CoefficientTensor(np.array([[0, 1.0], [2.0, 0]]), 2, symmetry="symmetric")
    lp.CoefficientTensor(np.array([[0, 1.0], [-1.0, 0]]), 2, symmetry="antisymmetric")


# --------------------------------------------------------------------------
# reshapes


def test_matricization_example():
    x = lp.CoefficientTensor(np.arange(4.0).reshape(2, 2), 2)
    w = _weights(2)
    assert np.array_equal(lp.reshape_matrix(x, ("c", "r"), w, 2.0), [[0, 1], [2, 3]])
    assert np.array_equal(lp.reshape_matrix(x, ("c", "c"), w, 2.0), [[0], [1], [2], [3]])
    assert np.array_equal(lp.reshape_matrix(x, ("r", "r"), w, 2.0), [[0, 1, 2, 3]])
    assert np.array_equal(lp.reshape_matrix(x, ("r", "c"), w, 2.0), [[0, 2], [1, 3]])
    assert lp.kj_assignments(2) == [("r", "r"), ("c", "r"), ("c", "c")]
    assert len(lp.all_assignments(3)) == 8


def test_leg_weights_at_endpoints():
    w = _weights(2, [2.0, 3.0], [5.0, 7.0])
    assert np.allclose(lp.leg_weights(w, 1.0, "c"), [5, 7])
    assert np.allclose(lp.leg_weights(w, 1.0, "r"), [2, 3])
    assert np.allclose(lp.leg_weights(w, 2.0, "c"), np.sqrt([10, 21]))
    assert np.allclose(lp.leg_weights(w, np.inf, "c"), [2, 3])


def test_matrix_coefficients_reshape():
    entries = np.zeros((2, 2, 2, 2))
    entries[0, 1] = np.eye(2)
    x = lp.CoefficientTensor(entries, 2)
    mat = lp.reshape_matrix(x, ("c", "r"), _weights(2), 1.0)
    assert mat.shape == (4, 4)
    assert lp.schatten_norm(mat, 1) == pytest.approx(2)


def test_j_and_sj_on_rank_one():
    # x = e_0 (x) e_1: every reshape is rank one with unit norm
    x = lp.CoefficientTensor(np.array([[0, 1.0], [0, 0]]), 2, "no-repetition")
    w = _weights(2)
    for p in (1.0, 1.5, 2.0):
        assert lp.j_norm(x, w, p).value == pytest.approx(1)
        assert lp.sj_norm(x, w, p).value == pytest.approx(1)


def test_identity_tensor_values():
    # the all-ones off-diagonal 3x3 tensor: J_1 is its trace norm, SJ_1 also sees the vector reshapes
    m = 3
    x = lp.CoefficientTensor(np.ones((m, m)) - np.eye(m), 2, "no-repetition")
    w = _weights(m)
    assert lp.matricization_norm(x, 1, w, 1.0) == pytest.approx(4)
    assert lp.matricization_norm(x, 0, w, 1.0) == pytest.approx(np.sqrt(6))
    assert lp.j_norm(x, w, 1.0).value == pytest.approx(4)
    assert lp.sj_norm(x, w, 1.0).value == pytest.approx(4)


# --------------------------------------------------------------------------
# K-type norms


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("name", ("K", "SK"))
def test_k1_against_cvxpy(seed, name):
    rng = np.random.default_rng(seed)
    m, d = 3, 2
    x = _no_repetition(rng, m, d, real=True)
    w = _weights(m, rng.uniform(0.5, 2, m), rng.uniform(0.5, 2, m))
    assignments = lp.kj_assignments(d) if name == "K" else lp.all_assignments(d)
    oracle = _cvxpy_k1(x, w, assignments)
    upper, lower = (lp.k_norm_pair if name == "K" else lp.sk_norm_pair)(x, w, 1.0)
    assert lower.value <= oracle * (1 + 1e-6)
    assert upper.value >= oracle * (1 - 1e-6)
    assert upper.value == pytest.approx(oracle, rel=1e-6)


def test_k1_against_cvxpy_degree_three():
    rng = np.random.default_rng(7)
    x = _no_repetition(rng, 3, 3, real=True)
    w = _weights(3)
    oracle = _cvxpy_k1(x, w, lp.kj_assignments(3))
    assert lp.k_norm(x, w, 1.0).value == pytest.approx(oracle, rel=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_p2_collapses_to_weighted_frobenius(seed):
    rng = np.random.default_rng(seed)
    m = 3
    x = _no_repetition(rng, m, 2)
    lam, mu = rng.uniform(0.5, 2, m), rng.uniform(0.5, 2, m)
    w = _weights(m, lam, mu)
    frob = np.sqrt(np.sum(np.outer(lam * mu, lam * mu) * np.abs(x.entries) ** 2))
    assert lp.j_norm(x, w, 2.0).value == pytest.approx(frob, rel=1e-12)
    assert lp.sj_norm(x, w, 2.0).value == pytest.approx(frob, rel=1e-12)
    upper, lower = lp.k_norm_pair(x, w, 2.0)
    assert upper.value == pytest.approx(frob, rel=1e-9)
    assert lower.value == pytest.approx(frob, rel=1e-9)


@pytest.mark.parametrize("p", (1.0, 4 / 3, 1.5))
def test_duality_sandwich(p):
    rng = np.random.default_rng(11)
    m = 3
    x = _no_repetition(rng, m, 2)
    w = _weights(m, rng.uniform(0.5, 2, m), rng.uniform(0.5, 2, m))
    upper, lower = lp.k_norm_pair(x, w, p)
    legs = [lp.rc_norm(x, a, w, p) for a in lp.kj_assignments(2)]
    assert lower.value <= upper.value * (1 + 1e-9)
    assert upper.value <= min(legs) * (1 + 1e-12)
    assert upper.parameters["certified"]
    assert upper.parameters["feasibility"] <= 1e-9
    # SK minimizes over more reshapes, so it can only be smaller
    assert lp.sk_norm(x, w, p).value <= upper.value * (1 + 2e-2)


def test_k_norm_homogeneity_and_triangle():
    rng = np.random.default_rng(3)
    w = _weights(3)
    x, y = _no_repetition(rng, 3, 2), _no_repetition(rng, 3, 2)
    kx, ky = lp.k_norm(x, w, 1.5).value, lp.k_norm(y, w, 1.5).value
    kxy = lp.k_norm(x.with_entries(x.entries + y.entries), w, 1.5).value
    assert kxy <= (kx + ky) * (1 + 2e-2)
    k3 = lp.k_norm(x.with_entries(3 * x.entries), w, 1.5).value
    assert k3 == pytest.approx(3 * kx, rel=2e-2)


def test_k_rejects_large_p():
    x = lp.CoefficientTensor(np.array([[0, 1.0], [0, 0]]), 2)
    with pytest.raises(ValueError):
        lp.k_norm(x, _weights(2), 3.0)


# --------------------------------------------------------------------------
# twist


def test_twist_degree_two():
    rng = np.random.default_rng(0)
    x = _no_repetition(rng, 3, 2)
    for q in (-1.0, -0.3, 0.0, 0.5, 1.0):
        y = lp.apply_permutation_twist(x, q)
        assert np.allclose(y.entries, x.entries + q * x.entries.T, atol=1e-15)
    assert np.array_equal(lp.apply_permutation_twist(x, 0.0).entries, x.entries)


def test_twist_degree_three_weights():
    x = np.zeros((3, 3, 3))
    x[0, 1, 2] = 1.0
    y = lp.apply_permutation_twist(lp.CoefficientTensor(x, 3, "no-repetition"), 0.5).entries
    # each of the six reorderings appears once with weight q^(inversions)
    assert sorted(y[np.nonzero(y)]) == pytest.approx(sorted([1, 0.5, 0.5, 0.25, 0.25, 0.125]))


def test_twist_symmetry_compatibility():
    sym = np.array([[0, 1.0, 2.0], [1.0, 0, 3.0], [2.0, 3.0, 0]])
    x = lp.CoefficientTensor(sym, 2, "no-repetition", "symmetric")
    assert np.allclose(lp.apply_permutation_twist(x, 0.4).entries, 1.4 * sym)
    anti = np.triu(sym) - np.triu(sym).T
    xa = lp.CoefficientTensor(anti, 2, "no-repetition", "antisymmetric")
    assert np.allclose(lp.apply_permutation_twist(xa, 0.4).entries, 0.6 * anti)


def test_twist_requires_no_repetition():
    with pytest.raises(ValueError):
        lp.apply_permutation_twist(lp.CoefficientTensor(np.eye(2), 2), 0.5)


def test_bracket_weights():
    w = _weights(2, [2.0, 1.0], [3.0, 1.0])
    x = lp.CoefficientTensor(np.array([[0, 1.0], [0, 0]]), 2)
    assert lp.bracket(x, x, w) == pytest.approx(6.0)
