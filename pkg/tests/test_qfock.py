import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qchaos import qfock as qf

from conftest import complex_normal

# 1/(0.5; 0.5)_inf from mpmath.qp at 30 digits; 50 factors agree to double precision
C_HALF = 3.46274661945506361


def _space(m=2, cutoff=4, q=0.5):
    return qf.TruncatedFockSpace(m, cutoff, q)


def _random_vector(space, rng, top):
    vec = space.zero_vector()
    for n in range(top + 1):
        vec[n] = complex_normal(rng, space.block_dim(n))
    return vec


def _vec_close(a, b, tol):
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b)) <= tol


# --------------------------------------------------------------------------
# space and ladder operators


def test_space_layout():
    sp = _space(m=2, cutoff=3, q=0.2)
    assert sp.one_particle_dim == 4
    assert [sp.label(i) for i in range(4)] == [1, 2, -1, -2]
    assert sp.inner(sp.vacuum(), sp.vacuum()) == 1
    assert sp.block_dim(3) == 64


def test_weight_profile_derived_values():
    w = qf.WeightProfile(np.array([1.0, 2.0]), np.array([1.0, 1.0]))
    assert np.allclose(w.sigma, [1.0, 2 * 1 / 5])
    assert np.allclose(w.a_eigs, [1.0, 4.0])
    assert not w.tracial
    assert qf.WeightProfile.constant(3).tracial
    with pytest.raises(ValueError):
        qf.WeightProfile(np.array([1.0]), np.array([0.0]))


def test_creation_examples():
    sp = _space(q=0.3)
    l1 = qf.basis_creation(sp, 1)
    out = l1.apply(sp.vacuum())
    assert _vec_close(out, sp.basis_vector((1,)), 0)
    out = l1.apply(sp.basis_vector((2,)))
    assert _vec_close(out, sp.basis_vector((1, 2)), 0)
    assert l1.valid_domain == sp.cutoff - 1


@pytest.mark.parametrize("q", (-0.7, 0.0, 0.4, 0.9))
def test_annihilation_examples(q):
    sp = _space(q=q)
    a1 = qf.basis_annihilation(sp, 1)
    assert all(not np.any(v) for v in a1.apply(sp.vacuum()))
    assert _vec_close(a1.apply(sp.basis_vector((1, 2))), sp.basis_vector((2,)), 1e-12)
    assert _vec_close(a1.apply(sp.basis_vector((2, 1))), sp.basis_vector((2,), q), 1e-12)


@pytest.mark.parametrize("q", (-1.0, -0.5, 0.0, 0.5, 1.0))
def test_annihilation_matches_explicit_sum(q, rng):
    sp = _space(m=1, cutoff=4, q=q)
    h = complex_normal(rng, 2)
    diff = qf.annihilation_op(sp, h) - qf.explicit_annihilation(sp, h)
    res = diff.quotient_residual() if sp.degenerate else max(np.linalg.norm(b, 2) for b in diff.blocks.values())
    assert res <= 1e-10


@given(st.floats(-0.95, 0.95), st.integers(0, 2**32 - 1))
def test_adjointness_property(q, seed):
    rng = np.random.default_rng(seed)
    sp = _space(m=1, cutoff=4, q=q)
    h = complex_normal(rng, 2)
    xi, eta = _random_vector(sp, rng, 3), _random_vector(sp, rng, 4)
    lhs = sp.inner(qf.creation_op(sp, h).apply(xi), eta)
    rhs = sp.inner(xi, qf.annihilation_op(sp, h).apply(eta))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@given(st.floats(-0.95, 0.95), st.integers(0, 2**32 - 1))
def test_ladder_relation_property(q, seed):
    rng = np.random.default_rng(seed)
    sp = _space(m=1, cutoff=4, q=q)
    h, f = complex_normal(rng, 2), complex_normal(rng, 2)
    lf, ah = qf.creation_op(sp, f), qf.annihilation_op(sp, h)
    rel = ah @ lf - q * (lf @ ah) - complex(np.vdot(h, f)) * qf.GradedOperator.identity(sp)
    assert qf.operator_difference(rel, qf.GradedOperator.zero(sp), rel.valid_domain) <= 1e-10


def test_strict_apply_refuses_inexact_use():
    sp = _space(m=1, cutoff=3, q=0.5)
    l1 = qf.basis_creation(sp, 1)
    with pytest.raises(ValueError):
        l1.apply(sp.basis_vector((1, 1, 1)), max_degree=4)
    prod = qf.product([l1, l1, l1])
    assert prod.valid_domain == 0


# --------------------------------------------------------------------------
# gaussians


def test_gaussian_on_vacuum():
    sp = _space(q=0.3)
    w = qf.WeightProfile(np.array([1.5, 0.5]), np.array([0.7, 2.0]))
    out = qf.gaussian_op(sp, w, 2).apply(sp.vacuum())
    assert _vec_close(out, sp.basis_vector((2,), 0.5), 1e-15)
    with pytest.raises(ValueError):
        qf.gaussian_op(sp, w, 3)


@pytest.mark.parametrize("q", (-1.0, -0.5, 0.0, 0.5, 1.0))
def test_vacuum_second_moments(q):
    sp = _space(m=2, cutoff=3, q=q)
    w = qf.WeightProfile(np.array([1.3, 0.6]), np.array([0.8, 1.7]))
    for k in (1, 2):
        g, gs = qf.gaussian_op(sp, w, k), qf.gaussian_adjoint(sp, w, k)
        assert abs(qf.vacuum_expectation([g, gs]) - w.mu[k - 1] ** 2) <= 1e-12
        assert abs(qf.vacuum_expectation([gs, g]) - w.lam[k - 1] ** 2) <= 1e-12
        assert qf.vacuum_expectation([g, gs, g]) == 0


def test_vacuum_expectation_matches_dense(rng):
    sp = _space(m=1, cutoff=4, q=0.6)
    w = qf.WeightProfile(np.array([1.2]), np.array([0.7]))
    ops = [qf.gaussian_op(sp, w, 1), qf.gaussian_adjoint(sp, w, 1)]
    for word in itertools.product(range(2), repeat=4):
        seq = [ops[i] for i in word]
        assert abs(qf.vacuum_expectation(seq) - qf.dense_vacuum_expectation(seq)) <= 1e-12


@given(st.floats(-0.95, 0.95), st.lists(st.integers(0, 3), min_size=1, max_size=2), st.lists(st.integers(0, 3), min_size=1, max_size=2))
def test_tracial_property(q, left, right):
    sp = _space(m=2, cutoff=4, q=q)
    w = qf.WeightProfile.constant(2, 1.3)
    ops = [qf.gaussian_op(sp, w, 1), qf.gaussian_op(sp, w, 2), qf.gaussian_adjoint(sp, w, 1), qf.gaussian_adjoint(sp, w, 2)]
    x = [ops[i] for i in left]
    y = [ops[i] for i in right]
    assert abs(qf.vacuum_expectation(x + y) - qf.vacuum_expectation(y + x)) <= 1e-10


def test_stated_generator_relation_only_holds_at_minus_one():
    w = qf.WeightProfile(np.array([1.0]), np.array([0.8]))
    results = {}
    for q in (-1.0, 0.0, 0.5, 1.0):
        sp = _space(m=1, cutoff=4, q=q)
        g, gs = qf.gaussian_op(sp, w, 1), qf.gaussian_adjoint(sp, w, 1)
        ident = qf.GradedOperator.identity(sp)
        stated = gs @ g - q * (g @ gs) - (1.0 + 0.64) * ident
        boundary = gs @ g - q * (g @ gs) - (1.0 - q * 0.64) * ident
        top = stated.valid_domain
        if sp.degenerate:
            results[q] = (stated.quotient_residual(), boundary.quotient_residual())
        else:
            results[q] = (qf.operator_difference(stated, 0 * ident, top), None)
    assert results[-1.0][0] <= 1e-12
    assert results[1.0][1] <= 1e-12 and results[1.0][0] > 1.0
    # away from q = -1 the vacuum already exposes the defect: <e_-1, (g*g) e_-1> picks up mu^2
    assert results[0.0][0] > 0.5 and results[0.5][0] > 0.5


@pytest.mark.parametrize("q", (-1.0, 1.0))
def test_car_ccr_relation(q):
    sp = _space(m=2, cutoff=4, q=q)
    w = qf.WeightProfile(np.array([1.0, 0.6]), np.array([0.9, 1.4]))
    g = {k: qf.gaussian_op(sp, w, k) for k in (1, 2)}
    for k, j in itertools.product((1, 2), repeat=2):
        assert (g[k] @ g[j] - q * (g[j] @ g[k])).quotient_residual() <= 1e-10


# --------------------------------------------------------------------------
# Wick products


def test_wick_from_vacuum_is_scalar():
    sp = _space(q=0.4)
    w = qf.WeightProfile.constant(2)
    wv = qf.wick_from_vector(sp, w, sp.vacuum())
    assert qf.operator_difference(wv, qf.GradedOperator.identity(sp), sp.cutoff) <= 1e-15


def test_wick_single_letter_is_gaussian():
    sp = _space(q=0.4)
    w = qf.WeightProfile(np.array([1.4, 0.5]), np.array([0.3, 2.0]))
    wv = qf.wick_from_vector(sp, w, sp.basis_vector((1,), 1.4))
    assert qf.operator_difference(wv, qf.gaussian_op(sp, w, 1), sp.cutoff - 1) <= 1e-10


@pytest.mark.parametrize("q", (-0.9, 0.0, 0.5))
def test_wick_of_distinct_pair_is_plain_product(q):
    sp = _space(m=2, cutoff=4, q=q)
    w = qf.WeightProfile(np.array([1.4, 0.5]), np.array([0.3, 2.0]))
    xi = sp.basis_vector((1, 2), 1.4 * 0.5)
    wv = qf.wick_from_vector(sp, w, xi)
    target = qf.gaussian_op(sp, w, 1) @ qf.gaussian_op(sp, w, 2)
    assert _vec_close(wv.apply(sp.vacuum()), xi, 1e-12)
    assert qf.operator_difference(wv, target, 2) <= 1e-10


def test_wick_decomposition_example(rng):
    sp = _space(m=1, cutoff=4, q=0.5)
    w = qf.WeightProfile(np.array([1.0]), np.array([1.0]))
    xi = sp.zero_vector()
    xi[2] = complex_normal(rng, 4)
    a = qf.wick_from_vector(sp, w, xi)
    b = qf.wick_decomposition(sp, w, xi[2], 2)
    assert qf.operator_difference(a, b, sp.cutoff - 2) <= 1e-10


@given(st.floats(-0.9, 0.9), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_wick_constructions_agree(q, n, seed):
    rng = np.random.default_rng(seed)
    sp = _space(m=1, cutoff=4, q=q)
    w = qf.WeightProfile(np.array([1.3]), np.array([0.6]))
    xi = sp.zero_vector()
    xi[n] = complex_normal(rng, sp.block_dim(n))
    a = qf.wick_from_vector(sp, w, xi)
    b = qf.wick_decomposition(sp, w, xi[n], n)
    assert _vec_close(a.apply(sp.vacuum()), xi, 1e-10 * max(1.0, float(np.max(np.abs(xi[n])))))
    top = min(a.valid_domain, b.valid_domain)
    scale = max(1.0, float(np.max(np.abs(xi[n]))))
    assert qf.operator_difference(a, b, top) <= 1e-10 * scale * 10**n


def test_wick_bijectivity(rng):
    sp = _space(m=1, cutoff=5, q=0.3)
    w = qf.WeightProfile(np.array([1.1]), np.array([0.9]))
    g, gs = qf.gaussian_op(sp, w, 1), qf.gaussian_adjoint(sp, w, 1)
    word = qf.OperatorPolynomial(sp, ((1.0, (g, gs)), (0.5j, (gs,)), (2.0, ())))
    again = qf.wick_from_vector(sp, w, word.apply(sp.vacuum()))
    assert qf.operator_difference(word, again, 3) <= 1e-10


def test_polynomial_materializes_to_same_operator(rng):
    sp = _space(m=1, cutoff=4, q=-0.4)
    w = qf.WeightProfile(np.array([1.1]), np.array([0.9]))
    xi = sp.zero_vector()
    xi[2] = complex_normal(rng, 4)
    poly = qf.wick_decomposition(sp, w, xi[2], 2)
    dense = poly.materialize()
    assert qf.operator_difference(poly, dense, dense.valid_domain) <= 1e-12
    assert qf.operator_difference(poly.adjoint(), dense.adjoint(), dense.adjoint().valid_domain) <= 1e-10


# --------------------------------------------------------------------------
# L_p norms on the tracial Fock side


def test_tracial_lp_norms_of_circular_element():
    sp = _space(m=1, cutoff=4, q=0.0)
    w = qf.WeightProfile.constant(1)
    g = qf.gaussian_op(sp, w, 1)
    val2, flag2 = qf.polynomial_lp_norm([(np.array([[1.0]]), g)], 2)
    val4, _ = qf.polynomial_lp_norm([(np.array([[1.0]]), g)], 4)
    val_inf, flag = qf.polynomial_lp_norm([(np.array([[1.0]]), g)], np.inf)
    assert abs(val2 - 1) <= 1e-12 and not flag2
    assert abs(val4 - 2**0.25) <= 1e-12
    # truncation can only underestimate the free circular norm 2
    assert flag and 1 <= val_inf <= 2


def test_lp_norm_rejects_odd_p():
    sp = _space(m=1, cutoff=4, q=0.0)
    g = qf.gaussian_op(sp, qf.WeightProfile.constant(1), 1)
    with pytest.raises(ValueError):
        qf.polynomial_lp_norm([(np.array([[1.0]]), g)], 3)


# --------------------------------------------------------------------------
# U_k and modular theory


def test_cq_partial_product():
    assert abs(qf.partial_product_cq(0.5) - C_HALF) <= 1e-12
    assert qf.partial_product_cq(0.0) == 1.0


def test_uk_examples():
    sp = qf.TruncatedFockSpace(1, 5, 0.0)
    assert abs(qf.empirical_Uk_norm(sp, 1, 0) - 1.0) <= 1e-12
    sp = qf.TruncatedFockSpace(1, 5, -0.5)
    assert qf.empirical_Uk_norm(sp, 2, 1) <= qf.partial_product_cq(-0.5) * 1.01
    with pytest.raises(ValueError):
        qf.empirical_Uk_norm(qf.TruncatedFockSpace(1, 3, 1.0), 1, 0)


@given(st.sampled_from([-0.5, 0.5]), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_uk_sampled_norm_below_factorization_bound(q, n, seed):
    rng = np.random.default_rng(seed)
    sp = qf.TruncatedFockSpace(1, 5, q)
    k = int(rng.integers(0, n + 1))
    u = complex_normal(rng, (2 ** (n - k), 2**k))
    op = qf.apply_split_operator(sp, u, n, k)
    bound = qf.empirical_Uk_norm(sp, n, k) * qf.haagerup_cr_norm(sp, u, n, k)
    assert op.q_norm() <= bound * (1 + 1e-9)


def test_modular_tracial_example():
    sp = _space(m=1, cutoff=3, q=0.4)
    w = qf.WeightProfile.constant(1, 1.5)
    xi = sp.basis_vector((1,), 1.5)
    assert _vec_close(qf.modular_involution(sp, w, xi), sp.basis_vector((-1,), 1.5), 1e-15)


@pytest.mark.parametrize("q", (-0.9, 0.0, 0.5))
def test_modular_words(q):
    sp = _space(m=2, cutoff=3, q=q)
    w = qf.WeightProfile(np.array([1.0, 0.4]), np.array([2.0, 1.1]))
    g = {k: qf.gaussian_op(sp, w, k) for k in (1, 2)}
    gs = {k: qf.gaussian_adjoint(sp, w, k) for k in (1, 2)}
    words = [g[1], g[2], g[1] @ g[2], g[2] @ gs[1], g[1] @ gs[2] @ g[2]]
    assert qf.modular_check(sp, w, words) <= 1e-8


def test_modular_refuses_boundary():
    sp = _space(m=1, cutoff=3, q=1.0)
    w = qf.WeightProfile.constant(1)
    with pytest.raises(ValueError):
        qf.modular_check(sp, w, [qf.gaussian_op(sp, w, 1)])
