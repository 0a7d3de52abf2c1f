"""Dense q-symmetrizers ``P_n`` and shuffle operators ``R_{n,k}``.

Both act on ``(C^dim)^{(x) n}`` with the row-major word ordering of
``numpy.ravel_multi_index``.  The permutation action is
``T_pi (f_1 x ... x f_n) = f_{pi(1)} x ... x f_{pi(n)}``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .combinatorics import enumerate_coset_reps, inverse, inversion_count, permutations

MAX_DENSE_DIM = 4096
MAX_DEGREE = 8


def _validate(q: float, dim: int, n: int, max_dim: int = MAX_DENSE_DIM) -> None:
    if abs(q) > 1:
        raise ValueError(f"|q| must be <= 1, got {q}")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if n < 0 or n > MAX_DEGREE:
        raise ValueError(f"degree {n} outside 0..{MAX_DEGREE}")
    if dim**n > max_dim:
        raise ValueError(f"dim**n = {dim**n} exceeds dense cap {max_dim}")


@functools.lru_cache(maxsize=None)
def _words(dim: int, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0), dtype=np.intp)
    return np.array(list(itertools.product(range(dim), repeat=n)), dtype=np.intp)


@functools.lru_cache(maxsize=None)
def permutation_index_map(perm: tuple[int, ...], dim: int) -> np.ndarray:
    """``out[a] = b`` where ``T_perm e_a = e_b`` on flat word indices."""
    n = len(perm)
    words = _words(dim, n)
    if n == 0:
        return np.zeros(1, dtype=np.intp)
    target = words[:, [v - 1 for v in perm]]
    return np.ravel_multi_index(target.T, (dim,) * n)


def permutation_matrix(perm: tuple[int, ...], dim: int) -> np.ndarray:
    idx = permutation_index_map(tuple(perm), dim)
    size = dim ** len(perm)
    mat = np.zeros((size, size))
    mat[idx, np.arange(size)] = 1.0
    return mat


@dataclass(frozen=True)
class Symmetrizer:
    q: float
    dim: int
    n: int
    matrix: np.ndarray


@dataclass(frozen=True)
class ShuffleOperator:
    q: float
    dim: int
    n: int
    k: int
    matrix: np.ndarray


def _weighted_sum(terms, dim: int, n: int, q: float, max_dim: int) -> np.ndarray:
    size = dim**n
    mat = np.zeros((size, size))
    cols = np.arange(size)
    for perm, power in terms:
        weight = 1.0 if power == 0 else q**power
        if weight == 0.0:
            continue
        mat[permutation_index_map(perm, dim), cols] += weight
    return mat


# dense blocks reach 4096^2 entries, so only a few are kept
@functools.lru_cache(maxsize=8)
def _symmetrizer_matrix(q: float, dim: int, n: int, max_dim: int) -> np.ndarray:
    terms = ((p, inversion_count(p)) for p in permutations(n))
    mat = _weighted_sum(terms, dim, n, q, max_dim)
    mat.setflags(write=False)
    return mat


def build_symmetrizer(q: float, dim: int, n: int, max_dim: int = MAX_DENSE_DIM) -> Symmetrizer:
    """``P_n = sum_pi q^{i(pi)} T_pi`` as a dense matrix."""
    _validate(q, dim, n, max_dim)
    return Symmetrizer(float(q), dim, n, _symmetrizer_matrix(float(q), dim, n, max_dim))


def build_shuffle_operator(q: float, dim: int, n: int, k: int, max_dim: int = MAX_DENSE_DIM) -> ShuffleOperator:
    """``R_{n,k} = sum_{pi shuffle} q^{i(pi)} T_{pi^{-1}}``."""
    _validate(q, dim, n, max_dim)
    reps = enumerate_coset_reps(n, k).reps
    terms = ((inverse(p), inversion_count(p)) for p in reps)
    mat = _weighted_sum(terms, dim, n, q, max_dim)
    mat.setflags(write=False)
    return ShuffleOperator(float(q), dim, n, k, mat)


def check_factorization(q: float, dim: int, n: int, k: int) -> float:
    """Entrywise max of ``P_n - R_{n,k} (P_{n-k} (x) P_k)``."""
    p_n = build_symmetrizer(q, dim, n).matrix
    r = build_shuffle_operator(q, dim, n, k).matrix
    rhs = r @ np.kron(build_symmetrizer(q, dim, n - k).matrix, build_symmetrizer(q, dim, k).matrix)
    return float(np.max(np.abs(p_n - rhs)))


def spectral_bounds(q: float, dim: int, n: int) -> tuple[float, float, float]:
    """Return ``(min_eig, max_eig, ||P_n^{-1}||)`` for ``|q| < 1``."""
    if abs(q) >= 1:
        raise ValueError("spectral bounds need |q| < 1")
    eigs = np.linalg.eigvalsh(build_symmetrizer(q, dim, n).matrix)
    lo, hi = float(eigs[0]), float(eigs[-1])
    return lo, hi, 1.0 / lo


def norm_bound(q: float, n: int) -> float:
    """``(1/(1-|q|))^{n-1}``; the operator-norm ceiling for ``P_n``."""
    return (1.0 / (1.0 - abs(q))) ** max(n - 1, 0)


def gram_kernel_dimension(q: float, dim: int, n: int, tol: float = 1e-10) -> int:
    eigs = np.linalg.eigvalsh(build_symmetrizer(q, dim, n).matrix)
    return int(np.sum(eigs <= tol))


def isometry_residual(q: float, dim: int, n: int, rng: np.random.Generator, trials: int = 3) -> float:
    """``max |<xi, P eta> - <P^{1/2} xi, P^{1/2} eta>|`` over random pairs."""
    p = build_symmetrizer(q, dim, n).matrix
    w, v = np.linalg.eigh(p)
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    size = p.shape[0]
    worst = 0.0
    for _ in range(trials):
        xi = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        eta = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        lhs = np.vdot(xi, p @ eta)
        rhs = np.vdot(root @ xi, root @ eta)
        worst = max(worst, abs(lhs - rhs))
    return float(worst)
