"""Truncated q-Fock space and the operators living on it.

The one-particle space has basis ``e_{+-k}``, ``k = 1..m``, stored in the
order ``e_1, ..., e_m, e_{-1}, ..., e_{-m}``.  A Fock vector is a list of
arrays, one per degree ``0..cutoff``, holding coordinates in the free tensor
basis; the q-inner product is applied through the Gram blocks ``P_n``.

Operators are stored blockwise by ``(source degree, target degree)`` together
with per-shift exactness bounds, so every truncation artefact can be ruled out
before a number is reported.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg as sla

from .symmetrizer import MAX_DENSE_DIM, build_symmetrizer, build_shuffle_operator

KERNEL_TOL = 1e-10

FockVector = list  # list[np.ndarray], one entry per degree


@dataclass(frozen=True)
class WeightProfile:
    """Strictly positive weights ``lam[k-1]``, ``mu[k-1]`` for ``k = 1..m``."""

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if lam.shape != mu.shape:
            raise ValueError("lambda and mu must have equal length")
        if np.any(lam <= 0) or np.any(mu <= 0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def constant(cls, m: int, lam: float = 1.0, mu: float | None = None) -> "WeightProfile":
        return cls(np.full(m, lam), np.full(m, lam if mu is None else mu))

    @property
    def m(self) -> int:
        return len(self.lam)

    @property
    def sigma(self) -> np.ndarray:
        return 2 * self.mu**2 / (self.lam**2 + self.mu**2)

    @property
    def a_eigs(self) -> np.ndarray:
        """Eigenvalues of ``A`` on ``e_k`` (on ``e_{-k}`` they are inverted)."""
        return self.lam**2 / self.mu**2

    @property
    def tracial(self) -> bool:
        return bool(np.allclose(self.lam, self.mu, rtol=0, atol=0))

    def restrict(self, m: int) -> "WeightProfile":
        return WeightProfile(self.lam[:m], self.mu[:m])


class TruncatedFockSpace:
    """Degrees ``0..cutoff`` of the q-Fock space over ``C^{2m}``."""

    def __init__(self, m: int, cutoff: int, q: float, max_block_dim: int = MAX_DENSE_DIM):
        if m < 1:
            raise ValueError("need at least one generator (m >= 1)")
        if cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if abs(q) > 1:
            raise ValueError("|q| must be <= 1")
        self.m = m
        self.cutoff = cutoff
        self.q = float(q)
        self.one_particle_dim = 2 * m
        self.max_block_dim = max_block_dim
        if self.one_particle_dim**cutoff > max_block_dim:
            raise ValueError(f"top block dimension {(2 * m) ** cutoff} exceeds cap {max_block_dim}")
        self.labels = tuple(range(1, m + 1)) + tuple(-k for k in range(1, m + 1))

    def __repr__(self) -> str:
        return f"TruncatedFockSpace(m={self.m}, cutoff={self.cutoff}, q={self.q})"

    @property
    def degenerate(self) -> bool:
        return abs(self.q) == 1.0

    def index(self, label: int) -> int:
        if label > 0 and label <= self.m:
            return label - 1
        if label < 0 and -label <= self.m:
            return self.m - label - 1
        raise ValueError(f"label {label} outside +-1..+-{self.m}")

    def label(self, index: int) -> int:
        return self.labels[index]

    def block_dim(self, n: int) -> int:
        return self.one_particle_dim**n

    @property
    def degrees(self) -> range:
        return range(self.cutoff + 1)

    @functools.cached_property
    def _gram_cache(self) -> dict:
        return {}

    def _memo(self, name: str, n: int, build):
        # per-instance memo: the cache dies with the space
        cache = self.__dict__.setdefault("_memo_cache", {})
        if (name, n) not in cache:
            cache[(name, n)] = build()
        return cache[(name, n)]

    def gram(self, n: int) -> np.ndarray:
        if n not in self._gram_cache:
            self._gram_cache[n] = build_symmetrizer(self.q, self.one_particle_dim, n, self.max_block_dim).matrix
        return self._gram_cache[n]

    def _gram_eigh(self, n: int):
        return self._memo("eigh", n, lambda: np.linalg.eigh(self.gram(n)))

    def _gram_cho(self, n: int):
        return self._memo("cho", n, lambda: sla.cho_factor(self.gram(n)))

    def gram_solve(self, n: int, rhs: np.ndarray) -> np.ndarray:
        """``P_n^{-1} rhs``; pseudo-inverse on the range when ``q = +-1``."""
        if n == 0 or self.q == 0.0:
            return rhs
        if self.degenerate:
            w, v = self._gram_eigh(n)
            keep = w > KERNEL_TOL
            vk = v[:, keep]
            scale = w[keep].reshape((-1,) + (1,) * (rhs.ndim - 1))
            return vk @ ((vk.T @ rhs) / scale)
        return sla.cho_solve(self._gram_cho(n), rhs)

    def gram_sqrt(self, n: int) -> np.ndarray:
        return self._memo('gram_sqrt', n, lambda: self._gram_sqrt(n))

    def _gram_sqrt(self, n: int) -> np.ndarray:
        if n == 0 or self.q == 0.0:
            return np.eye(self.block_dim(n))
        w, v = self._gram_eigh(n)
        return (v * np.sqrt(np.clip(w, 0, None))) @ v.T

    def gram_isqrt(self, n: int) -> np.ndarray:
        return self._memo('gram_isqrt', n, lambda: self._gram_isqrt(n))

    def _gram_isqrt(self, n: int) -> np.ndarray:
        """``P_n^{-1/2}`` (on the range when degenerate)."""
        if n == 0 or self.q == 0.0:
            return np.eye(self.block_dim(n))
        w, v = self._gram_eigh(n)
        inv = np.where(w > KERNEL_TOL, 1.0 / np.sqrt(np.where(w > KERNEL_TOL, w, 1.0)), 0.0)
        return (v * inv) @ v.T

    def range_projector(self, n: int) -> np.ndarray:
        return self._memo('range_projector', n, lambda: self._range_projector(n))

    def _range_projector(self, n: int) -> np.ndarray:
        if not self.degenerate or n == 0:
            return np.eye(self.block_dim(n))
        w, v = self._gram_eigh(n)
        vk = v[:, w > KERNEL_TOL]
        return vk @ vk.T

    def zero_vector(self) -> FockVector:
        return [np.zeros(self.block_dim(n), dtype=complex) for n in self.degrees]

    def vacuum(self) -> FockVector:
        vec = self.zero_vector()
        vec[0][0] = 1.0
        return vec

    def word_index(self, word: Sequence[int]) -> int:
        idx = 0
        for lab in word:
            idx = idx * self.one_particle_dim + self.index(lab)
        return idx

    def basis_vector(self, word: Sequence[int], coeff: complex = 1.0) -> FockVector:
        if len(word) > self.cutoff:
            raise ValueError("word longer than cutoff")
        vec = self.zero_vector()
        vec[len(word)][self.word_index(word)] = coeff
        return vec

    def words(self, n: int) -> list[tuple[int, ...]]:
        return [tuple(self.labels[i] for i in w) for w in itertools.product(range(self.one_particle_dim), repeat=n)]

    def inner(self, xi: FockVector, eta: FockVector) -> complex:
        """q-inner product, conjugate linear in ``xi``."""
        return complex(sum(np.vdot(xi[n], self.gram(n) @ eta[n]) for n in self.degrees))

    def norm(self, xi: FockVector) -> float:
        return float(np.sqrt(max(self.inner(xi, xi).real, 0.0)))

    def one_particle(self, label: int, coeff: complex = 1.0) -> np.ndarray:
        h = np.zeros(self.one_particle_dim, dtype=complex)
        h[self.index(label)] = coeff
        return h


def _merge_valid(a: Mapping[int, int], b: Mapping[int, int]) -> dict[int, int]:
    out = dict(a)
    for shift, vd in b.items():
        out[shift] = min(out.get(shift, vd), vd)
    return out


@dataclass(frozen=True)
class GradedOperator:
    """Linear map on a truncated Fock space stored as degree blocks.

    ``valid`` maps each degree shift to the largest source degree on which
    that part of the operator agrees with the untruncated operator.
    """

    space: TruncatedFockSpace
    blocks: dict = field(default_factory=dict)
    valid: dict = field(default_factory=dict)

    @property
    def valid_domain(self) -> int:
        if not self.valid:
            return self.space.cutoff
        return min(self.space.cutoff, min(self.valid.values()))

    @property
    def shifts(self) -> set[int]:
        return set(self.valid)

    @classmethod
    def identity(cls, space: TruncatedFockSpace, scale: complex = 1.0) -> "GradedOperator":
        blocks = {(n, n): scale * np.eye(space.block_dim(n)) for n in space.degrees}
        return cls(space, blocks, {0: space.cutoff})

    @classmethod
    def zero(cls, space: TruncatedFockSpace) -> "GradedOperator":
        return cls(space, {}, {})

    def _check_space(self, other: "GradedOperator") -> None:
        if other.space is not self.space:
            raise ValueError("operators live on different Fock spaces")

    def __add__(self, other: "GradedOperator") -> "GradedOperator":
        self._check_space(other)
        blocks = dict(self.blocks)
        for key, mat in other.blocks.items():
            blocks[key] = blocks[key] + mat if key in blocks else mat
        return GradedOperator(self.space, blocks, _merge_valid(self.valid, other.valid))

    def __neg__(self) -> "GradedOperator":
        return -1.0 * self

    def __sub__(self, other: "GradedOperator") -> "GradedOperator":
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> "GradedOperator":
        return GradedOperator(self.space, {k: scalar * v for k, v in self.blocks.items()}, dict(self.valid))

    __rmul__ = __mul__

    def __matmul__(self, other: "GradedOperator") -> "GradedOperator":
        self._check_space(other)
        blocks: dict = {}
        for (s, u), right in other.blocks.items():
            # pieces that are already inexact are never formed
            if s > other.valid.get(u - s, -1):
                continue
            for (u2, t), left in self.blocks.items():
                if u2 != u or u > self.valid.get(t - u, -1):
                    continue
                prod = left @ right
                blocks[(s, t)] = blocks[(s, t)] + prod if (s, t) in blocks else prod
        valid: dict[int, int] = {}
        for b, vd_b in other.valid.items():
            for a, vd_a in self.valid.items():
                vd = min(vd_b, vd_a - b)
                valid[a + b] = min(valid.get(a + b, vd), vd)
        return GradedOperator(self.space, blocks, valid)

    def adjoint(self) -> "GradedOperator":
        """Adjoint for the q-inner product (on the Gram range when ``q = +-1``); cached."""
        cached = self.__dict__.get("_adjoint")
        if cached is None:
            cached = self._build_adjoint()
            self.__dict__["_adjoint"] = cached
        return cached

    def _build_adjoint(self) -> "GradedOperator":
        sp = self.space
        blocks = {}
        for (s, t), mat in self.blocks.items():
            blocks[(t, s)] = sp.gram_solve(s, mat.conj().T @ sp.gram(t))
        valid = {-c: min(sp.cutoff, vd + c) for c, vd in self.valid.items()}
        return GradedOperator(sp, blocks, valid)

    def apply(self, vec: FockVector, max_degree: int | None = None, strict: bool = True) -> FockVector:
        """Apply to a Fock vector.

        Output components above ``max_degree`` are discarded.  With ``strict``
        every retained component must come from an exact block.
        """
        sp = self.space
        top = sp.cutoff if max_degree is None else max_degree
        out = [np.zeros((sp.block_dim(n),) + vec[n].shape[1:], dtype=complex) for n in sp.degrees]
        present = {n for n in sp.degrees if np.any(vec[n])}
        if strict:
            for s in present:
                for c, vd in self.valid.items():
                    if 0 <= s + c <= top and s > vd:
                        raise ValueError(
                            f"input degree {s} exceeds exact domain {vd} for shift {c:+d}; raise the cutoff"
                        )
                    if s + c > sp.cutoff and s + c <= top:
                        raise ValueError(f"output degree {s + c} beyond cutoff {sp.cutoff}")
        for (s, t), mat in self.blocks.items():
            if s in present and t <= top:
                out[t] = out[t] + mat @ vec[s]
        return out

    def to_dense(self, max_source: int | None = None) -> np.ndarray:
        sp = self.space
        offs = np.concatenate([[0], np.cumsum([sp.block_dim(n) for n in sp.degrees])])
        mat = np.zeros((offs[-1], offs[-1]), dtype=complex)
        for (s, t), blk in self.blocks.items():
            if max_source is not None and s > max_source:
                continue
            mat[offs[t] : offs[t + 1], offs[s] : offs[s + 1]] = blk
        return mat

    def q_orthonormal_matrix(self, max_source: int | None = None) -> np.ndarray:
        """Dense matrix in q-orthonormal coordinates, columns limited to sources ``<= max_source``."""
        sp = self.space
        top = self.valid_domain if max_source is None else max_source
        offs = np.concatenate([[0], np.cumsum([sp.block_dim(n) for n in sp.degrees])])
        src = [n for n in sp.degrees if n <= top]
        col_offs = dict(zip(src, np.concatenate([[0], np.cumsum([sp.block_dim(n) for n in src])])))
        cols = int(sum(sp.block_dim(n) for n in src))
        mat = np.zeros((offs[-1], cols), dtype=complex)
        for (s, t), blk in self.blocks.items():
            if s in col_offs:
                c0 = col_offs[s]
                mat[offs[t] : offs[t + 1], c0 : c0 + sp.block_dim(s)] += sp.gram_sqrt(t) @ blk @ sp.gram_isqrt(s)
        return mat

    def q_norm(self, max_source: int | None = None) -> float:
        """Operator norm for the q-inner product on sources ``<= max_source``."""
        mat = self.q_orthonormal_matrix(max_source)
        if mat.size == 0:
            return 0.0
        return float(np.linalg.norm(mat, 2))

    def quotient_residual(self) -> float:
        """Largest block norm after projecting both sides to the Gram range."""
        sp = self.space
        worst = 0.0
        for (s, t), blk in self.blocks.items():
            if s > self.valid_domain:
                continue
            piece = sp.range_projector(t) @ blk @ sp.range_projector(s)
            if piece.size:
                worst = max(worst, float(np.linalg.norm(piece, 2)))
        return worst


def _compose_valid(left: Mapping[int, int], right: Mapping[int, int]) -> dict[int, int]:
    valid: dict[int, int] = {}
    for b, vd_b in right.items():
        for a, vd_a in left.items():
            vd = min(vd_b, vd_a - b)
            valid[a + b] = min(valid.get(a + b, vd), vd)
    return valid


@dataclass(frozen=True)
class OperatorPolynomial:
    """``sum_t c_t X_{t,1} ... X_{t,L}`` kept as words and applied factor by factor.

    Wick products are sums of many long words; forming each product as block
    matrices is far costlier than pushing the needed vectors through.
    """

    space: TruncatedFockSpace
    terms: tuple = ()

    @property
    def valid(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for _, word in self.terms:
            vd = {0: self.space.cutoff}
            for op in reversed(word):
                vd = _compose_valid(op.valid, vd)
            out = _merge_valid(out, vd)
        return out

    @property
    def valid_domain(self) -> int:
        valid = self.valid
        return min(self.space.cutoff, min(valid.values())) if valid else self.space.cutoff

    @property
    def shifts(self) -> set[int]:
        return set(self.valid)

    def apply(self, vec: FockVector, max_degree: int | None = None, strict: bool = True) -> FockVector:
        sp = self.space
        top = sp.cutoff if max_degree is None else max_degree
        out = [np.zeros((sp.block_dim(n),) + vec[n].shape[1:], dtype=complex) for n in sp.degrees]
        for coeff, word in self.terms:
            res = apply_word(word, vec, keep_degree=top) if word else vec
            for n in sp.degrees:
                if n <= top:
                    out[n] = out[n] + coeff * res[n]
        return out

    def adjoint(self) -> "OperatorPolynomial":
        terms = tuple((np.conj(c), tuple(op.adjoint() for op in reversed(word))) for c, word in self.terms)
        return OperatorPolynomial(self.space, terms)

    def materialize(self) -> GradedOperator:
        out = GradedOperator.zero(self.space)
        for c, word in self.terms:
            out = out + c * (product(word) if word else GradedOperator.identity(self.space))
        return out


def action_blocks(op, max_source: int) -> dict[tuple[int, int], np.ndarray]:
    """Blocks of ``op`` on sources ``<= max_source``, read off from its action on basis columns."""
    sp = op.space
    out = {}
    for s in range(max_source + 1):
        vec = [np.zeros((sp.block_dim(n), sp.block_dim(s)), dtype=complex) for n in sp.degrees]
        vec[s] = np.eye(sp.block_dim(s), dtype=complex)
        res = op.apply(vec)
        for t in sp.degrees:
            if np.any(res[t]):
                out[(s, t)] = res[t]
    return out


# ---------------------------------------------------------------------------
# elementary operators


def basis_creation(space: TruncatedFockSpace, label: int) -> GradedOperator:
    """``l(e_label)``, cached on the space."""
    cache = space.__dict__.setdefault("_ladder_cache", {})
    if ("c", label) not in cache:
        cache[("c", label)] = creation_op(space, space.one_particle(label))
    return cache[("c", label)]


def basis_annihilation(space: TruncatedFockSpace, label: int) -> GradedOperator:
    """``l*(e_label)``, cached on the space."""
    cache = space.__dict__.setdefault("_ladder_cache", {})
    if ("a", label) not in cache:
        cache[("a", label)] = annihilation_op(space, space.one_particle(label))
    return cache[("a", label)]


def creation_op(space: TruncatedFockSpace, h: np.ndarray) -> GradedOperator:
    """Left creation ``xi -> h (x) xi``."""
    h = np.asarray(h).reshape(-1, 1)
    if h.shape[0] != space.one_particle_dim:
        raise ValueError("one-particle vector has wrong dimension")
    blocks = {(n, n + 1): np.kron(h, np.eye(space.block_dim(n))) for n in range(space.cutoff)}
    return GradedOperator(space, blocks, {1: space.cutoff - 1})


def annihilation_op(space: TruncatedFockSpace, h: np.ndarray) -> GradedOperator:
    """q-adjoint of :func:`creation_op`; defined on the quotient when ``q = +-1``."""
    return creation_op(space, h).adjoint()


def explicit_annihilation(space: TruncatedFockSpace, h: np.ndarray) -> GradedOperator:
    """Sum formula ``sum_j q^{j-1} <h, f_j> f_1..^f_j..f_n`` used as an independent check."""
    h = np.asarray(h)
    q = space.q
    dim = space.one_particle_dim
    blocks = {}
    for n in range(1, space.cutoff + 1):
        mat = np.zeros((space.block_dim(n - 1), space.block_dim(n)), dtype=complex)
        for col, word in enumerate(itertools.product(range(dim), repeat=n)):
            for j, a in enumerate(word):
                coeff = np.conj(h[a]) * (q**j if j else 1.0)
                if coeff == 0:
                    continue
                rest = word[:j] + word[j + 1 :]
                row = int(np.ravel_multi_index(rest, (dim,) * (n - 1))) if rest else 0
                mat[row, col] += coeff
        blocks[(n, n - 1)] = mat
    return GradedOperator(space, blocks, {-1: space.cutoff})


def gaussian_op(space: TruncatedFockSpace, weights: WeightProfile, k: int) -> GradedOperator:
    """``g_{q,k} = lam_k l(e_k) + mu_k l*(e_{-k})``."""
    if not 1 <= k <= space.m or k > weights.m:
        raise ValueError(f"generator {k} needs e_{k} and e_{-k} in the basis")
    lam, mu = weights.lam[k - 1], weights.mu[k - 1]
    return lam * basis_creation(space, k) + mu * basis_annihilation(space, -k)


def gaussian_adjoint(space: TruncatedFockSpace, weights: WeightProfile, k: int) -> GradedOperator:
    """``g*_{q,k} = lam_k l*(e_k) + mu_k l(e_{-k})`` assembled termwise."""
    lam, mu = weights.lam[k - 1], weights.mu[k - 1]
    return lam * basis_annihilation(space, k) + mu * basis_creation(space, -k)


def product(ops: Sequence[GradedOperator]) -> GradedOperator:
    if not ops:
        raise ValueError("empty product")
    out = ops[-1]
    for op in reversed(ops[:-1]):
        out = op @ out
    return out


# ---------------------------------------------------------------------------
# expectations


def apply_word(word: Sequence[GradedOperator], vec: FockVector, keep_degree: int | None = None) -> FockVector:
    """Apply ``word[0] ... word[-1]`` to ``vec`` (rightmost first).

    With ``keep_degree`` set, components that cannot return to degree
    ``<= keep_degree`` in the remaining steps are dropped; this is exact and
    lets long words run on small cutoffs.
    """
    out = vec
    steps = len(word)
    for pos, op in enumerate(reversed(word)):
        remaining = steps - pos - 1
        top = None if keep_degree is None else keep_degree + remaining
        out = op.apply(out, max_degree=top)
    return out


def vacuum_expectation(word: Sequence[GradedOperator]) -> complex:
    """``phi_q(x_1 ... x_L) = <Omega, x_1 ... x_L Omega>_q``; refuses inexact words."""
    if not word:
        return 1.0
    space = word[0].space
    out = apply_word(word, space.vacuum(), keep_degree=0)
    return complex(out[0][0])


def dense_vacuum_expectation(word: Sequence[GradedOperator]) -> complex:
    """Same quantity from full block matrices; used to cross-check."""
    space = word[0].space
    mat = word[0].to_dense()
    for op in word[1:]:
        mat = mat @ op.to_dense()
    return complex(mat[0, 0])


def _apply_polynomial(terms, vec: FockVector, r: int, adjoint: bool) -> FockVector:
    """Apply ``sum_t c_t (x) Y_t`` (or its adjoint) to a state with ``r*r`` columns per degree."""
    space = terms[0][1].space
    out = [np.zeros_like(v) for v in vec]
    for coeff, op, op_adj in terms:
        c = coeff.conj().T if adjoint else coeff
        moved = (op_adj if adjoint else op).apply(vec)
        for n in space.degrees:
            if not np.any(moved[n]):
                continue
            arr = moved[n].reshape(-1, r, r)
            out[n] = out[n] + np.einsum("bc,dca->dba", c, arr).reshape(-1, r * r)
    return out


def polynomial_lp_norm(terms: Sequence[tuple[np.ndarray, GradedOperator]], p: float) -> tuple[float, bool]:
    """``||sum_t c_t (x) Y_t||_p`` for ``tr (x) phi_q`` with ``phi_q`` tracial.

    Even integer ``p = 2k`` is computed exactly from GNS vectors (the cutoff
    must reach ``k`` times the operator degree).  ``p = inf`` is the truncated
    operator norm on the exact domain, which can only underestimate; the
    second return value flags that case.
    """
    terms = [(np.atleast_2d(np.asarray(c, dtype=complex)), op) for c, op in terms]
    space = terms[0][1].space
    r = terms[0][0].shape[0]
    if np.isinf(p):
        top = min(op.valid_domain for _, op in terms)
        mat = None
        for c, op in terms:
            piece = np.kron(c, op.q_orthonormal_matrix(top))
            mat = piece if mat is None else mat + piece
        return float(np.linalg.norm(mat, 2)), True
    k = int(round(p / 2))
    if p != 2 * k or k < 1:
        raise ValueError("exact tracial norms need p = inf or an even integer")
    full = [(c, op, op.adjoint()) for c, op in terms]
    vec = [np.zeros((space.block_dim(n), r * r), dtype=complex) for n in space.degrees]
    vec[0][0] = np.eye(r).reshape(-1)
    # (y*y)^{k/2} for even k; y (y*y)^{(k-1)/2} for odd k
    for _ in range(k // 2):
        vec = _apply_polynomial(full, vec, r, adjoint=False)
        vec = _apply_polynomial(full, vec, r, adjoint=True)
    if k % 2:
        vec = _apply_polynomial(full, vec, r, adjoint=False)
    total = sum(np.vdot(vec[n], space.gram(n) @ vec[n]).real for n in space.degrees)
    return float(max(total, 0.0) ** (1.0 / p)), False


# ---------------------------------------------------------------------------
# Wick products


def _letter_op(space: TruncatedFockSpace, weights: WeightProfile, label: int) -> GradedOperator:
    """Operator ``c(a)`` with ``c(a) Omega = e_a``: ``g_k/lam_k`` or ``g*_k/mu_k``."""
    k = abs(label)
    if label > 0:
        return (1.0 / weights.lam[k - 1]) * gaussian_op(space, weights, k)
    return (1.0 / weights.mu[k - 1]) * gaussian_adjoint(space, weights, k)


def _support_letters(space: TruncatedFockSpace, xi: FockVector, tol: float = 0.0) -> list[int]:
    letters = set()
    for n in space.degrees:
        if n == 0:
            continue
        nz = np.nonzero(np.abs(xi[n]) > tol)[0]
        for idx in nz:
            for a in np.unravel_index(idx, (space.one_particle_dim,) * n):
                letters.add(space.label(int(a)))
    return sorted(letters, key=space.index)


def wick_from_vector(
    space: TruncatedFockSpace, weights: WeightProfile, xi: FockVector, tol: float = 1e-10
) -> OperatorPolynomial:
    """Operator ``W`` in the algebra of the ``g``'s with ``W Omega = xi``.

    Solved in the monomial basis ``c(a_1)...c(a_n)`` over the letters that
    occur in ``xi``; the system is unitriangular in the degree filtration.
    """
    letters = _support_letters(space, xi)
    top = max((n for n in space.degrees if np.any(xi[n])), default=0)
    if top > space.cutoff:
        raise ValueError("vector beyond cutoff")
    if top == 0:
        return OperatorPolynomial(space, ((complex(xi[0][0]), ()),))
    singles = {a: _letter_op(space, weights, a) for a in letters}
    words = [()]
    for n in range(1, top + 1):
        words += list(itertools.product(letters, repeat=n))
    # monomial images c(w) Omega, built from the image of the shorter suffix
    images: dict[tuple, FockVector] = {(): space.vacuum()}
    for w in words[1:]:
        images[w] = singles[w[0]].apply(images[w[1:]], max_degree=top)
    rows = [(len(w), space.word_index(w)) for w in words]
    system = np.zeros((len(words), len(words)), dtype=complex)
    for col, w in enumerate(words):
        for r, (n, idx) in enumerate(rows):
            system[r, col] = images[w][n][idx]
    target = np.array([xi[n][idx] for n, idx in rows], dtype=complex)
    # every coordinate of xi must be representable over the chosen letters
    covered = sum(abs(xi[n][idx]) ** 2 for n, idx in rows)
    total = sum(float(np.vdot(xi[n], xi[n]).real) for n in space.degrees)
    if total - covered > tol:
        raise ValueError("vector has components outside the letter span")
    coeffs = np.linalg.solve(system, target)
    if np.linalg.norm(system @ coeffs - target) > tol * max(1.0, np.linalg.norm(target)):
        raise np.linalg.LinAlgError("singular Wick system")
    terms = tuple((complex(c), tuple(singles[a] for a in w)) for c, w in zip(coeffs, words) if c != 0)
    return OperatorPolynomial(space, terms)


def modular_s_one_particle(weights: WeightProfile, label: int) -> tuple[int, float]:
    """``S e_a = s_a e_{-a}``: returns ``(-a, s_a)`` with ``s_k = mu/lam``."""
    k = abs(label)
    lam, mu = weights.lam[k - 1], weights.mu[k - 1]
    return -label, (mu / lam if label > 0 else lam / mu)


def wick_decomposition(
    space: TruncatedFockSpace, weights: WeightProfile, xi_n: np.ndarray, n: int
) -> OperatorPolynomial:
    """``W(xi) = sum_k U_k (I (x) S^{(x)k}) R*_{n,k} xi`` for homogeneous ``xi``.

    ``U_k`` places creations on the first ``n-k`` legs and annihilations on
    the last ``k``; the annihilated legs pass through the one-particle
    ``S = J A^{-1/2}`` (the identity in the real tracial picture).
    """
    if n > space.cutoff:
        raise ValueError("degree beyond cutoff")
    xi_n = np.asarray(xi_n, dtype=complex).reshape(-1)
    if n == 0:
        return OperatorPolynomial(space, ((complex(xi_n[0]), ()),))
    dim = space.one_particle_dim
    create = {a: basis_creation(space, a) for a in space.labels}
    annih = {}
    for a in space.labels:
        b, s = modular_s_one_particle(weights, a)
        annih[a] = (s, basis_annihilation(space, b))
    terms = []
    for k in range(n + 1):
        r = build_shuffle_operator(space.q, dim, n, k, space.max_block_dim).matrix
        eta = r.T @ xi_n
        for idx in np.nonzero(np.abs(eta) > 0)[0]:
            word = [space.label(int(a)) for a in np.unravel_index(idx, (dim,) * n)]
            coeff = complex(eta[idx])
            ops = [create[a] for a in word[: n - k]]
            for a in word[n - k :]:
                scale, op = annih[a]
                coeff *= scale
                ops.append(op)
            terms.append((coeff, tuple(ops)))
    return OperatorPolynomial(space, tuple(terms))


def operator_difference(a, b, max_source: int) -> float:
    """Largest block-spectral norm of ``a - b`` on sources ``<= max_source``.

    Works for graded operators and polynomials alike.  When ``q = +-1`` both
    sides of each block are projected to the Gram range first.
    """
    sp = a.space
    left, right = action_blocks(a, max_source), action_blocks(b, max_source)
    worst = 0.0
    for key in set(left) | set(right):
        s, t = key
        blk = left.get(key, 0) - right.get(key, 0)
        if sp.degenerate:
            blk = sp.range_projector(t) @ blk @ sp.range_projector(s)
        if np.size(blk):
            worst = max(worst, float(np.linalg.norm(blk, 2)))
    return worst


# ---------------------------------------------------------------------------
# U_k norm


def partial_product_cq(q: float, terms: int = 50) -> float:
    """``prod_{n<=terms} (1-|q|^n)^{-1}``."""
    a = abs(q)
    return float(np.prod([1.0 / (1.0 - a**n) for n in range(1, terms + 1)]))


def creation_row_norm(space: TruncatedFockSpace, j: int) -> float:
    """``|| sum_i L(xi_i) L(xi_i)^* ||`` over a q-orthonormal basis of ``H^{(x)j}``.

    ``L(xi)`` is left creation by the tensor ``xi``.  The sum is evaluated
    degree by degree on the truncated space (exact for every degree, since
    the operator preserves degree) and measured in the q-norm.
    """
    if j == 0:
        return 1.0
    if j > space.cutoff:
        raise ValueError("tensor degree beyond cutoff")
    pj_inv = space.gram_solve(j, np.eye(space.block_dim(j)))
    worst = 0.0
    for t in range(j, space.cutoff + 1):
        low = t - j
        eye = np.eye(space.block_dim(low))
        # sum_{a,b} (P_j^{-1})_{ab} L(e_a) P_low^{-1} L(e_b)^T P_t
        inner = np.kron(pj_inv, space.gram_solve(low, eye)) if low else np.kron(pj_inv, eye)
        blk = inner @ space.gram(t)
        val = np.linalg.norm(space.gram_sqrt(t) @ blk @ space.gram_isqrt(t), 2)
        worst = max(worst, float(val))
    return worst


def empirical_Uk_norm(space: TruncatedFockSpace, n: int, k: int) -> float:
    """Row/column factorization norm of ``U_k`` on ``H_c^{n-k} (x)_h H_r^{k}``.

    ``U_k(u) = [L(xi_i)]_i (u (x) 1) [L(eta_j)^*]_j`` so the norm is at most the
    product of the row norm of creations and the column norm of annihilations.
    """
    if abs(space.q) >= 1:
        raise ValueError("U_k norm needs |q| < 1")
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    return float(np.sqrt(creation_row_norm(space, n - k) * creation_row_norm(space, k)))


def apply_split_operator(space: TruncatedFockSpace, u: np.ndarray, n: int, k: int) -> GradedOperator:
    """``U_k(sum u_ab e_a (x) e_b) = sum u_ab l(e_a1)..l(e_a{n-k}) l*(e_b1)..l*(e_bk)``."""
    dim = space.one_particle_dim
    u = np.asarray(u).reshape(dim ** (n - k), dim**k)
    cre = {a: basis_creation(space, a) for a in space.labels}
    ann = {a: basis_annihilation(space, a) for a in space.labels}
    out = GradedOperator.zero(space)
    for ia in range(u.shape[0]):
        left = [space.label(int(x)) for x in np.unravel_index(ia, (dim,) * (n - k))] if n - k else []
        for ib in range(u.shape[1]):
            if u[ia, ib] == 0:
                continue
            right = [space.label(int(x)) for x in np.unravel_index(ib, (dim,) * k)] if k else []
            ops = [cre[a] for a in left] + [ann[b] for b in right]
            term = product(ops) if ops else GradedOperator.identity(space)
            out = out + u[ia, ib] * term
    return out


def haagerup_cr_norm(space: TruncatedFockSpace, u: np.ndarray, n: int, k: int) -> float:
    """Norm of ``u`` in ``H_c^{(x)n-k} (x)_h H_r^{(x)k}`` with q-Gram weights."""
    dim = space.one_particle_dim
    u = np.asarray(u).reshape(dim ** (n - k), dim**k)
    return float(np.linalg.norm(space.gram_sqrt(n - k) @ u @ space.gram_sqrt(k).T, 2))


# ---------------------------------------------------------------------------
# modular theory


def modular_involution(space: TruncatedFockSpace, weights: WeightProfile, xi: FockVector) -> FockVector:
    """``S = J Delta^{1/2}`` on each ``H^{(x)n}`` with ``Delta = (A^{-1})^{(x)n}``.

    ``Delta^{1/2}`` scales ``e_k`` by ``mu_k/lam_k`` and ``e_{-k}`` by the inverse;
    ``J`` conjugates coefficients, reverses words and sends ``e_a`` to ``e_{-a}``.
    """
    dim = space.one_particle_dim
    scale = np.empty(dim)
    flip = np.empty(dim, dtype=np.intp)
    for a in space.labels:
        b, s = modular_s_one_particle(weights, a)
        scale[space.index(a)] = s
        flip[space.index(a)] = space.index(b)
    out = space.zero_vector()
    for n in space.degrees:
        if n == 0:
            out[0] = np.conj(xi[0])
            continue
        tensor = np.asarray(xi[n]).reshape((dim,) * n)
        for axis in range(n):
            shape = [1] * n
            shape[axis] = dim
            tensor = tensor * scale.reshape(shape)
        tensor = np.conj(tensor)
        # J: reverse legs and relabel a -> -a
        tensor = np.transpose(tensor, axes=tuple(reversed(range(n))))
        for axis in range(n):
            tensor = np.take(tensor, np.argsort(flip), axis=axis)
        out[n] = tensor.reshape(-1)
    return out


def modular_check(space: TruncatedFockSpace, weights: WeightProfile, words: Iterable[GradedOperator]) -> float:
    """Max q-norm residual of ``S(x Omega) - x* Omega`` over the given operators."""
    if space.degenerate:
        raise ValueError("modular check needs |q| < 1 (vacuum not separating at q = +-1)")
    worst = 0.0
    for x in words:
        xi = x.apply(space.vacuum())
        lhs = modular_involution(space, weights, xi)
        rhs = x.adjoint().apply(space.vacuum())
        diff = [a - b for a, b in zip(lhs, rhs)]
        worst = max(worst, space.norm(diff))
    return worst
