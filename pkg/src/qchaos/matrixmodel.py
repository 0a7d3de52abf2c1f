"""Finite-n CAR/CCR matrix model for the q = +-1 gaussians.

The site algebra is ``N = (+)_{|k|<=m} M_2`` (components ordered like the Fock
labels ``1..m, -1..-m``), realized as ``4m x 4m`` block-diagonal matrices.
The model at size ``n`` is ``M_{2^n} (x) N^{(x)n}`` with state density
``D_n = (I/2^n) (x) D_site^{(x)n}`` and

    u_n(x) = sqrt(4m/n) sum_j v_j (x) pi_j(x).

``N^{(x)n}`` splits over component tuples ``(c_1..c_n)``; every operator in
the algebra generated by the ``u_n``'s is block diagonal for that split, so
operators are stored as one ``4^n x 4^n`` matrix per tuple (spin factor
first, then the ``n`` site ``M_2`` factors).
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .qfock import WeightProfile

MAX_BLOCK_SIDE = 4096
MAX_MOMENT_N = 16

FLIP = np.array([[0, 1], [1, 0]], dtype=np.int64)
E12 = np.array([[0, 1], [0, 0]], dtype=float)


def spin_z(q: int) -> np.ndarray:
    return np.array([[1, 0], [0, q]], dtype=np.int64)


def _check_q(q) -> int:
    if q not in (-1, 1):
        raise ValueError("the matrix model exists only for q = -1 or q = +1")
    return int(q)


@dataclass(frozen=True)
class SpinUnitary:
    k: int
    q: int
    matrix: np.ndarray


@functools.lru_cache(maxsize=None)
def _v_matrix(n: int, k: int, q: int) -> np.ndarray:
    mats = [spin_z(q)] * (k - 1) + [FLIP] + [np.eye(2, dtype=np.int64)] * (n - k)
    out = np.ones((1, 1), dtype=np.int64)
    for mat in mats:
        out = np.kron(out, mat)
    out.setflags(write=False)
    return out


def build_v(n: int, k: int, q: int) -> SpinUnitary:
    """``v_k = Z_q^{(x)(k-1)} (x) X (x) I^{(x)(n-k)}`` with ``Z_q = diag(1, q)``."""
    q = _check_q(q)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n > 12:
        raise ValueError("spin chains above n = 12 are not materialized")
    return SpinUnitary(k, q, _v_matrix(n, k, q))


def v_signed_permutation(n: int, k: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """``v_k e_b = signs[b] e_{perm[b]}`` on basis index ``b`` (site 1 is the top bit).

    Integer data only, so relations can be checked exactly for chains whose
    dense matrices would be too large.
    """
    q = _check_q(q)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    b = np.arange(2**n, dtype=np.int64)
    perm = b ^ (1 << (n - k))
    # Z_q on sites 1..k-1 contributes q per set bit
    ones = np.zeros_like(b)
    for site in range(1, k):
        ones += (b >> (n - site)) & 1
    signs = np.where(ones % 2 == 1, q, 1).astype(np.int64)
    return perm, signs


def set_partitions(size: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings: ``labels[t]`` is the block of position ``t``."""
    if size == 0:
        yield ()
        return

    def rec(prefix: list[int], top: int):
        if len(prefix) == size:
            yield tuple(prefix)
            return
        for b in range(top + 2):
            prefix.append(b)
            yield from rec(prefix, max(top, b))
            prefix.pop()

    yield from rec([0], 0)


class MatrixModelContext:
    """Model of size ``n`` with ``m`` generators at ``q = +-1``."""

    def __init__(self, q: int, m: int, n: int, weights: WeightProfile, max_block_side: int = MAX_BLOCK_SIDE):
        self.q = _check_q(q)
        if m < 1 or n < 1:
            raise ValueError("need m >= 1 and n >= 1")
        if weights.m < m:
            raise ValueError("weight profile shorter than m")
        self.m = m
        self.n = n
        self.weights = weights.restrict(m)
        self.max_block_side = max_block_side
        self.components = tuple(range(1, m + 1)) + tuple(-k for k in range(1, m + 1))
        sigma = self.weights.sigma
        diag = []
        for c in self.components:
            s = sigma[abs(c) - 1]
            diag += [2 - s, s]
        self.psi_density = np.array(diag)
        self.site_density = self.psi_density / (4 * m)

    def __repr__(self) -> str:
        return f"MatrixModelContext(q={self.q}, m={self.m}, n={self.n})"

    @property
    def site_dim(self) -> int:
        return 4 * self.m

    @property
    def num_components(self) -> int:
        return 2 * self.m

    @property
    def block_side(self) -> int:
        return 4**self.n

    def component_index(self, label: int) -> int:
        if 1 <= label <= self.m:
            return label - 1
        if 1 <= -label <= self.m:
            return self.m - label - 1
        raise ValueError(f"component {label} outside +-1..+-{self.m}")

    def layout(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.num_components), repeat=self.n))

    def psi(self, x: np.ndarray) -> complex:
        return complex(np.sum(self.psi_density * np.diag(x)))

    def site_state(self, x: np.ndarray) -> complex:
        """``(psi/4m)(x)``."""
        return complex(np.sum(self.site_density * np.diag(x)))

    def site_block(self, x: np.ndarray, c: int) -> np.ndarray:
        return x[2 * c : 2 * c + 2, 2 * c : 2 * c + 2]

    def block_density(self, key: tuple[int, ...]) -> np.ndarray:
        """Diagonal of ``D_n`` on the block ``key`` (spin part first)."""
        cache = self.__dict__.setdefault("_density_cache", {})
        if key not in cache:
            cache[key] = self._block_density(key)
        return cache[key]

    def _block_density(self, key: tuple[int, ...]) -> np.ndarray:
        site = np.ones(1)
        for c in key:
            site = np.kron(site, self.site_density[2 * c : 2 * c + 2])
        return np.kron(np.full(2**self.n, 1.0 / 2**self.n), site)

    def dense_density(self) -> np.ndarray:
        site = np.ones(1)
        for _ in range(self.n):
            site = np.kron(site, self.site_density)
        return np.kron(np.full(2**self.n, 1.0 / 2**self.n), site)


# ---------------------------------------------------------------------------
# site elements


def component_letter(ctx: MatrixModelContext, label: int) -> np.ndarray:
    """``delta_label (x) e_12`` in ``N``."""
    x = np.zeros((ctx.site_dim, ctx.site_dim), dtype=complex)
    c = ctx.component_index(label)
    x[2 * c, 2 * c + 1] = 1.0
    return x


def build_generator_symbol(ctx: MatrixModelContext, k: int) -> np.ndarray:
    """``b_k = sqrt(lam_k^2 + mu_k^2)/2 (delta_k + i delta_{-k}) (x) e_12``."""
    if not 1 <= k <= ctx.m:
        raise ValueError(f"generator {k} outside 1..{ctx.m}")
    lam, mu = ctx.weights.lam[k - 1], ctx.weights.mu[k - 1]
    pref = np.sqrt(lam**2 + mu**2) / 2
    return pref * (component_letter(ctx, k) + 1j * component_letter(ctx, -k))


def site_modular_ratio(ctx: MatrixModelContext, k: int) -> float:
    """``(2 - sigma_k)/sigma_k = lam_k^2/mu_k^2``."""
    s = ctx.weights.sigma[k - 1]
    return float((2 - s) / s)


# ---------------------------------------------------------------------------
# block operators


@dataclass
class ModelOperator:
    """Block-diagonal operator; ``coeff_dim > 1`` means an ``M_r`` coefficient factor in front."""

    context: object
    blocks: dict = field(default_factory=dict)
    coeff_dim: int = 1

    def adjoint(self) -> "ModelOperator":
        return ModelOperator(self.context, {k: v.conj().T for k, v in self.blocks.items()}, self.coeff_dim)

    def __add__(self, other: "ModelOperator") -> "ModelOperator":
        if other.context is not self.context or other.coeff_dim != self.coeff_dim:
            raise ValueError("incompatible model operators")
        blocks = dict(self.blocks)
        for k, v in other.blocks.items():
            blocks[k] = blocks[k] + v if k in blocks else v
        return ModelOperator(self.context, blocks, self.coeff_dim)

    def __mul__(self, scalar: complex) -> "ModelOperator":
        return ModelOperator(self.context, {k: scalar * v for k, v in self.blocks.items()}, self.coeff_dim)

    __rmul__ = __mul__

    def __matmul__(self, other: "ModelOperator") -> "ModelOperator":
        if other.context is not self.context or other.coeff_dim != self.coeff_dim:
            raise ValueError("incompatible model operators")
        blocks = {k: self.blocks[k] @ other.blocks[k] for k in self.blocks.keys() & other.blocks.keys()}
        return ModelOperator(self.context, blocks, self.coeff_dim)

    def density(self, key) -> np.ndarray:
        return np.kron(np.ones(self.coeff_dim), self.context.block_density(key))

    def expectation(self) -> complex:
        """``(Tr (x) phi_n)`` with the coefficient trace unnormalized."""
        return complex(sum(np.sum(self.density(k) * np.diag(b)) for k, b in self.blocks.items()))


def _site_factor(ctx: MatrixModelContext, x: np.ndarray, key: tuple[int, ...], j: int) -> np.ndarray:
    """``pi_j(x)`` on the site part of block ``key`` (``2^n`` square)."""
    left = np.eye(2 ** (j - 1))
    right = np.eye(2 ** (ctx.n - j))
    return np.kron(np.kron(left, ctx.site_block(x, key[j - 1])), right)


def u_n_block(ctx: MatrixModelContext, x: np.ndarray, key: tuple[int, ...]) -> np.ndarray:
    out = np.zeros((ctx.block_side, ctx.block_side), dtype=complex)
    for j in range(1, ctx.n + 1):
        blk = ctx.site_block(x, key[j - 1])
        if not np.any(blk):
            continue
        out += np.kron(_v_matrix(ctx.n, j, ctx.q), _site_factor(ctx, x, key, j))
    return np.sqrt(4 * ctx.m / ctx.n) * out


def _check_size(ctx: MatrixModelContext) -> None:
    if ctx.block_side > ctx.max_block_side:
        raise ValueError(f"block side {ctx.block_side} exceeds cap {ctx.max_block_side}")


def u_n(ctx: MatrixModelContext, x: np.ndarray) -> ModelOperator:
    _check_size(ctx)
    return ModelOperator(ctx, {key: u_n_block(ctx, x, key) for key in ctx.layout()})


def u_n_word(ctx: MatrixModelContext, letters: Sequence[np.ndarray], p: float | None = None) -> ModelOperator:
    """``u_n(x_1) ... u_n(x_L)``, dressed as ``D^{1/2p} (.) D^{1/2p}`` when ``p`` is given."""
    if not letters:
        raise ValueError("empty word")
    ops = {}
    out = None
    for x in letters:
        key = id(x)
        if key not in ops:
            ops[key] = u_n(ctx, x)
        out = ops[key] if out is None else out @ ops[key]
    return dress(out, p) if p is not None else out


def dress(op: ModelOperator, p: float) -> ModelOperator:
    """``D^{1/2p} op D^{1/2p}``; ``p = inf`` leaves the operator unchanged."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if np.isinf(p):
        return op
    blocks = {}
    for key, blk in op.blocks.items():
        w = op.density(key) ** (1.0 / (2 * p))
        blocks[key] = w[:, None] * blk * w[None, :]
    return ModelOperator(op.context, blocks, op.coeff_dim)


def schatten_from_blocks(blocks: Sequence[np.ndarray], p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    svals = [np.linalg.svd(b, compute_uv=False) for b in blocks if b.size]
    if not svals:
        return 0.0
    allv = np.concatenate(svals)
    if np.isinf(p):
        return float(allv.max())
    return float(np.sum(allv**p) ** (1.0 / p))


def weighted_lp_norm(op: ModelOperator, p: float, dressed: bool = False) -> float:
    """``|| D^{1/2p} Q D^{1/2p} ||_{S_p}`` computed blockwise."""
    if p < 1:
        raise ValueError("p must be >= 1")
    target = op if dressed else dress(op, p)
    return schatten_from_blocks(list(target.blocks.values()), p)


def with_coefficients(terms: Sequence[tuple[np.ndarray, ModelOperator]]) -> ModelOperator:
    """``sum_t c_t (x) op_t`` with ``c_t`` scalars or ``r x r`` matrices."""
    first = np.atleast_2d(np.asarray(terms[0][0]))
    r = first.shape[0]
    ctx = terms[0][1].context
    blocks: dict = {}
    for coeff, op in terms:
        c = np.atleast_2d(np.asarray(coeff, dtype=complex))
        if c.shape != (r, r):
            raise ValueError("coefficients must share one square shape")
        if op.coeff_dim != 1:
            raise ValueError("operator already carries coefficients")
        for key, blk in op.blocks.items():
            piece = np.kron(c, blk) if r > 1 else c[0, 0] * blk
            blocks[key] = blocks[key] + piece if key in blocks else piece
    return ModelOperator(ctx, blocks, r)


def coupled_polynomial(ctx: MatrixModelContext, coeffs: dict, letters: dict) -> ModelOperator:
    """``sum_i x_i (x) u_n(b_{i_1}) ... u_n(b_{i_d})`` for ``coeffs[i] = x_i``."""
    singles = {k: u_n(ctx, v) for k, v in letters.items()}
    terms = []
    for idx, c in coeffs.items():
        op = singles[idx[0]]
        for i in idx[1:]:
            op = op @ singles[i]
        terms.append((c, op))
    return with_coefficients(terms)


# ---------------------------------------------------------------------------
# tensor products of independent copies


class ProductContext:
    """``d`` independent models; blocks are keyed by concatenated tuples."""

    def __init__(self, contexts: Sequence[MatrixModelContext]):
        if not contexts:
            raise ValueError("need at least one copy")
        self.contexts = tuple(contexts)
        side = math.prod(c.block_side for c in contexts)
        if side > contexts[0].max_block_side:
            raise ValueError(f"tensor block side {side} exceeds cap")

    def block_density(self, key: tuple[tuple[int, ...], ...]) -> np.ndarray:
        cache = self.__dict__.setdefault("_density_cache", {})
        if key in cache:
            return cache[key]
        out = np.ones(1)
        for ctx, part in zip(self.contexts, key):
            out = np.kron(out, ctx.block_density(part))
        cache[key] = out
        return out


def split_sizes(n: int, d: int) -> tuple[int, ...]:
    """Contiguous block sizes, as equal as possible, larger ones last."""
    if not 1 <= d <= n:
        raise ValueError("need 1 <= d <= n")
    base, extra = divmod(n, d)
    return tuple(base + (1 if t >= d - extra else 0) for t in range(d))


def decoupled_tensor_operator(
    contexts: Sequence[MatrixModelContext], coeffs: dict, letters_per_copy: Sequence[dict]
) -> ModelOperator:
    """``sum_i x_i (x) u^{(1)}(b_{i_1}) (x) ... (x) u^{(d)}(b_{i_d})`` on independent copies."""
    prod_ctx = ProductContext(contexts)
    singles = [{k: u_n(ctx, v) for k, v in letters.items()} for ctx, letters in zip(contexts, letters_per_copy)]
    keys = list(itertools.product(*[ctx.layout() for ctx in contexts]))
    r = np.atleast_2d(np.asarray(next(iter(coeffs.values())))).shape[0]
    blocks = {}
    for key in keys:
        acc = None
        for idx, c in coeffs.items():
            mat = np.ones((1, 1), dtype=complex)
            for t, i in enumerate(idx):
                mat = np.kron(mat, singles[t][i].blocks[key[t]])
            c = np.atleast_2d(np.asarray(c, dtype=complex))
            piece = np.kron(c, mat) if r > 1 else c[0, 0] * mat
            acc = piece if acc is None else acc + piece
        blocks[key] = acc
    return ModelOperator(prod_ctx, blocks, r)


# ---------------------------------------------------------------------------
# moments


@functools.lru_cache(maxsize=None)
def _v_pattern_trace(pattern: tuple[int, ...], q: int) -> float:
    """Normalized trace of ``v_{j_1} ... v_{j_L}`` for any injective site labelling of ``pattern``."""
    counts = np.bincount(pattern)
    if np.any(counts % 2):
        return 0.0
    sites = len(counts)
    mats = [_v_matrix(sites, b + 1, q) for b in pattern]
    prod = mats[0]
    for mat in mats[1:]:
        prod = prod @ mat
    return float(np.trace(prod)) / 2**sites


def moment_factorized(ctx: MatrixModelContext, letters: Sequence[np.ndarray]) -> complex:
    """``phi_n(u_n(x_1) ... u_n(x_L))`` summed over set partitions of positions.

    Each partition contributes ``(n)_{#blocks}`` identical terms: the trace of
    the v-pattern times the product over blocks of ``(psi/4m)`` of the ordered
    product of the letters placed on that site.
    """
    length = len(letters)
    if ctx.n > MAX_MOMENT_N:
        raise ValueError(f"n above {MAX_MOMENT_N}")
    if length == 0:
        return 1.0
    if length > 10:
        raise ValueError("word too long for partition enumeration")
    total = 0.0 + 0.0j
    for pattern in set_partitions(length):
        blocks = max(pattern) + 1
        if blocks > ctx.n:
            continue
        tau = _v_pattern_trace(pattern, ctx.q)
        if tau == 0.0:
            continue
        weight = 1.0 + 0.0j
        for b in range(blocks):
            prod = np.eye(ctx.site_dim, dtype=complex)
            for t in range(length):
                if pattern[t] == b:
                    prod = prod @ letters[t]
            weight *= ctx.site_state(prod)
            if weight == 0:
                break
        if weight == 0:
            continue
        total += math.perm(ctx.n, blocks) * tau * weight
    return complex((4 * ctx.m / ctx.n) ** (length / 2) * total)


def moment_bruteforce(ctx: MatrixModelContext, letters: Sequence[np.ndarray]) -> complex:
    """Same moment by enumerating every site tuple ``(j_1..j_L)``."""
    length = len(letters)
    total = 0.0 + 0.0j
    for sites in itertools.product(range(ctx.n), repeat=length):
        v = np.eye(2**ctx.n, dtype=np.int64)
        for j in sites:
            v = v @ _v_matrix(ctx.n, j + 1, ctx.q)
        tau = np.trace(v) / 2**ctx.n
        if tau == 0:
            continue
        weight = 1.0 + 0.0j
        for s in set(sites):
            prod = np.eye(ctx.site_dim, dtype=complex)
            for t in range(length):
                if sites[t] == s:
                    prod = prod @ letters[t]
            weight *= ctx.site_state(prod)
        total += tau * weight
    return complex((4 * ctx.m / ctx.n) ** (length / 2) * total)


def dense_u_n(ctx: MatrixModelContext, x: np.ndarray) -> np.ndarray:
    """Full ``2^n (4m)^n`` matrix of ``u_n(x)``; only for tiny models."""
    side = 2**ctx.n * ctx.site_dim**ctx.n
    if side > 4096:
        raise ValueError("dense model too large")
    out = np.zeros((side, side), dtype=complex)
    for j in range(1, ctx.n + 1):
        site = np.kron(np.kron(np.eye(ctx.site_dim ** (j - 1)), x), np.eye(ctx.site_dim ** (ctx.n - j)))
        out += np.kron(_v_matrix(ctx.n, j, ctx.q), site)
    return np.sqrt(4 * ctx.m / ctx.n) * out


def moment_dense(ctx: MatrixModelContext, letters: Sequence[np.ndarray]) -> complex:
    density = ctx.dense_density()
    cache = {}
    prod = None
    for x in letters:
        if id(x) not in cache:
            cache[id(x)] = dense_u_n(ctx, x)
        prod = cache[id(x)] if prod is None else prod @ cache[id(x)]
    return complex(np.sum(density * np.diag(prod)))


def moment_blocks(ctx: MatrixModelContext, letters: Sequence[np.ndarray]) -> complex:
    """Moment from the block-diagonal representation."""
    return u_n_word(ctx, letters).expectation()


# ---------------------------------------------------------------------------
# combinatorics of the averaging argument


def pair_split_probability(n: int) -> float:
    """Exhaustive ``Prob(k in A, l not in A)`` over ``|A| = n/2`` subsets (k=1, l=2)."""
    if n % 2 or n < 2:
        raise ValueError("n must be even and >= 2")
    hits = total = 0
    for subset in itertools.combinations(range(n), n // 2):
        total += 1
        hits += 0 in subset and 1 not in subset
    return hits / total


def ordered_partition_probability(n: int, d: int) -> float:
    """Exhaustive ``Prob(j_t in A_t for all t)`` over ordered equal partitions, ``j = (0..d-1)``."""
    if n % d:
        raise ValueError("n must be divisible by d")
    size = n // d
    hits = total = 0

    def rec(remaining: tuple[int, ...], assigned: list):
        nonlocal hits, total
        if not remaining:
            total += 1
            hits += all(t in assigned[t] for t in range(d))
            return
        first_free = len(assigned)
        if first_free == d - 1:
            assigned.append(set(remaining))
            rec((), assigned)
            assigned.pop()
            return
        for block in itertools.combinations(remaining, size):
            rest = tuple(v for v in remaining if v not in block)
            assigned.append(set(block))
            rec(rest, assigned)
            assigned.pop()

    rec(tuple(range(n)), [])
    return hits / total


def pair_split_closed_form(n: int) -> float:
    return n / (4 * (n - 1))


def ordered_partition_closed_form(n: int, d: int) -> float:
    return n**d * math.factorial(n - d) / (d**d * math.factorial(n))
