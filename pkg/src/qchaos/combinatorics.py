"""Permutations, inversion counts and minimal coset representatives.

Permutations are tuples in one-line notation over ``1..n``.  ``compose(p, s)``
applies ``s`` first, i.e. ``compose(p, s)[i] = p[s[i]]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

Permutation = tuple[int, ...]


def _check(p: Sequence[int]) -> Permutation:
    p = tuple(int(v) for v in p)
    if sorted(p) != list(range(1, len(p) + 1)):
        raise ValueError(f"not a permutation of 1..{len(p)}: {p}")
    return p


def identity(n: int) -> Permutation:
    return tuple(range(1, n + 1))


def compose(p: Sequence[int], s: Sequence[int]) -> Permutation:
    """Return ``p o s`` (apply ``s`` first)."""
    if len(p) != len(s):
        raise ValueError("length mismatch")
    return tuple(p[s[i] - 1] for i in range(len(s)))


def inverse(p: Sequence[int]) -> Permutation:
    out = [0] * len(p)
    for i, v in enumerate(p, start=1):
        out[v - 1] = i
    return tuple(out)


def inversion_count(p: Sequence[int]) -> int:
    """Number of pairs ``i < j`` with ``p(i) > p(j)``."""
    p = _check(p)
    n = len(p)
    return sum(1 for i in range(n) for j in range(i + 1, n) if p[i] > p[j])


def permutations(n: int) -> Iterator[Permutation]:
    """All of S_n in lexicographic order of one-line notation."""
    return itertools.permutations(range(1, n + 1))


def sign(p: Sequence[int]) -> int:
    return -1 if inversion_count(p) % 2 else 1


@dataclass(frozen=True)
class ShuffleSet:
    n: int
    k: int
    reps: tuple[Permutation, ...]

    def __len__(self) -> int:
        return len(self.reps)


def is_shuffle(p: Sequence[int], k: int) -> bool:
    """True if ``p`` is increasing on positions ``1..n-k`` and ``n-k+1..n``."""
    n = len(p)
    head, tail = p[: n - k], p[n - k :]
    return all(a < b for a, b in zip(head, head[1:])) and all(a < b for a, b in zip(tail, tail[1:]))


def enumerate_coset_reps(n: int, k: int) -> ShuffleSet:
    """Minimal-inversion representatives of the cosets of S_{n-k} x S_k.

    These are the (n-k, k)-shuffles: permutations that are order preserving on
    the position blocks ``{1..n-k}`` and ``{n-k+1..n}``.  Every ``pi`` in S_n
    factors uniquely as ``compose(sigma, rho)`` with ``sigma`` a shuffle and
    ``rho`` in the Young subgroup, and lengths add.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    reps = []
    # choose the values sitting at the first n-k positions; both blocks increasing
    for head in itertools.combinations(range(1, n + 1), n - k):
        tail = tuple(v for v in range(1, n + 1) if v not in head)
        reps.append(head + tail)
    reps.sort()
    return ShuffleSet(n, k, tuple(reps))


def young_subgroup(n: int, k: int) -> list[Permutation]:
    """S_{n-k} x S_k acting on position blocks, lexicographic."""
    out = []
    for a in itertools.permutations(range(1, n - k + 1)):
        for b in itertools.permutations(range(n - k + 1, n + 1)):
            out.append(a + b)
    out.sort()
    return out


def permute_tensor_index(p: Sequence[int], idx: Sequence) -> tuple:
    """Reindex a word: ``(a_1..a_n) -> (a_{p(1)}, ..., a_{p(n)})``."""
    if len(p) != len(idx):
        raise ValueError(f"permutation of length {len(p)} applied to index of length {len(idx)}")
    return tuple(idx[v - 1] for v in p)


def q_factorial(n: int, q: float) -> float:
    return math.prod(sum(q**i for i in range(j)) for j in range(1, n + 1))


def q_binomial(n: int, k: int, q: float) -> float:
    """Gaussian binomial coefficient evaluated at ``q`` (polynomial form)."""
    coeffs = q_binomial_coefficients(n, k)
    return sum(c * q**i for i, c in enumerate(coeffs))


def q_binomial_coefficients(n: int, k: int) -> list[int]:
    """Coefficient list of the Gaussian binomial [n choose k]_q."""
    if not 0 <= k <= n:
        return [0]
    # Pascal-type recursion [n,k] = [n-1,k-1] + q^k [n-1,k]
    table: dict[tuple[int, int], list[int]] = {}

    def rec(nn: int, kk: int) -> list[int]:
        if kk == 0 or kk == nn:
            return [1]
        key = (nn, kk)
        if key not in table:
            a = rec(nn - 1, kk - 1)
            b = [0] * kk + rec(nn - 1, kk)
            size = max(len(a), len(b))
            table[key] = [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(size)]
        return table[key]

    return rec(n, k)
