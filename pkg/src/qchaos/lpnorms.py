"""Schatten norms of weighted reshapings and the K/J (and SK/SJ) functionals.

A coefficient tensor ``x`` of degree ``d`` over indices ``1..m`` is stored as
an array of shape ``(m,)*d`` (scalar coefficients) or ``(m,)*d + (r, r)``.
A leg assignment is a tuple over ``{'c', 'r'}``: column legs become row
indices of the reshaped matrix with weight ``lam^{1/p'} mu^{1/p}``, row legs
become column indices with weight ``lam^{1/p} mu^{1/p'}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .combinatorics import inversion_count, permutations, sign
from .qfock import WeightProfile

INDEX_MODES = ("no-repetition", "full")
SYMMETRIES = (None, "symmetric", "antisymmetric")


def conjugate_exponent(p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1)


def _inv(p: float) -> float:
    return 0.0 if np.isinf(p) else 1.0 / p


@dataclass(frozen=True)
class CoefficientTensor:
    """``entries`` has shape ``(m,)*d`` or ``(m,)*d + (r, r)`` for ``M_r`` coefficients."""

    entries: np.ndarray
    d: int
    index_mode: str = "full"
    symmetry: str | None = None

    def __post_init__(self):
        arr = np.asarray(self.entries)
        object.__setattr__(self, "entries", arr)
        d = self.d
        if d < 1 or arr.ndim not in (d, d + 2):
            raise ValueError("entries must have d index axes plus an optional square coefficient block")
        if arr.ndim == d + 2 and arr.shape[-1] != arr.shape[-2]:
            raise ValueError("matrix coefficients must be square")
        if self.index_mode not in INDEX_MODES:
            raise ValueError(f"index_mode must be one of {INDEX_MODES}")
        if self.symmetry not in SYMMETRIES:
            raise ValueError(f"symmetry must be one of {SYMMETRIES}")
        if len(set(arr.shape[:d])) != 1:
            raise ValueError("all tensor legs must share the index bound m")
        if self.index_mode == "no-repetition":
            for idx in itertools.product(range(self.m), repeat=d):
                if len(set(idx)) < d and np.any(arr[idx] != 0):
                    raise ValueError(f"entry {idx} has a repeated index")
        if self.symmetry is not None and not np.allclose(
            _symmetrize(arr, d, self.symmetry), math.factorial(d) * arr, atol=1e-12
        ):
            raise ValueError(f"tensor is not {self.symmetry}")

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def coeff_shape(self) -> tuple[int, ...]:
        return self.entries.shape[self.d :]

    def with_entries(self, entries: np.ndarray, symmetry: str | None = None) -> "CoefficientTensor":
        return CoefficientTensor(entries, self.d, self.index_mode, symmetry)

    def as_dict(self) -> dict:
        """``{multi-index: coefficient}`` over nonzero entries (0-based indices)."""
        out = {}
        for idx in itertools.product(range(self.m), repeat=self.d):
            val = self.entries[idx]
            if np.any(val != 0):
                out[idx] = val
        return out


@dataclass(frozen=True)
class NormReport:
    norm_name: str
    value: float
    p: float
    method: str
    parameters: dict = field(default_factory=dict)
    tolerance: float = 0.0
    truncation_flag: bool = False


def schatten_norm(a: np.ndarray, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    s = np.linalg.svd(np.atleast_2d(a), compute_uv=False)
    if s.size == 0:
        return 0.0
    if np.isinf(p):
        return float(s[0])
    return float(np.sum(s**p) ** (1.0 / p))


def leg_weights(weights: WeightProfile, p: float, leg: str) -> np.ndarray:
    lam, mu = weights.lam, weights.mu
    pp = conjugate_exponent(p)
    if leg == "c":
        return lam ** _inv(pp) * mu ** _inv(p)
    if leg == "r":
        return lam ** _inv(p) * mu ** _inv(pp)
    raise ValueError(f"leg must be 'c' or 'r', got {leg!r}")


def assignment_weight_tensor(weights: WeightProfile, p: float, assignment: Sequence[str]) -> np.ndarray:
    """Product of per-leg weights as a ``(m,)*d`` array."""
    d = len(assignment)
    out = np.ones((weights.m,) * d)
    for t, leg in enumerate(assignment):
        shape = [1] * d
        shape[t] = weights.m
        out = out * leg_weights(weights, p, leg).reshape(shape)
    return out


def _reshape(x: CoefficientTensor, assignment: Sequence[str], scaled: np.ndarray) -> np.ndarray:
    d, m = x.d, x.m
    rows = [t for t in range(d) if assignment[t] == "c"]
    cols = [t for t in range(d) if assignment[t] == "r"]
    cs = x.coeff_shape
    if cs:
        arr = np.transpose(scaled, rows + [d] + cols + [d + 1])
        return arr.reshape(m ** len(rows) * cs[0], m ** len(cols) * cs[1])
    arr = np.transpose(scaled, rows + cols)
    return arr.reshape(m ** len(rows), m ** len(cols))


def _check_weights(x: CoefficientTensor, weights: WeightProfile) -> None:
    if weights.m < x.m:
        raise ValueError("weight profile shorter than index bound")


def reshape_matrix(x: CoefficientTensor, assignment: Sequence[str], weights: WeightProfile, p: float) -> np.ndarray:
    """Weighted reshape of ``x`` for a leg assignment (``'c'`` -> rows)."""
    _check_weights(x, weights)
    if len(assignment) != x.d:
        raise ValueError("assignment length must equal the degree")
    w = assignment_weight_tensor(weights.restrict(x.m), p, assignment)
    scaled = x.entries * w.reshape(w.shape + (1,) * len(x.coeff_shape))
    return _reshape(x, assignment, scaled)


def kj_assignment(d: int, k: int) -> tuple[str, ...]:
    """``RC^{d,k}``: first ``k`` legs are columns, the rest rows."""
    if not 0 <= k <= d:
        raise ValueError(f"need 0 <= k <= d, got k={k}, d={d}")
    return ("c",) * k + ("r",) * (d - k)


def matricization_norm(x: CoefficientTensor, k: int, weights: WeightProfile, p: float) -> float:
    return schatten_norm(reshape_matrix(x, kj_assignment(x.d, k), weights, p), p)


def rc_norm(x: CoefficientTensor, assignment: Sequence[str], weights: WeightProfile, p: float) -> float:
    return schatten_norm(reshape_matrix(x, assignment, weights, p), p)


def kj_assignments(d: int) -> list[tuple[str, ...]]:
    return [kj_assignment(d, k) for k in range(d + 1)]


def all_assignments(d: int) -> list[tuple[str, ...]]:
    return [tuple(a) for a in itertools.product("cr", repeat=d)]


def _max_report(name, x, weights, p, assignments) -> NormReport:
    vals = [rc_norm(x, a, weights, p) for a in assignments]
    best = int(np.argmax(vals))
    return NormReport(name, float(vals[best]), p, "exact", {"argmax": "".join(assignments[best])})


def j_norm(x: CoefficientTensor, weights: WeightProfile, p: float) -> NormReport:
    return _max_report("J", x, weights, p, kj_assignments(x.d))


def sj_norm(x: CoefficientTensor, weights: WeightProfile, p: float) -> NormReport:
    return _max_report("SJ", x, weights, p, all_assignments(x.d))


def _lam_mu_tensor(x: CoefficientTensor, weights: WeightProfile) -> np.ndarray:
    """``lam_i mu_i = prod_t lam_{i_t} mu_{i_t}``, broadcastable against ``x.entries``."""
    per_leg = weights.lam[: x.m] * weights.mu[: x.m]
    out = np.ones((x.m,) * x.d)
    for t in range(x.d):
        shape = [1] * x.d
        shape[t] = x.m
        out = out * per_leg.reshape(shape)
    return out.reshape(out.shape + (1,) * len(x.coeff_shape))


def bracket(x: CoefficientTensor, z: CoefficientTensor, weights: WeightProfile) -> complex:
    """``<x, z> = sum_i lam_i mu_i tr(x_i^* z_i)``."""
    return complex(np.sum(_lam_mu_tensor(x, weights) * np.conj(x.entries) * z.entries))


# ---------------------------------------------------------------------------
# K-type norms: convex solver and duality certificates


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 3000
    step: float = 1.0
    tol: float = 1e-9
    gap_target: float = 0.02
    random_certificates: int = 32
    seed: int = 0


def _project_lp_ball(s: np.ndarray, r: float) -> np.ndarray:
    """Euclidean projection of a nonnegative vector onto the ``l_r`` unit ball."""
    if np.isinf(r):
        return np.minimum(s, 1.0)
    norm = np.sum(s**r) ** (1.0 / r)
    if norm <= 1.0:
        return s.copy()
    if r == 1.0:
        # simplex-type projection
        u = np.sort(s)[::-1]
        css = np.cumsum(u)
        idx = np.nonzero(u * np.arange(1, len(u) + 1) > (css - 1.0))[0][-1]
        theta = (css[idx] - 1.0) / (idx + 1)
        return np.maximum(s - theta, 0.0)
    if r == 2.0:
        return s / norm

    def solve_y(eta: float) -> np.ndarray:
        lo, hi = np.zeros_like(s), s.copy()
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            too_big = mid + eta * r * mid ** (r - 1) > s
            hi = np.where(too_big, mid, hi)
            lo = np.where(too_big, lo, mid)
        return 0.5 * (lo + hi)

    lo, hi = 0.0, 1.0
    while np.sum(solve_y(hi) ** r) > 1.0:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.sum(solve_y(mid) ** r) > 1.0:
            lo = mid
        else:
            hi = mid
    return solve_y(hi)


def prox_schatten(a: np.ndarray, p: float, gamma: float) -> np.ndarray:
    """Proximal map of ``gamma ||.||_{S_p}`` via Moreau on the singular values."""
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    pp = conjugate_exponent(p)
    shrunk = s - gamma * _project_lp_ball(s / gamma, pp)
    return (u * shrunk) @ vh


def _dual_element(a: np.ndarray, p: float) -> np.ndarray:
    """``G`` with ``||G||_{S_p'} = 1`` and ``Re tr(G^* a) = ||a||_p``."""
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros_like(a)
    if p == 1:
        g = np.where(s > s[0] * 1e-12, 1.0, 0.0)
    elif np.isinf(p):
        g = np.zeros_like(s)
        g[0] = 1.0
    else:
        g = s ** (p - 1)
        g = g / np.sum(g ** conjugate_exponent(p)) ** (1.0 / conjugate_exponent(p))
    return (u * g) @ vh


class _Problem:
    """Variables ``y_a = w_a * x^a`` (tensor shaped) with ``sum_a y_a / w_a = x``."""

    def __init__(self, x: CoefficientTensor, weights: WeightProfile, p: float, assignments):
        self.x = x
        self.p = p
        self.assignments = list(assignments)
        extra = (1,) * len(x.coeff_shape)
        self.w = [assignment_weight_tensor(weights.restrict(x.m), p, a).reshape((x.m,) * x.d + extra) for a in self.assignments]
        self.a = [1.0 / w for w in self.w]
        self.asq = sum(a**2 for a in self.a)
        self.rows = [[t for t in range(x.d) if a[t] == "c"] for a in self.assignments]
        self.cols = [[t for t in range(x.d) if a[t] == "r"] for a in self.assignments]

    def to_matrix(self, k: int, y: np.ndarray) -> np.ndarray:
        return _reshape(self.x, self.assignments[k], y)

    def from_matrix(self, k: int, mat: np.ndarray) -> np.ndarray:
        x = self.x
        d, m, cs = x.d, x.m, x.coeff_shape
        rows, cols = self.rows[k], self.cols[k]
        if cs:
            order = rows + [d] + cols + [d + 1]
            shape = [m] * len(rows) + [cs[0]] + [m] * len(cols) + [cs[1]]
        else:
            order = rows + cols
            shape = [m] * d
        arr = mat.reshape(shape)
        return np.transpose(arr, np.argsort(order))

    def project(self, ys: list[np.ndarray]) -> list[np.ndarray]:
        resid = self.x.entries - sum(a * y for a, y in zip(self.a, ys))
        return [y + a * resid / self.asq for a, y in zip(self.a, ys)]

    def objective(self, ys) -> float:
        return float(sum(schatten_norm(self.to_matrix(k, y), self.p) for k, y in enumerate(ys)))

    def feasibility(self, ys) -> float:
        return float(np.max(np.abs(self.x.entries - sum(a * y for a, y in zip(self.a, ys)))))


def _dual_ratio(x: CoefficientTensor, z_entries: np.ndarray, weights: WeightProfile, p: float, assignments) -> float:
    # any z in the full index space is a valid functional; entries off x's support are ignored by the bracket
    z = CoefficientTensor(z_entries, x.d)
    pp = conjugate_exponent(p)
    denom = max(rc_norm(z, a, weights, pp) for a in assignments)
    if denom == 0:
        return 0.0
    return abs(bracket(x, z, weights)) / denom


def _lower_bound(x, weights, p, assignments, candidates: list[np.ndarray], rng, samples: int) -> float:
    """Best ``|<x, z>| / J'_{p'}(z)`` over the candidates, per-leg dual elements and random ``z``."""
    lm = _lam_mu_tensor(x, weights)
    prob = _Problem(x, weights, p, assignments)
    candidates = list(candidates)
    # z whose p'-reshape on leg k is the norming functional of x's p-reshape
    for k in range(len(assignments)):
        g = _dual_element(prob.to_matrix(k, prob.w[k] * x.entries), p)
        candidates.append(prob.from_matrix(k, g) * prob.w[k] / lm)
    best = 0.0
    for z in candidates:
        best = max(best, _dual_ratio(x, z, weights, p, assignments))
    for _ in range(samples):
        z = rng.standard_normal(x.entries.shape) + 1j * rng.standard_normal(x.entries.shape)
        if x.symmetry is not None:
            z = _symmetrize(z, x.d, x.symmetry)
        best = max(best, _dual_ratio(x, z, weights, p, assignments))
    return best


def _symmetrize(z: np.ndarray, d: int, kind: str) -> np.ndarray:
    out = np.zeros_like(z)
    for perm in permutations(d):
        axes = tuple(v - 1 for v in perm) + tuple(range(d, z.ndim))
        out = out + (sign(perm) if kind == "antisymmetric" else 1) * np.transpose(z, axes)
    return out


def _k_type(name: str, x: CoefficientTensor, weights: WeightProfile, p: float, assignments, config: SolverConfig) -> tuple[NormReport, NormReport]:
    if not 1 <= p <= 2:
        raise ValueError("K-type norms are defined here for 1 <= p <= 2")
    _check_weights(x, weights)
    prob = _Problem(x, weights, p, assignments)
    legs = [schatten_norm(prob.to_matrix(k, prob.w[k] * x.entries), p) for k in range(len(assignments))]
    start = int(np.argmin(legs))
    zs = [np.zeros_like(x.entries, dtype=complex) for _ in assignments]
    zs[start] = prob.w[start] * x.entries.astype(complex)
    gamma = config.step * max(float(np.max(np.abs(x.entries))), 1e-300)
    best_val, best_ys = legs[start], [z.copy() for z in zs]
    grads: list[np.ndarray] = []
    converged = False
    iters = 0
    for iters in range(1, config.max_iter + 1):
        ys = prob.project(zs)
        vs = []
        gs = []
        for k, (y, z) in enumerate(zip(ys, zs)):
            arg = prob.to_matrix(k, 2 * y - z)
            v = prox_schatten(arg, p, gamma)
            vs.append(prob.from_matrix(k, v))
            gs.append(prob.from_matrix(k, (arg - v) / gamma))
        step = max(float(np.max(np.abs(v - y))) for v, y in zip(vs, ys))
        zs = [z + v - y for z, v, y in zip(zs, vs, ys)]
        if iters % 25 == 0 or step < config.tol:
            cand = prob.project(zs)
            val = prob.objective(cand)
            if val < best_val:
                best_val, best_ys = val, cand
            grads = gs
        if step < config.tol * max(1.0, gamma):
            converged = True
            break
    # dual candidates z = Lambda/(lam mu) with Lambda = w_k G_k
    lm = _lam_mu_tensor(x, weights)
    cands = [prob.w[k] * g / lm for k, g in enumerate(grads)]
    if grads:
        cands.append(sum(prob.w[k] * g for k, g in enumerate(grads)) / (len(grads) * lm))
    rng = np.random.default_rng(config.seed)
    lower = _lower_bound(x, weights, p, assignments, cands, rng, config.random_certificates)
    gap = (best_val - lower) / best_val if best_val > 0 else 0.0
    params = {
        "iterations": iters,
        "converged": converged,
        "feasibility": prob.feasibility(best_ys),
        "gap": gap,
        "certified": bool(gap <= config.gap_target),
        "start_leg": "".join(assignments[start]),
    }
    upper = NormReport(name, float(best_val), p, "optimized-upper", params, config.gap_target)
    low = NormReport(name, float(lower), p, "duality-lower", params, config.gap_target)
    return upper, low


def k_norm(x: CoefficientTensor, weights: WeightProfile, p: float, config: SolverConfig = SolverConfig()) -> NormReport:
    return _k_type("K", x, weights, p, kj_assignments(x.d), config)[0]


def k_norm_lower(x: CoefficientTensor, weights: WeightProfile, p: float, config: SolverConfig = SolverConfig()) -> NormReport:
    return _k_type("K", x, weights, p, kj_assignments(x.d), config)[1]


def k_norm_pair(x: CoefficientTensor, weights: WeightProfile, p: float, config: SolverConfig = SolverConfig()) -> tuple[NormReport, NormReport]:
    """Upper and lower reports from one solver run."""
    return _k_type("K", x, weights, p, kj_assignments(x.d), config)


def sk_norm(x: CoefficientTensor, weights: WeightProfile, p: float, config: SolverConfig = SolverConfig()) -> NormReport:
    return _k_type("SK", x, weights, p, all_assignments(x.d), config)[0]


def sk_norm_pair(x: CoefficientTensor, weights: WeightProfile, p: float, config: SolverConfig = SolverConfig()) -> tuple[NormReport, NormReport]:
    return _k_type("SK", x, weights, p, all_assignments(x.d), config)


# ---------------------------------------------------------------------------
# coefficient twist


def apply_permutation_twist(x: CoefficientTensor, q: float) -> CoefficientTensor:
    """``y_j = sum_pi q^{i(pi)} x_{j o pi^{-1}}``; for ``d = 2`` this is ``x_ij + q x_ji``."""
    if x.index_mode != "no-repetition":
        raise ValueError("the twist is defined on no-repetition tensors")
    d = x.d
    out = np.zeros(x.entries.shape, dtype=np.result_type(x.entries, float))
    for perm in permutations(d):
        power = inversion_count(perm)
        weight = 1.0 if power == 0 else q**power
        if weight == 0:
            continue
        axes = tuple(v - 1 for v in perm) + tuple(range(d, x.entries.ndim))
        out = out + weight * np.transpose(x.entries, axes)
    return x.with_entries(out)
