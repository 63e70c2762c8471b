"""Schur polynomials, their tensor-valued analogues, and randomized checks
of the moment-recursion bounds built on them.

Polynomials are dictionaries from exponent tuples to exact Python integers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MemoryBudgetError, SingularSystemError
from .symtensor import SymTensor, get_memory_budget, power, symmetrize_product

__all__ = [
    "Partition",
    "SymmetricPolynomial",
    "complete_homogeneous",
    "jacobi_trudi",
    "schur_bialternant",
    "tensor_schur",
    "hook_partition",
    "cramer_coefficients",
    "VerifyReport",
    "verify_scalar_bound",
    "verify_tensor_recursion",
    "verify_even_bound",
    "trial_rng",
]

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class Partition:
    """Non-increasing sequence of non-negative parts; trailing zeros dropped."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if any(p < 0 for p in parts):
            raise ValueError(f"partition parts must be non-negative: {parts}")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"partition parts must be non-increasing: {parts}")
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        object.__setattr__(self, "parts", parts)

    @classmethod
    def parse(cls, text: str) -> Partition:
        text = text.strip()
        if not text:
            return cls(())
        return cls(tuple(int(p) for p in text.split(",")))

    @property
    def size(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    def padded(self, n: int) -> tuple:
        if self.length > n:
            raise ValueError(f"partition {self.parts} has more than {n} nonzero parts")
        return self.parts + (0,) * (n - self.length)

    def __str__(self):
        return "(" + ",".join(map(str, self.parts)) + ")"


def hook_partition(first: int, ones: int) -> Partition:
    """``(first, 1, ..., 1)`` with ``ones`` trailing ones."""
    return Partition((first,) + (1,) * ones)


@dataclass
class SymmetricPolynomial:
    num_vars: int
    monomials: dict = field(default_factory=dict)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.num_vars,):
            raise ValueError(f"expected {self.num_vars} variables, got shape {x.shape}")
        if not self.monomials:
            return 0.0
        exps = np.array(list(self.monomials), dtype=np.int64)
        coefs = np.array([float(c) for c in self.monomials.values()])
        return float(coefs @ np.prod(x[None, :] ** exps, axis=1))

    def degrees(self) -> set:
        return {sum(e) for e in self.monomials}

    def is_zero(self) -> bool:
        return not self.monomials

    def coefficient_sum(self) -> int:
        return sum(self.monomials.values())

    def is_symmetric(self) -> bool:
        return all(
            self.monomials.get(tuple(e[i] for i in perm)) == c
            for e, c in self.monomials.items()
            for perm in itertools.permutations(range(self.num_vars))
        )


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(i + j for i, j in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return {e: c for e, c in out.items() if c != 0}


def _poly_axpy(acc: dict, scale: int, p: dict):
    for e, c in p.items():
        v = acc.get(e, 0) + scale * c
        if v:
            acc[e] = v
        else:
            acc.pop(e, None)


def complete_homogeneous(degree: int, n_vars: int) -> dict:
    """``y_degree``: every degree-``degree`` monomial with coefficient 1."""
    if degree < 0:
        return {}
    if math.comb(n_vars + degree - 1, degree) > get_memory_budget():
        raise MemoryBudgetError(math.comb(n_vars + degree - 1, degree), get_memory_budget(), "polynomial")
    out = {}
    for combo in itertools.combinations_with_replacement(range(n_vars), degree):
        e = [0] * n_vars
        for i in combo:
            e[i] += 1
        out[tuple(e)] = 1
    return out


def _permutation_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, cycle = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            cycle += 1
        if cycle % 2 == 0:
            sign = -sign
    return sign


def jacobi_trudi(lam: Partition, n_vars: int) -> SymmetricPolynomial:
    """``s_lambda`` as ``det[y_{lambda_i + j - i}]`` with exact integer coefficients."""
    if not isinstance(lam, Partition):
        lam = Partition(tuple(lam))
    if lam.length > n_vars:
        return SymmetricPolynomial(n_vars, {})
    size = lam.length
    if size == 0:
        return SymmetricPolynomial(n_vars, {(0,) * n_vars: 1})
    if math.comb(n_vars + lam.size - 1, lam.size) > get_memory_budget():
        raise MemoryBudgetError(math.comb(n_vars + lam.size - 1, lam.size), get_memory_budget(), "polynomial")
    # rows beyond the partition length contribute an identity block
    ys = {}
    for i in range(size):
        for j in range(size):
            d = lam.parts[i] + j - i
            if d not in ys:
                ys[d] = complete_homogeneous(d, n_vars)
    total: dict = {}
    for perm in itertools.permutations(range(size)):
        term = {(0,) * n_vars: 1}
        for i, j in enumerate(perm):
            factor = ys[lam.parts[i] + j - i]
            if not factor:
                term = {}
                break
            term = _poly_mul(term, factor)
        if term:
            _poly_axpy(total, _permutation_sign(perm), term)
    return SymmetricPolynomial(n_vars, total)


def schur_bialternant(lam: Partition, x) -> float:
    """``det[x_i^{lambda_j + n - j}] / det[x_i^{n - j}]``.

    Falls back to evaluating the Jacobi-Trudi polynomial when two entries of
    ``x`` coincide.
    """
    if not isinstance(lam, Partition):
        lam = Partition(tuple(lam))
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    if lam.length > n:
        return 0.0
    if n == 0:
        return 1.0
    if len(np.unique(x)) < n:
        return jacobi_trudi(lam, n)(x)
    parts = np.array(lam.padded(n))
    j = np.arange(n)
    numer = np.linalg.det(x[:, None] ** (parts + n - 1 - j)[None, :])
    denom = np.linalg.det(x[:, None] ** (n - 1 - j)[None, :])
    return float(numer / denom)


def tensor_schur(lam: Partition, vs) -> SymTensor:
    """Replace each monomial ``c prod x_i^a_i`` of ``s_lambda`` by ``c Sym(prod v_i^{(x)a_i})``."""
    if not isinstance(lam, Partition):
        lam = Partition(tuple(lam))
    vs = np.atleast_2d(np.asarray(vs, dtype=np.float64))
    k, dim = vs.shape
    poly = jacobi_trudi(lam, k)
    out = np.zeros(math.comb(dim + lam.size - 1, lam.size))
    # powers are reused across monomials
    cache = {}

    def pw(i, a):
        if (i, a) not in cache:
            cache[i, a] = power(vs[i], a)
        return cache[i, a]

    for exps, coef in poly.monomials.items():
        piece = SymTensor.scalar(1.0, dim)
        for i, a in enumerate(exps):
            if a:
                piece = symmetrize_product(piece, pw(i, a))
        out += float(coef) * piece.data
    return SymTensor(lam.size, dim, out)


def cramer_coefficients(k: int, t: int, xs) -> np.ndarray:
    """Coefficients ``c`` with ``x_i^t = sum_a c_a x_i^a`` for all ``i``.

    Solves the ``k x k`` Vandermonde system; raises ``SingularSystemError``
    when its condition number exceeds ``1e12``.
    """
    xs = np.asarray(xs, dtype=np.float64).reshape(-1)
    if xs.shape[0] != k:
        raise ValueError(f"expected {k} points, got {xs.shape[0]}")
    if t < k:
        raise ValueError("t must be at least k")
    vander = xs[:, None] ** np.arange(k)[None, :]
    cond = np.linalg.cond(vander)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularSystemError(f"Vandermonde system has condition number {cond:.3g}")
    return np.linalg.solve(vander, xs**t)


@dataclass
class VerifyReport:
    suite: str
    params: dict
    trials: int
    worst_ratio: float
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        params = " ".join(f"{k}={v}" for k, v in self.params.items())
        return (
            f"[{status}] {self.suite} {params} trials={self.trials} "
            f"worst_ratio={self.worst_ratio:.6g} violations={self.violations}"
        )


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream per (seed, trial), so trials can run in any order."""
    return np.random.default_rng([seed, trial])


def _ratio(lhs, rhs):
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


def verify_scalar_bound(k: int, t: int, trials: int = 1000, rng_seed: int = 0, w=None, x=None) -> VerifyReport:
    """Check ``|M_t| <= C(t, k-1) (2k)^k max_{s<k} |M_s|`` with ``M_s = sum w_i x_i^s``."""
    if t < k:
        raise ValueError("t must be at least k")
    factor = math.comb(t, k - 1) * (2 * k) ** k
    worst, violations = 0.0, 0
    for trial in range(trials):
        rng = trial_rng(rng_seed, trial)
        wt = rng.standard_normal(k) if w is None else np.asarray(w, dtype=np.float64)
        xt = rng.uniform(-1.0, 1.0, k) if x is None else np.asarray(x, dtype=np.float64)
        moments = np.array([np.dot(wt, xt**s) for s in range(k)])
        lhs = abs(np.dot(wt, xt**t))
        rhs = factor * np.abs(moments).max()
        ratio = _ratio(lhs, rhs)
        worst = max(worst, ratio)
        violations += lhs > rhs * (1 + 1e-12)
    return VerifyReport("scalar", {"k": k, "t": t, "seed": rng_seed}, trials, worst, int(violations))


def _random_ball_vectors(rng, k, dim):
    v = rng.standard_normal((k, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.uniform(0.0, 1.0, (k, 1)) ** (1.0 / dim)


def _moment(w, vs, s) -> SymTensor:
    out = SymTensor.zeros(s, vs.shape[1])
    for wi, vi in zip(w, vs):
        out = out + wi * power(vi, s)
    return out


def recursion_residual(w, vs, t: int) -> tuple[float, float]:
    """Return ``(||M_t - rhs||, ||M_t||)`` for the Schur-polynomial recursion."""
    w = np.asarray(w, dtype=np.float64)
    vs = np.atleast_2d(np.asarray(vs, dtype=np.float64))
    k = vs.shape[0]
    lhs = _moment(w, vs, t)
    rhs = SymTensor.zeros(t, vs.shape[1])
    for a in range(k):
        lam = hook_partition(t - k + 1, k - 1 - a)
        sign = (-1) ** (k + a + 1)
        rhs = rhs + sign * symmetrize_product(_moment(w, vs, a), tensor_schur(lam, vs))
    return (lhs - rhs).norm2(), lhs.norm2()


def verify_tensor_recursion(k: int, t: int, dim: int, trials: int = 100, rng_seed: int = 0, zero_weights=False) -> VerifyReport:
    """Check ``M_t == Sym(sum_a (-1)^{k+a+1} M_a (x) s_(t-k+1, 1^{k-1-a})(v))``.

    A trial passes when the residual is at most ``1e-8 (1 + ||M_t||)``;
    ``worst_ratio`` is the largest residual divided by that allowance.
    """
    if t < k:
        raise ValueError("t must be at least k")
    worst, violations = 0.0, 0
    for trial in range(trials):
        rng = trial_rng(rng_seed, trial)
        vs = _random_ball_vectors(rng, k, dim)
        w = np.zeros(k) if zero_weights else rng.standard_normal(k)
        resid, scale = recursion_residual(w, vs, t)
        ratio = resid / (1e-8 * (1.0 + scale))
        worst = max(worst, ratio)
        violations += ratio > 1.0
    return VerifyReport("recursion", {"k": k, "t": t, "dim": dim, "seed": rng_seed}, trials, worst, int(violations))


def _moment_norms(w, vs, orders) -> np.ndarray:
    # ||sum_i w_i v_i^{(x)s}||^2 = sum_ij w_i w_j (v_i . v_j)^s
    gram = vs @ vs.T
    ww = np.outer(w, w)
    return np.sqrt(np.maximum([np.sum(ww * gram**s) for s in orders], 0.0))


def verify_even_bound(k: int, t_even: int, dim: int, trials: int = 1000, rng_seed: int = 0, w=None, vs=None) -> VerifyReport:
    """Check ``||M_t|| <= C(t, k-1) (2k)^k max_{even s < 2k} ||M_s||`` for even ``t >= 2k``."""
    if t_even % 2 or t_even < 2 * k:
        raise ValueError("t must be even and at least 2k")
    factor = math.comb(t_even, k - 1) * (2 * k) ** k
    worst, violations = 0.0, 0
    for trial in range(trials):
        rng = trial_rng(rng_seed, trial)
        vt = _random_ball_vectors(rng, k, dim) if vs is None else np.atleast_2d(np.asarray(vs, dtype=np.float64))
        wt = rng.standard_normal(k) if w is None else np.asarray(w, dtype=np.float64)
        lower = _moment_norms(wt, vt, range(0, 2 * k, 2)).max()
        lhs = _moment_norms(wt, vt, [t_even])[0]
        rhs = factor * lower
        worst = max(worst, _ratio(lhs, rhs))
        violations += lhs > rhs * (1 + 1e-12) + 1e-300
    return VerifyReport("even", {"k": k, "t": t_even, "dim": dim, "seed": rng_seed}, trials, worst, int(violations))
