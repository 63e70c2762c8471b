"""Empirical Hermite moment tensors ``E[y H_m(X)]`` and their analytic values."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from threadpoolctl import threadpool_limits

from .datagen import ReluNetwork, Samples
from .errors import SampleSizeOverflow, ShapeError
from .hermite import hermite_all, relu_coeff
from .symtensor import SymTensor, _multi_indices, _weights, check_budget, power, rank_of

__all__ = [
    "MomentEstimate",
    "estimate_moment",
    "estimate_moments",
    "moment_sums",
    "sample_size",
    "label_moment_bound",
    "analytic_moment",
    "pairwise_reduce",
]

# bytes of per-chunk monomial tables kept in flight
_CHUNK_BYTES = 48 * 2**20


@dataclass(frozen=True)
class MomentEstimate:
    tensor: SymTensor
    order: int
    num_samples: int
    target_error: float | None = None
    confidence: float | None = None

    def __post_init__(self):
        if self.tensor.order != self.order:
            raise ShapeError("tensor order does not match estimate order")
        if self.num_samples < 1:
            raise ValueError("an estimate needs at least one sample")


class _Plan:
    """Index bookkeeping for one (dim, m_max) pair.

    Coordinates are split into a left and a right group.  For each group we
    list every multiplicity vector of total degree <= m_max; a moment entry
    ``alpha = (alpha_L, alpha_R)`` is then one cell of the product of a
    left column and a right column, so all entries of a given order come
    out of a handful of matrix products.
    """

    def __init__(self, dim: int, m_max: int):
        self.dim = dim
        self.m_max = m_max
        self.n_left = (dim + 1) // 2
        self.left = _group_indices(self.n_left, m_max)
        self.right = _group_indices(dim - self.n_left, m_max) if dim > 1 else None
        self.blocks = []
        for m in range(m_max + 1):
            count = check_budget(dim, m, "moment tensor")
            inv_sqrt_w = 1.0 / np.sqrt(_weights(dim, m))
            per_order = []
            if self.right is None:
                per_order.append((self.left[1][m], None, np.zeros((1, 1), dtype=np.int64), inv_sqrt_w[:1].reshape(1, 1)))
            else:
                for s in range(m + 1):
                    li = self.left[1][s]
                    ri = self.right[1][m - s]
                    left_alphas = self.left[0][li]
                    right_alphas = self.right[0][ri]
                    full = np.concatenate(
                        [
                            np.broadcast_to(left_alphas[:, None, :], (len(left_alphas), len(right_alphas), self.n_left)),
                            np.broadcast_to(right_alphas[None, :, :], (len(left_alphas), len(right_alphas), dim - self.n_left)),
                        ],
                        axis=2,
                    )
                    ranks = rank_of(full.reshape(-1, dim)).reshape(len(left_alphas), len(right_alphas))
                    per_order.append((li, ri, ranks, inv_sqrt_w[ranks]))
            self.blocks.append((count, per_order))
        width = len(self.left[0]) + (len(self.right[0]) if self.right else 0)
        self.chunk = int(max(256, min(65536, _CHUNK_BYTES // (8 * max(width, 1)))))


@lru_cache(maxsize=32)
def _group_indices(n: int, m_max: int):
    """All multiplicity vectors over ``n`` coordinates with degree <= m_max,
    plus, per degree, the slice of rows having that degree."""
    alphas = np.concatenate([_multi_indices(n, m) for m in range(m_max + 1)])
    degree = alphas.sum(axis=1)
    # alphas are grouped by degree, so each degree is a contiguous slice
    bounds = np.searchsorted(degree, np.arange(m_max + 2))
    by_degree = [slice(int(bounds[m]), int(bounds[m + 1])) for m in range(m_max + 1)]
    return alphas, by_degree


def _group_position(alphas: np.ndarray, m_max: int) -> np.ndarray:
    n = alphas.shape[1]
    # rows of degree m start after the C(n+m-1, n) rows of lower degree
    start = np.array([math.comb(n + m - 1, n) for m in range(m_max + 1)])
    degree = alphas.sum(axis=1)
    return start[degree] + rank_of(alphas)


@lru_cache(maxsize=32)
def _group_split(n: int, m_max: int):
    """Row positions in the two half-groups whose product gives each row."""
    alphas = _group_indices(n, m_max)[0]
    half = n // 2
    return half, _group_position(alphas[:, :half], m_max), _group_position(alphas[:, half:], m_max)


@lru_cache(maxsize=16)
def _plan(dim: int, m_max: int) -> _Plan:
    return _Plan(dim, m_max)


def _monomials(tables: list, m_max: int) -> np.ndarray:
    """``out[r, i] = prod_j tables[j][alpha_r[j], i]`` over a coordinate group.

    Rows follow ``_group_indices(len(tables), m_max)``.  Built by halving the
    group so each level costs one gather-multiply per row.
    """
    if len(tables) == 1:
        return tables[0]
    half, ia, ib = _group_split(len(tables), m_max)
    a = _monomials(tables[:half], m_max)
    b = _monomials(tables[half:], m_max)
    out = a[ia]
    out *= b[ib]
    return out


def _chunk_sums(plan: _Plan, x: np.ndarray, y: np.ndarray) -> list:
    # samples run along the last axis so row gathers stay contiguous
    values = hermite_all(plan.m_max, x.T)
    tables = [np.ascontiguousarray(values[:, j, :]) for j in range(plan.dim)]
    left = _monomials(tables[: plan.n_left], plan.m_max) * y[None, :]
    right = _monomials(tables[plan.n_left:], plan.m_max) if plan.right else None
    if right is None:
        totals = left.sum(axis=1)
        return [totals[m:m + 1] * scale[0, 0] for m, (_, ((_, _, _, scale),)) in enumerate(plan.blocks)]
    # one product per left degree s covers every order m >= s at once
    products = [left[plan.left[1][s]] @ right[: plan.right[1][plan.m_max - s].stop].T for s in range(plan.m_max + 1)]
    sums = []
    for m, (count, per_order) in enumerate(plan.blocks):
        out = np.empty(count)
        for s, (_, ri, ranks, scale) in enumerate(per_order):
            out[ranks] = products[s][:, ri] * scale
        sums.append(out)
    return sums


def pairwise_reduce(parts, add):
    """Sum an ordered stream with a fixed binary tree.

    The tree depends only on the position of each part, so the rounding is
    the same whether the parts were produced serially or in parallel.
    """
    stack = []
    for part in parts:
        level = 0
        while stack and stack[-1][0] == level:
            _, prev = stack.pop()
            part = add(prev, part)
            level += 1
        stack.append((level, part))
    if not stack:
        raise ValueError("nothing to reduce")
    total = stack.pop()[1]
    while stack:
        total = add(stack.pop()[1], total)
    return total


def moment_sums(x, y, m_max: int, threads: int = 1) -> list:
    """``[sum_i y_i H_m(x_i) for m in 0..m_max]`` as compressed arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeError(f"inconsistent samples: x {x.shape}, y {y.shape}")
    n, dim = x.shape
    if n == 0:
        raise ValueError("cannot estimate moments from an empty sample set")
    plan = _plan(dim, m_max)
    starts = range(0, n, plan.chunk)

    def work(lo):
        return _chunk_sums(plan, x[lo:lo + plan.chunk], y[lo:lo + plan.chunk])

    def add(a, b):
        return [u + v for u, v in zip(a, b)]

    with threadpool_limits(limits=1):
        if threads > 1 and len(starts) > 1:
            with ThreadPoolExecutor(threads) as pool:
                return pairwise_reduce(pool.map(work, starts), add)
        return pairwise_reduce(map(work, starts), add)


def estimate_moments(samples: Samples, m_max: int, subspace_basis=None, threads: int = 1) -> list:
    """Empirical ``T_m = mean_i y_i H_m(z_i)`` for every ``m <= m_max``.

    With ``subspace_basis`` (``d x k``, orthonormal columns) the Hermite
    tensors are taken of ``z = B^T x`` in ``k`` dimensions.
    """
    x = samples.x
    if subspace_basis is not None:
        basis = np.asarray(subspace_basis, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[0] != samples.dim:
            raise ShapeError(f"basis of shape {basis.shape} does not fit dim {samples.dim}")
        x = x @ basis
    sums = moment_sums(x, samples.y, m_max, threads)
    n = len(samples)
    return [
        MomentEstimate(SymTensor(m, x.shape[1], s / n), m, n)
        for m, s in enumerate(sums)
    ]


def estimate_moment(samples: Samples, m: int, subspace_basis=None, threads: int = 1) -> MomentEstimate:
    # the batched kernel computes every lower order too; they are cheap relative to order m
    return estimate_moments(samples, m, subspace_basis, threads)[m]


def label_moment_bound(m: int, weight_l1: float = 1.0) -> float:
    """``||F(X)||_m <= sqrt(m) sum_i |w_i|`` with the implied constant set to 1."""
    return math.sqrt(max(m, 1)) * weight_l1


def sample_size(m: int, d_eff: int, target_error: float, confidence: float, y_moment_bound: float, multiplier: float = 1.0) -> int:
    """Heuristic sample count for estimating an order-``m`` moment.

    ``N = multiplier * C(d+m, m) * e^{m/t} * bound^2 / (tau^2 delta^2)`` with
    ``t = max(m, 3)`` and every implied constant equal to 1.
    """
    if min(d_eff, target_error, confidence, y_moment_bound, multiplier) <= 0 or m < 0:
        raise ValueError("sample_size arguments must be positive")
    t = max(m, 3)
    log_n = (
        math.log(multiplier)
        + math.log(math.comb(d_eff + m, m))
        + m / t
        + 2 * math.log(y_moment_bound)
        - 2 * math.log(confidence)
        - 2 * math.log(target_error)
    )
    if log_n >= 63 * math.log(2):
        raise SampleSizeOverflow(
            f"sample size e^{log_n:.1f} overflows; use a smaller order m or effective dimension"
        )
    return max(1, math.ceil(math.exp(log_n) * (1 - 1e-14)))


def analytic_moment(net: ReluNetwork, m: int) -> SymTensor:
    """``M_m = c_m sum_i w_i v_i^{(x)m}``."""
    check_budget(net.dim, m, "moment tensor")
    c = relu_coeff(m)
    if c == 0.0:
        return SymTensor.zeros(m, net.dim)
    data = np.zeros(math.comb(net.dim + m - 1, m))
    for w, v in zip(net.weights, net.directions):
        data += w * power(v, m).data
    return SymTensor(m, net.dim, c * data)
