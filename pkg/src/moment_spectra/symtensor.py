"""Symmetric tensors stored once per multiset of coordinates.

An order-``m`` symmetric tensor over ``R^n`` is kept as one value per
multiplicity vector ``alpha`` (``alpha_j`` counts how often coordinate ``j``
occurs, ``sum(alpha) == m``).  Entries are laid out in colexicographic order
of the corresponding non-decreasing index tuples, which is equivalent to
ordering by ``alpha[n-1]`` first, then recursively by the remaining
coordinates.  Dense inner products are recovered with the multinomial weight
``m! / prod(alpha_j!)`` of each entry.
"""

from __future__ import annotations

import contextlib
import math
import struct
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import FormatError, MemoryBudgetError, ShapeError

__all__ = [
    "SymTensor",
    "entry_count",
    "max_degree_within_budget",
    "multi_indices",
    "index_weights",
    "rank_of",
    "power",
    "inner",
    "norm2",
    "contract",
    "gram_matrix",
    "symmetrize_product",
    "get_memory_budget",
    "set_memory_budget",
    "memory_budget",
]

DEFAULT_BUDGET = 2**28
_budget = DEFAULT_BUDGET

# exact 64-bit factorials stop at 20!
_EXACT_WEIGHT_MAX_ORDER = 20


def get_memory_budget() -> int:
    return _budget


def set_memory_budget(entries: int) -> int:
    """Set the global budget on compressed entries; returns the previous one."""
    global _budget
    if entries < 1:
        raise ValueError("memory budget must be positive")
    previous, _budget = _budget, int(entries)
    return previous


@contextlib.contextmanager
def memory_budget(entries: int):
    previous = set_memory_budget(entries)
    try:
        yield
    finally:
        set_memory_budget(previous)


def entry_count(dim: int, order: int) -> int:
    """Number of multisets of size ``order`` drawn from ``dim`` coordinates."""
    if dim < 1 or order < 0:
        raise ShapeError(f"invalid shape: dim={dim}, order={order}")
    return math.comb(dim + order - 1, order)


def max_degree_within_budget(dim: int) -> int:
    """Largest ``D`` whose orders ``0..D`` together fit the budget: ``C(dim+D, D)``."""
    def fits(deg):
        return math.comb(dim + deg, deg) <= _budget

    lo, hi = 0, 1
    while fits(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (mid, hi) if fits(mid) else (lo, mid)
    return lo


def check_budget(dim: int, order: int, what: str = "tensor") -> int:
    count = entry_count(dim, order)
    if count > _budget:
        raise MemoryBudgetError(count, _budget, what)
    return count


@lru_cache(maxsize=256)
def _multi_indices(dim: int, order: int) -> np.ndarray:
    if dim == 1:
        return np.array([[order]], dtype=np.int64)
    blocks = []
    for last in range(order + 1):
        head = _multi_indices(dim - 1, order - last)
        block = np.empty((head.shape[0], dim), dtype=np.int64)
        block[:, :-1] = head
        block[:, -1] = last
        blocks.append(block)
    out = np.concatenate(blocks)
    out.setflags(write=False)
    return out


def multi_indices(dim: int, order: int) -> np.ndarray:
    """All multiplicity vectors of the given order, one per row, colex order."""
    check_budget(dim, order)
    return _multi_indices(dim, order)


@lru_cache(maxsize=256)
def _weights(dim: int, order: int) -> np.ndarray:
    alphas = _multi_indices(dim, order)
    if order <= _EXACT_WEIGHT_MAX_ORDER:
        fact = np.array([math.factorial(i) for i in range(order + 1)], dtype=np.int64)
        w = (math.factorial(order) // np.prod(fact[alphas], axis=1)).astype(np.float64)
    else:
        w = np.exp(gammaln(order + 1) - gammaln(alphas + 1).sum(axis=1))
    w.setflags(write=False)
    return w


def index_weights(dim: int, order: int) -> np.ndarray:
    """Multinomial weight ``order! / prod(alpha_j!)`` of every entry."""
    check_budget(dim, order)
    return _weights(dim, order)


@lru_cache(maxsize=64)
def _binom_table(dim: int, order: int) -> np.ndarray:
    # table[j, s] = C(j + s, s); every value is <= entry_count(dim, order)
    table = np.empty((dim, order + 1), dtype=np.int64)
    for j in range(dim):
        for s in range(order + 1):
            table[j, s] = math.comb(j + s, s)
    return table


def rank_of(alphas: np.ndarray) -> np.ndarray:
    """Colex position of each multiplicity vector (rows of ``alphas``).

    Uses the hockey-stick form of the combinatorial number system, so no
    lookup table of all indices is needed.
    """
    alphas = np.asarray(alphas, dtype=np.int64)
    squeeze = alphas.ndim == 1
    alphas = np.atleast_2d(alphas)
    dim = alphas.shape[-1]
    cums = np.cumsum(alphas, axis=-1)
    order = int(cums[..., -1].max()) if cums.size else 0
    table = _binom_table(dim, order)
    j = np.arange(dim)
    upper = table[j, cums]
    prev = np.zeros_like(cums)
    prev[..., 1:] = cums[..., :-1]
    lower = table[j, prev]
    ranks = (upper - lower).sum(axis=-1)
    return ranks[0] if squeeze else ranks


@lru_cache(maxsize=128)
def _raise_table(dim: int, order: int) -> np.ndarray:
    """``table[r, j]`` = position of ``alpha_r + e_j`` among order+1 indices."""
    alphas = _multi_indices(dim, order)
    raised = alphas[:, None, :] + np.eye(dim, dtype=np.int64)[None, :, :]
    table = rank_of(raised)
    table.setflags(write=False)
    return table


class SymTensor:
    """Immutable symmetric tensor in multiset-compressed form."""

    __slots__ = ("order", "dim", "data")

    def __init__(self, order: int, dim: int, data):
        count = check_budget(dim, order)
        data = np.array(data, dtype=np.float64).reshape(-1)
        if data.shape[0] != count:
            raise ShapeError(
                f"order-{order} tensor over R^{dim} needs {count} entries, got {data.shape[0]}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor entries must be finite")
        data.setflags(write=False)
        self.order = int(order)
        self.dim = int(dim)
        self.data = data

    # constructors -------------------------------------------------------

    @classmethod
    def zeros(cls, order: int, dim: int) -> SymTensor:
        return cls(order, dim, np.zeros(check_budget(dim, order)))

    @classmethod
    def scalar(cls, value: float, dim: int = 1) -> SymTensor:
        return cls(0, dim, [value])

    @classmethod
    def from_entries(cls, order: int, dim: int, entries: dict) -> SymTensor:
        """Build from ``{alpha_tuple: value}``; missing entries are zero."""
        data = np.zeros(check_budget(dim, order))
        for alpha, value in entries.items():
            alpha = np.asarray(alpha, dtype=np.int64)
            if alpha.shape != (dim,) or alpha.sum() != order or (alpha < 0).any():
                raise ShapeError(f"bad multi-index {tuple(alpha)} for order {order}, dim {dim}")
            data[rank_of(alpha)] = value
        return cls(order, dim, data)

    # accessors ----------------------------------------------------------

    @property
    def alphas(self) -> np.ndarray:
        return _multi_indices(self.dim, self.order)

    @property
    def weights(self) -> np.ndarray:
        return _weights(self.dim, self.order)

    def __getitem__(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=np.int64)
        if alpha.shape != (self.dim,) or alpha.sum() != self.order:
            raise ShapeError(f"bad multi-index {tuple(alpha)}")
        return float(self.data[rank_of(alpha)])

    def entries(self) -> dict:
        return {tuple(int(a) for a in alpha): float(v) for alpha, v in zip(self.alphas, self.data)}

    def __repr__(self):
        return f"SymTensor(order={self.order}, dim={self.dim}, norm={self.norm2():.6g})"

    # arithmetic ---------------------------------------------------------

    def _check_same(self, other: SymTensor):
        if not isinstance(other, SymTensor):
            raise TypeError(f"expected SymTensor, got {type(other).__name__}")
        if (self.order, self.dim) != (other.order, other.dim):
            raise ShapeError(
                f"shape mismatch: (order {self.order}, dim {self.dim}) vs "
                f"(order {other.order}, dim {other.dim})"
            )

    def __add__(self, other: SymTensor) -> SymTensor:
        self._check_same(other)
        return SymTensor(self.order, self.dim, self.data + other.data)

    def __sub__(self, other: SymTensor) -> SymTensor:
        self._check_same(other)
        return SymTensor(self.order, self.dim, self.data - other.data)

    def __neg__(self) -> SymTensor:
        return SymTensor(self.order, self.dim, -self.data)

    def __mul__(self, scalar) -> SymTensor:
        return SymTensor(self.order, self.dim, self.data * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> SymTensor:
        return SymTensor(self.order, self.dim, self.data / float(scalar))

    def inner(self, other: SymTensor) -> float:
        self._check_same(other)
        return float(np.dot(self.weights * self.data, other.data))

    def norm2(self) -> float:
        return math.sqrt(max(self.inner(self), 0.0))

    def allclose(self, other: SymTensor, atol: float = 1e-12) -> bool:
        self._check_same(other)
        return bool(np.allclose(self.data, other.data, rtol=0.0, atol=atol))

    def contract(self, v) -> SymTensor:
        """Dot the tensor with ``v`` along one axis."""
        v = np.asarray(v, dtype=np.float64)
        if self.order == 0:
            raise ShapeError("cannot contract an order-0 tensor")
        if v.shape != (self.dim,):
            raise ShapeError(f"vector of length {v.shape} does not match dim {self.dim}")
        up = _raise_table(self.dim, self.order - 1)
        return SymTensor(self.order - 1, self.dim, self.data[up] @ v)

    def gram_matrix(self) -> np.ndarray:
        """Matrix ``A`` with ``v @ A @ v == ||self.contract(v)||**2``."""
        if self.order == 0:
            raise ShapeError("cannot contract an order-0 tensor")
        up = _raise_table(self.dim, self.order - 1)
        cols = self.data[up]
        w = _weights(self.dim, self.order - 1)
        gram = cols.T @ (w[:, None] * cols)
        return 0.5 * (gram + gram.T)

    def transform(self, matrix) -> SymTensor:
        """Apply ``matrix`` (shape ``(p, dim)``) along every axis.

        The result lives over ``R^p``.  Cost grows like the product of the two
        entry counts, so this is meant for small tensors (tests, diagnostics).
        """
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.dim:
            raise ShapeError(f"matrix of shape {matrix.shape} cannot act on dim {self.dim}")
        p = matrix.shape[0]
        out = np.zeros(check_budget(p, self.order))
        for alpha, w, value in zip(self.alphas, self.weights, self.data):
            if value == 0.0:
                continue
            piece = SymTensor.scalar(1.0, p)
            for j in np.nonzero(alpha)[0]:
                piece = symmetrize_product(piece, power(matrix[:, j], int(alpha[j])))
            out += w * value * piece.data
        return SymTensor(self.order, p, out)

    # serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        return struct.pack("<QQ", self.order, self.dim) + self.data.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, buf, offset: int = 0) -> tuple[SymTensor, int]:
        """Parse one tensor starting at ``offset``; returns (tensor, next offset)."""
        if len(buf) - offset < 16:
            raise FormatError("truncated tensor header")
        order, dim = struct.unpack_from("<QQ", buf, offset)
        if dim < 1 or order > 10_000:
            raise FormatError(f"implausible tensor header: order={order}, dim={dim}")
        count = check_budget(dim, order)
        start = offset + 16
        end = start + 8 * count
        if len(buf) < end:
            raise FormatError("truncated tensor payload")
        data = np.frombuffer(buf, dtype="<f8", count=count, offset=start)
        return cls(order, dim, data.astype(np.float64)), end


def power(v, order: int) -> SymTensor:
    """The tensor power ``v^{(x) order}``."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if order < 0:
        raise ShapeError("order must be non-negative")
    alphas = multi_indices(v.shape[0], order)
    data = np.prod(v[None, :] ** alphas, axis=1)
    return SymTensor(order, v.shape[0], data)


def inner(a: SymTensor, b: SymTensor) -> float:
    return a.inner(b)


def norm2(t: SymTensor) -> float:
    return t.norm2()


def contract(t: SymTensor, v) -> SymTensor:
    return t.contract(v)


def gram_matrix(t: SymTensor) -> np.ndarray:
    return t.gram_matrix()


def symmetrize_product(a: SymTensor, b: SymTensor) -> SymTensor:
    """``Sym(a (x) b)`` as an order ``a.order + b.order`` symmetric tensor."""
    if a.dim != b.dim:
        raise ShapeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    dim = a.dim
    order = a.order + b.order
    count = check_budget(dim, order)
    wa = a.weights * a.data
    wb = b.weights * b.data
    wg = _weights(dim, order)
    out = np.zeros(count)
    nz_a = np.nonzero(wa)[0]
    nz_b = np.nonzero(wb)[0]
    if nz_a.size == 0 or nz_b.size == 0:
        return SymTensor(order, dim, out)
    alphas_b = b.alphas[nz_b]
    vals_b = wb[nz_b]
    # bound the size of the pairwise index block
    step = max(1, 2_000_000 // max(1, nz_b.size * dim))
    for start in range(0, nz_a.size, step):
        rows = nz_a[start:start + step]
        gammas = a.alphas[rows][:, None, :] + alphas_b[None, :, :]
        ranks = rank_of(gammas.reshape(-1, dim))
        vals = (wa[rows][:, None] * vals_b[None, :]).reshape(-1)
        out += np.bincount(ranks, weights=vals, minlength=count)
    return SymTensor(order, dim, out / wg)
