"""Normalized probabilist's Hermite polynomials and Hermite tensors.

``h_m = He_m / sqrt(m!)`` is orthonormal under the standard Gaussian.  The
order-``m`` Hermite tensor ``H_m(x)`` has compressed entry
``prod_j He_{alpha_j}(x_j) / sqrt(m!)`` at multiplicity vector ``alpha``, so
``<H_m(x), v^{(x)m}> = h_m(v . x)`` for unit ``v``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .symtensor import SymTensor, check_budget, multi_indices, index_weights

__all__ = [
    "hermite_eval",
    "hermite_all",
    "hermite_table",
    "hermite_tensor",
    "relu_coeff",
    "relu_coeffs",
    "gauss_hermite_rule",
    "gaussian_expectation",
    "half_line_expectation",
]

GAUSS_DENSITY_AT_ZERO = 1.0 / math.sqrt(2.0 * math.pi)


def hermite_eval(m: int, t):
    """``h_m(t)`` by the three-term recurrence; ``t`` may be an array."""
    if m < 0:
        raise ValueError("Hermite order must be non-negative")
    t = np.asarray(t, dtype=np.float64)
    prev = np.ones_like(t)
    if m == 0:
        return prev if prev.ndim else float(prev)
    cur = t.copy()
    for j in range(1, m):
        prev, cur = cur, (t * cur - math.sqrt(j) * prev) / math.sqrt(j + 1)
    return cur if cur.ndim else float(cur)


def hermite_all(m_max: int, t) -> np.ndarray:
    """``[h_0(t), ..., h_{m_max}(t)]`` from a single recurrence pass.

    The order axis comes first; any shape of ``t`` is carried along.
    """
    if m_max < 0:
        raise ValueError("m_max must be non-negative")
    t = np.asarray(t, dtype=np.float64)
    out = np.empty((m_max + 1,) + t.shape)
    out[0] = 1.0
    if m_max >= 1:
        out[1] = t
    for j in range(1, m_max):
        out[j + 1] = (t * out[j] - math.sqrt(j) * out[j - 1]) / math.sqrt(j + 1)
    return out


def hermite_table(x, m_max: int) -> np.ndarray:
    """Per-coordinate values ``table[..., j, a] = h_a(x[..., j])``."""
    return np.moveaxis(hermite_all(m_max, x), 0, -1)


def hermite_tensor(m: int, x) -> SymTensor:
    """The order-``m`` Hermite tensor ``H_m(x)`` over ``R^n``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    check_budget(n, m, "Hermite tensor")
    if m == 0:
        return SymTensor.scalar(1.0, n)
    table = hermite_table(x, m)
    alphas = multi_indices(n, m)
    # prod_j He_a(x_j)/sqrt(m!) == prod_j h_a(x_j) / sqrt(weight)
    vals = np.prod(table[np.arange(n)[None, :], alphas], axis=1)
    return SymTensor(m, n, vals / np.sqrt(index_weights(n, m)))


@lru_cache(maxsize=8)
def _even_values_at_zero(n_max: int) -> np.ndarray:
    # h_{2n}(0) = -sqrt((2n-1)/(2n)) h_{2n-2}(0)
    n = np.arange(1, n_max + 1)
    steps = -np.sqrt((2 * n - 1) / (2 * n))
    out = np.concatenate([[1.0], np.cumprod(steps)])
    out.setflags(write=False)
    return out


def relu_coeff(m: int) -> float:
    """``c_m = E[ReLU(G) h_m(G)]`` for ``G ~ N(0, 1)``."""
    if m < 0:
        raise ValueError("order must be non-negative")
    if m == 0:
        return GAUSS_DENSITY_AT_ZERO
    if m == 1:
        return 0.5
    if m % 2:
        return 0.0
    # same arithmetic as relu_coeffs, so scalar and vector paths agree bitwise
    h_at_zero = _even_values_at_zero((m - 2) // 2)[-1]
    return float(h_at_zero * GAUSS_DENSITY_AT_ZERO / np.sqrt(m * (m - 1.0)))


def relu_coeffs(m_max: int) -> np.ndarray:
    """Vector ``[c_0, ..., c_{m_max}]``; stable for very large ``m_max``."""
    c = np.zeros(m_max + 1)
    c[0] = GAUSS_DENSITY_AT_ZERO
    if m_max >= 1:
        c[1] = 0.5
    if m_max >= 2:
        even = np.arange(2, m_max + 1, 2)
        h0 = _even_values_at_zero((m_max - 2) // 2)[(even - 2) // 2]
        c[even] = h0 * GAUSS_DENSITY_AT_ZERO / np.sqrt(even * (even - 1.0))
    return c


@lru_cache(maxsize=16)
def gauss_hermite_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights integrating against the standard normal density.

    Physicists' Gauss-Hermite rule with ``t = sqrt(2) u`` and weights divided
    by ``sqrt(pi)``.
    """
    u, w = np.polynomial.hermite.hermgauss(nodes)
    return math.sqrt(2.0) * u, w / math.sqrt(math.pi)


def gaussian_expectation(f, nodes: int = 64) -> float:
    """``E[f(G)]`` by Gauss-Hermite quadrature (``f`` must be vectorized)."""
    t, w = gauss_hermite_rule(nodes)
    return float(np.dot(w, f(t)))


def half_line_expectation(f, nodes: int = 128) -> float:
    """``E[G f(G) 1{G > 0}]`` by Gauss-Laguerre in ``u = G**2 / 2``.

    Exact when ``f(sqrt(2u))`` is a polynomial in ``u`` of degree below
    ``2 * nodes``, e.g. ``f = h_m`` with even ``m``.
    """
    u, w = np.polynomial.laguerre.laggauss(nodes)
    return float(np.dot(w, f(np.sqrt(2.0 * u)))) * GAUSS_DENSITY_AT_ZERO
