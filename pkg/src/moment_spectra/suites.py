"""Named property suites shared by the ``verify`` command and the test suite.

Each suite returns a list of :class:`~moment_spectra.schur.VerifyReport`;
``worst_ratio`` is the largest observed error divided by its allowance, so
a suite passes when every report has ``worst_ratio <= 1``.
"""

from __future__ import annotations

import itertools

import numpy as np

from .hermite import (
    gauss_hermite_rule,
    half_line_expectation,
    hermite_all,
    hermite_eval,
    hermite_tensor,
    relu_coeffs,
)
from .schur import (
    Partition,
    VerifyReport,
    jacobi_trudi,
    schur_bialternant,
    trial_rng,
    verify_even_bound,
    verify_scalar_bound,
    verify_tensor_recursion,
)
from .symtensor import power

__all__ = [
    "SUITES",
    "run_suite",
    "hermite_orthonormality",
    "hermite_contraction",
    "relu_coefficients",
    "schur_agreement",
    "partitions_up_to",
]


def _report(name, params, trials, errors, allowance):
    errors = np.asarray(errors, dtype=np.float64).reshape(-1)
    ratios = errors / allowance
    return VerifyReport(name, params, trials, float(ratios.max(initial=0.0)), int(np.sum(ratios > 1.0)))


def hermite_orthonormality(m_max: int = 12, nodes: int = 64, tol: float = 1e-9) -> VerifyReport:
    """``E[h_n h_m] = delta_nm`` for ``n, m <= m_max`` by Gauss-Hermite quadrature."""
    t, w = gauss_hermite_rule(nodes)
    table = hermite_all(m_max, t)
    gram = (table * w) @ table.T
    return _report("hermite-orthonormality", {"m_max": m_max, "nodes": nodes}, (m_max + 1) ** 2, np.abs(gram - np.eye(m_max + 1)), tol)


def hermite_contraction(trials: int = 200, m_max: int = 8, d_max: int = 6, seed: int = 0, tol: float = 1e-9) -> VerifyReport:
    """``<H_m(x), v^{(x)m}> = h_m(v . x)`` for random unit ``v`` and Gaussian ``x``."""
    errors = []
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        d = int(rng.integers(1, d_max + 1))
        m = int(rng.integers(0, m_max + 1))
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        x = rng.standard_normal(d)
        lhs = hermite_tensor(m, x).inner(power(v, m))
        rhs = hermite_eval(m, float(v @ x))
        errors.append(abs(lhs - rhs) / max(1.0, abs(rhs)))
    return _report("hermite-contraction", {"m_max": m_max, "d_max": d_max, "seed": seed}, trials, errors, tol)


def relu_coefficients(m_quad: int = 24, m_decay: int = 64, nodes: int = 128, tol: float = 1e-8) -> list:
    """Closed-form ReLU coefficients against quadrature, odd zeros and decay bracket."""
    c = relu_coeffs(max(m_quad, m_decay))
    # even orders: E[ReLU(G) h_m(G)] by 128-node Gauss-Laguerre on the half line
    even = [m for m in range(0, m_quad + 1, 2)]
    quad = [half_line_expectation(lambda t, m=m: hermite_eval(m, t), nodes) for m in even]
    quad_err = np.abs(np.array(quad) - c[even])
    odd = [m for m in range(3, max(m_quad, m_decay) + 1, 2)]
    # c_1 = 1/2 closes the low orders; odd orders above 1 must be exactly zero
    low_err = [abs(c[1] - 0.5)]
    odd_nonzero = np.array([c[m] != 0.0 for m in odd], dtype=np.float64)
    scaled = np.array([abs(c[m]) * m**1.25 for m in range(2, m_decay + 1, 2)])
    outside = np.maximum(0.1 - scaled, 0.0) + np.maximum(scaled - 10.0, 0.0)
    return [
        _report("coeff-quadrature", {"m_max": m_quad, "nodes": nodes}, len(even) + 1, np.concatenate([quad_err, low_err]), tol),
        VerifyReport("coeff-odd-zero", {"m_max": max(m_quad, m_decay)}, len(odd), float(odd_nonzero.max(initial=0.0)), int(odd_nonzero.sum())),
        VerifyReport(
            "coeff-decay",
            {"m_max": m_decay, "bracket": "[0.1, 10]"},
            len(scaled),
            float(max(scaled.max() / 10.0, 0.1 / scaled.min())),
            int(np.sum(outside > 0)),
        ),
    ]


def partitions_up_to(size: int, max_parts: int):
    """Every partition with ``|lambda| <= size`` and at most ``max_parts`` nonzero parts."""

    def parts(n, largest, slots):
        if n == 0:
            yield ()
            return
        if slots == 0:
            return
        for first in range(min(n, largest), 0, -1):
            for rest in parts(n - first, first, slots - 1):
                yield (first,) + rest

    for n in range(size + 1):
        for p in parts(n, n, max_parts):
            yield Partition(p)


def schur_agreement(max_size: int = 6, max_vars: int = 4, evaluations: int = 50, seed: int = 0, tol: float = 1e-8) -> list:
    """Bialternant vs Jacobi-Trudi, coefficient integrality, and the (2,1) example."""
    errors, bad_coeffs, checked = [], 0, 0
    stream = itertools.count()
    for n in range(1, max_vars + 1):
        for lam in partitions_up_to(max_size, n):
            poly = jacobi_trudi(lam, n)
            checked += 1
            bad_coeffs += any(not isinstance(c, int) or c < 0 for c in poly.monomials.values())
            for _ in range(evaluations):
                rng = trial_rng(seed, next(stream))
                x = rng.uniform(-1.5, 1.5, n)
                while len(np.unique(x)) < n:
                    x = rng.uniform(-1.5, 1.5, n)
                a = schur_bialternant(lam, x)
                b = poly(x)
                errors.append(abs(a - b) / (1.0 + abs(b)))
    example = schur_bialternant(Partition((2, 1)), [2.0, 3.0])
    return [
        _report("schur-agreement", {"max_size": max_size, "max_vars": max_vars, "seed": seed}, len(errors), errors, tol),
        VerifyReport("schur-coefficients", {"max_size": max_size, "max_vars": max_vars}, checked, float(bad_coeffs), bad_coeffs),
        _report("schur-example", {"lambda": "2,1", "x": "2,3"}, 1, [abs(example - 30.0)], 1e-9),
    ]


def _recursion_grid(seed, trials, ks=(1, 2, 3), t_max=8, dims=(2, 3)):
    return [
        verify_tensor_recursion(k, t, dim, trials, seed)
        for k, dim in itertools.product(ks, dims)
        for t in range(k, t_max + 1)
    ]


def _scalar_grid(seed, trials, ks=(1, 2, 3), t_max=10):
    return [verify_scalar_bound(k, t, trials, seed) for k in ks for t in range(k, t_max + 1)]


def _even_grid(seed, trials, ks=(1, 2, 3), t_max=10, dims=(2, 3)):
    return [
        verify_even_bound(k, t, dim, trials, seed)
        for k in ks
        for dim in dims
        for t in range(2 * k, t_max + 1, 2)
    ]


def run_suite(name: str, seed: int = 0, k=None, t=None, dim=None, trials=None) -> list:
    """Run a named suite.  ``k``, ``t`` and ``dim`` narrow the grid suites to one case."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}")
    if name == "hermite":
        return [hermite_orthonormality(), hermite_contraction(trials or 200, seed=seed)]
    if name == "coeff":
        return relu_coefficients()
    if name == "schur":
        return schur_agreement(seed=seed, evaluations=trials or 50)
    if name == "recursion":
        if k is not None and t is not None:
            return [verify_tensor_recursion(k, t, dim or 2, trials or 100, seed)]
        return _recursion_grid(seed, trials or 100)
    if name == "scalar":
        if k is not None and t is not None:
            return [verify_scalar_bound(k, t, trials or 1000, seed)]
        return _scalar_grid(seed, trials or 1000)
    if name == "even":
        if k is not None and t is not None:
            return [verify_even_bound(k, t, dim or 2, trials or 1000, seed)]
        return _even_grid(seed, trials or 1000)
    out = []
    for sub in ("hermite", "coeff", "schur", "recursion", "scalar", "even"):
        out.extend(run_suite(sub, seed))
    return out


SUITES = ("hermite", "coeff", "schur", "recursion", "scalar", "even", "all")
