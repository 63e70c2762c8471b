import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from moment_spectra.errors import MemoryBudgetError
from moment_spectra.hermite import (
    gauss_hermite_rule,
    gaussian_expectation,
    hermite_all,
    hermite_eval,
    hermite_table,
    hermite_tensor,
    relu_coeff,
    relu_coeffs,
)
from moment_spectra.symtensor import memory_budget, power

from oracles import he_poly, hermite_tensor_by_partitions, to_dense


def relu_coeff_by_quad(m):
    # adaptive quadrature on the half line, independent of the closed form
    f = lambda t: t * he_poly(m, t) / math.sqrt(math.factorial(m)) * math.exp(-t * t / 2) / math.sqrt(2 * math.pi)
    return quad(f, 0, np.inf, limit=400, epsabs=1e-14, epsrel=1e-13)[0]


# -- hermite_eval --------------------------------------------------------------


def test_h0_is_one():
    assert hermite_eval(0, 3.7) == 1.0


def test_h1_is_identity():
    assert hermite_eval(1, 2.0) == 2.0


def test_h2_at_zero():
    assert hermite_eval(2, 0.0) == pytest.approx(-1 / math.sqrt(2), abs=1e-12)


def test_negative_order_rejected():
    with pytest.raises(ValueError):
        hermite_eval(-1, 0.0)


@given(st.integers(0, 30), st.floats(-6, 6))
def test_recurrence_matches_numpy_hermite_e(m, t):
    expected = he_poly(m, t) / math.sqrt(math.factorial(m))
    assert hermite_eval(m, t) == pytest.approx(expected, rel=1e-9, abs=1e-9)


def test_array_input_keeps_shape():
    t = np.linspace(-2, 2, 12).reshape(3, 4)
    out = hermite_eval(3, t)
    assert out.shape == (3, 4)
    assert np.allclose(out, (t**3 - 3 * t) / math.sqrt(6))


# -- hermite_all ---------------------------------------------------------------


def test_hermite_all_examples():
    assert np.allclose(hermite_all(2, 0.0), [1.0, 0.0, -0.70710678], atol=1e-8)
    assert np.allclose(hermite_all(0, 1.0), [1.0])
    assert np.allclose(hermite_all(3, 1.0), [1.0, 1.0, 0.0, -2 / math.sqrt(6)], atol=1e-12)


@given(st.integers(0, 20), st.floats(-5, 5))
def test_hermite_all_agrees_with_single_evaluations(m_max, t):
    table = hermite_all(m_max, t)
    assert table.shape == (m_max + 1,)
    for m in range(m_max + 1):
        assert table[m] == pytest.approx(hermite_eval(m, t), rel=1e-12, abs=1e-12)


def test_hermite_table_puts_order_last():
    x = np.array([[0.5, -1.0], [2.0, 0.0]])
    tab = hermite_table(x, 4)
    assert tab.shape == (2, 2, 5)
    assert tab[1, 0, 3] == pytest.approx(hermite_eval(3, 2.0))


def test_orthonormality_by_quadrature():
    t, w = gauss_hermite_rule(64)
    table = hermite_all(12, t)
    gram = (table * w) @ table.T
    assert np.abs(gram - np.eye(13)).max() < 1e-9


def test_gaussian_expectation_of_moments():
    assert gaussian_expectation(lambda t: t**2) == pytest.approx(1.0, abs=1e-13)
    assert gaussian_expectation(lambda t: t**4) == pytest.approx(3.0, abs=1e-12)


# -- hermite_tensor ------------------------------------------------------------


def test_order_zero_is_scalar_one():
    h = hermite_tensor(0, np.array([0.3, -0.2]))
    assert h.order == 0 and h.data.tolist() == [1.0]


def test_order_one_is_x():
    x = np.array([0.3, -1.2, 2.0])
    assert np.allclose(hermite_tensor(1, x).data, x)


def test_order_two_entries():
    x1, x2 = 1.3, -0.4
    h = hermite_tensor(2, np.array([x1, x2]))
    assert h[(2, 0)] == pytest.approx((x1**2 - 1) / math.sqrt(2))
    assert h[(1, 1)] == pytest.approx(x1 * x2 / math.sqrt(2))
    assert h[(0, 2)] == pytest.approx((x2**2 - 1) / math.sqrt(2))


@pytest.mark.parametrize("m", [0, 1, 2, 3])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_product_formula_matches_partition_sum(m, d, rng):
    for _ in range(5):
        x = rng.standard_normal(d)
        assert np.allclose(to_dense(hermite_tensor(m, x)), hermite_tensor_by_partitions(m, x), atol=1e-12)


@given(
    st.integers(0, 8),
    st.lists(st.floats(-3, 3), min_size=2, max_size=6),
    st.lists(st.floats(-1, 1), min_size=6, max_size=6),
)
def test_contraction_identity(m, x, v):
    x = np.array(x)
    v = np.array(v[: len(x)])
    if np.linalg.norm(v) < 1e-3:
        return
    v = v / np.linalg.norm(v)
    lhs = hermite_tensor(m, x).inner(power(v, m))
    assert lhs == pytest.approx(hermite_eval(m, float(v @ x)), rel=1e-9, abs=1e-9)


def test_projection_compatibility(rng):
    d, k = 5, 2
    basis, _ = np.linalg.qr(rng.standard_normal((d, k)))
    for m in range(5):
        x = rng.standard_normal(d)
        direct = hermite_tensor(m, basis.T @ x)
        lifted = hermite_tensor(m, x).transform(basis.T)
        # the projection of H_m(x) differs from H_m(B^T x) only if B^T B != I
        assert np.allclose(direct.data, lifted.data, atol=1e-9)


def test_hermite_tensor_respects_budget():
    with memory_budget(100):
        with pytest.raises(MemoryBudgetError):
            hermite_tensor(10, np.zeros(4))


# -- relu coefficients ---------------------------------------------------------


def test_relu_coeff_examples():
    assert relu_coeff(3) == 0.0
    assert relu_coeff(2) == pytest.approx(1 / (2 * math.sqrt(math.pi)), abs=1e-12)
    assert relu_coeff(1) == 0.5
    assert relu_coeff(0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)


def test_relu_coeff_four_matches_formula_and_quadrature():
    # h_2(0) g(0) / sqrt(12); the decimal -0.08131534 quoted alongside this
    # formula disagrees with it in the fourth digit, quadrature sides with the formula
    formula = (-1 / math.sqrt(2)) * (1 / math.sqrt(2 * math.pi)) / math.sqrt(12)
    assert relu_coeff(4) == pytest.approx(formula, abs=1e-15)
    assert relu_coeff(4) == pytest.approx(relu_coeff_by_quad(4), abs=1e-12)
    assert relu_coeff(4) == pytest.approx(-0.08143375, abs=1e-8)


@pytest.mark.parametrize("m", range(0, 25))
def test_relu_coeff_against_adaptive_quadrature(m):
    assert relu_coeff(m) == pytest.approx(relu_coeff_by_quad(m), abs=1e-10)


def test_odd_coefficients_exactly_zero():
    c = relu_coeffs(101)
    assert all(c[m] == 0.0 for m in range(3, 102, 2))


def test_coefficient_decay_bracket():
    c = relu_coeffs(64)
    scaled = [abs(c[m]) * m**1.25 for m in range(2, 65, 2)]
    assert min(scaled) >= 0.1 and max(scaled) <= 10


def test_vector_and_scalar_coefficients_agree():
    c = relu_coeffs(40)
    assert np.array_equal(c, [relu_coeff(m) for m in range(41)])


def test_squared_coefficients_sum_to_half():
    # Parseval for ReLU(G): E[ReLU(G)^2] = 1/2
    total = np.sum(relu_coeffs(20000) ** 2)
    assert total == pytest.approx(0.5, abs=1e-5)
    assert total < 0.5
