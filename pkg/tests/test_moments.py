import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moment_spectra.datagen import ReluNetwork, Samples, random_network, sample
from moment_spectra.errors import SampleSizeOverflow, ShapeError
from moment_spectra.hermite import relu_coeff
from moment_spectra.moments import (
    MomentEstimate,
    analytic_moment,
    estimate_moment,
    estimate_moments,
    label_moment_bound,
    moment_sums,
    pairwise_reduce,
    sample_size,
)
from moment_spectra.symtensor import SymTensor, power

from oracles import direct_moment, to_dense

E1_NET = ReluNetwork([1.0], [[1.0, 0, 0, 0, 0, 0]])


# -- estimator agrees with a point-by-point oracle -------------------------------


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_batched_kernel_matches_direct_sum(d, rng):
    x = rng.standard_normal((40, d))
    y = rng.standard_normal(40)
    est = estimate_moments(Samples(x, y), 3)
    for m in range(4):
        assert np.allclose(to_dense(est[m].tensor), direct_moment(x, y, m), atol=1e-12)


@given(st.integers(1, 8), st.integers(0, 9), st.integers(0, 2**31))
def test_kernel_matches_per_point_tensors(d, m_max, seed):
    from moment_spectra.hermite import hermite_tensor

    rng = np.random.default_rng(seed)
    x = rng.standard_normal((7, d))
    y = rng.standard_normal(7)
    sums = moment_sums(x, y, m_max)
    for m in (0, m_max // 2, m_max):
        expected = sum(yi * hermite_tensor(m, xi).data for xi, yi in zip(x, y))
        assert np.allclose(sums[m], expected, atol=1e-10)


def test_chunked_and_threaded_results_identical():
    s = sample(random_network(6, 2, seed=1), 150_000, seed=5)
    one = estimate_moments(s, 6, threads=1)
    many = estimate_moments(s, 6, threads=4)
    for a, b in zip(one, many):
        assert a.tensor.data.tobytes() == b.tensor.data.tobytes()


def test_zero_labels_give_zero():
    x = np.random.default_rng(0).standard_normal((100, 3))
    est = estimate_moment(Samples(x, np.zeros(100)), 3)
    assert not np.any(est.tensor.data)


def test_constant_label_first_moment_concentrates():
    d, n = 4, 20_000
    s = Samples(np.random.default_rng(1).standard_normal((n, d)), np.ones(n))
    assert estimate_moment(s, 1).tensor.norm2() <= 4 * math.sqrt(d / n)


def test_second_moment_of_single_relu():
    s = sample(E1_NET, 1_000_000, seed=3)
    est = estimate_moment(s, 2).tensor
    target = relu_coeff(2) * power(E1_NET.directions[0], 2)
    assert (est - target).norm2() <= 0.01


def test_empty_samples_rejected():
    with pytest.raises(ValueError):
        estimate_moment(Samples(np.zeros((0, 2)), np.zeros(0)), 1)


def test_estimate_metadata():
    s = sample(E1_NET, 100, seed=0)
    est = estimate_moment(s, 2)
    assert isinstance(est, MomentEstimate) and est.order == 2 and est.num_samples == 100
    with pytest.raises(ShapeError):
        MomentEstimate(SymTensor.zeros(1, 2), 2, 10)


# -- statistical behaviour ------------------------------------------------------


def test_unbiased_over_repeated_estimates():
    net = random_network(3, 2, "generic", seed=4)
    reps, n = 200, 500
    for m in range(5):
        draws = np.array([estimate_moment(sample(net, n, seed=1000 + r), m).tensor.data for r in range(reps)])
        se = draws.std(axis=0, ddof=1) / math.sqrt(reps)
        bias = np.abs(draws.mean(axis=0) - analytic_moment(net, m).data)
        assert np.all(bias <= 3 * se + 1e-12), m


def test_error_decays_like_inverse_root_n():
    net = ReluNetwork([1.0], [[1.0, 0.0, 0.0, 0.0]])
    ns = [1_000, 10_000, 100_000]
    errs = []
    for n in ns:
        # average over a few seeds so the slope is not a single-draw accident
        errs.append(np.mean([
            (estimate_moment(sample(net, n, seed=s), 2).tensor - analytic_moment(net, 2)).norm2() for s in range(8)
        ]))
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert -0.65 <= slope <= -0.35


def test_subspace_estimate_equals_projected_full_estimate(rng):
    d, k = 5, 2
    basis, _ = np.linalg.qr(rng.standard_normal((d, k)))
    s = sample(random_network(d, 2, seed=2), 300, seed=1)
    full = estimate_moments(s, 4)
    sub = estimate_moments(s, 4, subspace_basis=basis)
    for m in range(5):
        assert np.allclose(sub[m].tensor.data, full[m].tensor.transform(basis.T).data, atol=1e-9)


def test_bad_basis_shape():
    s = sample(E1_NET, 10, seed=0)
    with pytest.raises(ShapeError):
        estimate_moments(s, 2, subspace_basis=np.eye(3))


# -- analytic moments ------------------------------------------------------------


def test_analytic_odd_orders_vanish():
    net = random_network(4, 3, seed=7)
    for m in (3, 5, 7):
        assert not np.any(analytic_moment(net, m).data)


def test_analytic_single_relu():
    assert np.allclose(analytic_moment(E1_NET, 2).data, relu_coeff(2) * power(E1_NET.directions[0], 2).data)


def test_analytic_exact_cancellation():
    v = np.array([0.6, 0.8])
    net = ReluNetwork([0.5, -0.5], [v, v])
    for m in range(6):
        assert not np.any(analytic_moment(net, m).data)


# -- sample sizes ------------------------------------------------------------------


def test_sample_size_formula():
    # C(2,1) * e^{1/3} * 1 / (0.1^2 * 0.1^2)
    assert sample_size(1, 1, 0.1, 0.1, 1.0) == math.ceil(2 * math.exp(1 / 3) * 1e4)


def test_halving_delta_quadruples():
    a = sample_size(4, 6, 0.1, 0.1, 2.0)
    b = sample_size(4, 6, 0.05, 0.1, 2.0)
    assert b / a == pytest.approx(4.0, rel=1e-6)


def test_subspace_dimension_shrinks_count():
    full = sample_size(6, 20, 0.1, 0.1, 1.0)
    sub = sample_size(6, 3, 0.1, 0.1, 1.0)
    assert full / sub == pytest.approx(math.comb(26, 6) / math.comb(9, 6), rel=1e-6)


def test_sample_size_overflow():
    with pytest.raises(SampleSizeOverflow):
        sample_size(60, 200, 1e-6, 1e-3, 10.0)


def test_sample_size_rejects_nonpositive():
    with pytest.raises(ValueError):
        sample_size(2, 3, 0.0, 0.1, 1.0)


def test_label_moment_bound():
    assert label_moment_bound(9, 0.5) == pytest.approx(1.5)


# -- reduction tree ----------------------------------------------------------------


def test_pairwise_reduce_matches_sum():
    parts = [float(i) for i in range(13)]
    assert pairwise_reduce(parts, lambda a, b: a + b) == sum(parts)


def test_pairwise_reduce_tree_shape():
    # the grouping is fixed by position: ((0,1),(2,3)) then 4
    out = pairwise_reduce(list("abcde"), lambda a, b: f"({a}{b})")
    assert out == "(((ab)(cd))e)"
    with pytest.raises(ValueError):
        pairwise_reduce([], lambda a, b: a)
