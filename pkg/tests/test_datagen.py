import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moment_spectra.datagen import (
    LabeledSample,
    ReluNetwork,
    Samples,
    evaluate,
    gaussian_points,
    load_model,
    load_samples,
    random_network,
    sample,
    save_model,
    save_samples,
)
from moment_spectra.errors import ConfigError, FormatError

from oracles import relu_net


# -- ReluNetwork ---------------------------------------------------------------


def test_evaluate_examples():
    e = np.eye(4)
    net = ReluNetwork([1.0], [e[0]])
    assert evaluate(net, [2.0, 0, 0, 0]) == 2.0
    assert evaluate(net, [-2.0, 0, 0, 0]) == 0.0
    net2 = ReluNetwork([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
    assert evaluate(net2, [1.0, 1.0]) == 1.0


def test_weight_budget_enforced():
    with pytest.raises(ConfigError):
        ReluNetwork([0.7, 0.7], [[1.0, 0.0], [0.0, 1.0]])


def test_unit_directions_enforced():
    with pytest.raises(ConfigError):
        ReluNetwork([0.5], [[1.0, 1.0]])


def test_shape_mismatch_rejected():
    with pytest.raises(ConfigError):
        ReluNetwork([0.5, 0.5], [[1.0, 0.0]])


def test_zero_network_allowed():
    net = ReluNetwork([0.0], [[0.0, 1.0]])
    assert evaluate(net, np.ones((3, 2))).tolist() == [0.0, 0.0, 0.0]


def test_network_is_immutable():
    net = ReluNetwork([1.0], [[1.0, 0.0]])
    with pytest.raises(ValueError):
        net.weights[0] = 0.2


def test_evaluate_dimension_check():
    with pytest.raises(ConfigError):
        evaluate(ReluNetwork([1.0], [[1.0, 0.0]]), [1.0, 2.0, 3.0])


@given(st.integers(1, 4), st.integers(1, 6), st.integers(0, 2**31))
def test_batch_evaluate_matches_loop(k, d, seed):
    if k > d:
        return
    net = random_network(d, k, "generic", seed=seed)
    x = np.random.default_rng(seed).standard_normal((7, d))
    expected = [relu_net(net.weights, net.directions, xi) for xi in x]
    assert np.allclose(evaluate(net, x), expected, atol=1e-12)


def test_model_json_round_trip(tmp_path):
    net = random_network(5, 2, "generic", seed=3)
    save_model(net, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.weights, net.weights) and np.array_equal(back.directions, net.directions)


def test_model_file_errors(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_model(tmp_path / "bad.json")
    (tmp_path / "missing.json").write_text('{"weights": [1.0]}')
    with pytest.raises(FormatError):
        load_model(tmp_path / "missing.json")


# -- sampling ------------------------------------------------------------------


def test_empty_sample():
    s = sample(ReluNetwork([1.0], [[1.0, 0.0]]), 0, seed=1)
    assert len(s) == 0 and list(s) == []


def test_sampling_is_deterministic():
    net = random_network(6, 2, "generic", seed=0)
    a, b = sample(net, 5000, seed=9), sample(net, 5000, seed=9)
    assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()


def test_sampling_independent_of_threads():
    pts1 = gaussian_points(200_000, 3, seed=4, threads=1)
    pts8 = gaussian_points(200_000, 3, seed=4, threads=8)
    assert pts1.tobytes() == pts8.tobytes()


def test_different_seeds_differ():
    assert not np.array_equal(gaussian_points(10, 2, 1), gaussian_points(10, 2, 2))


def test_prefix_property():
    # chunks are keyed by (seed, chunk index), so a shorter draw is a prefix
    assert np.array_equal(gaussian_points(1000, 2, 5), gaussian_points(70_000, 2, 5)[:1000])


def test_mean_label_of_single_relu():
    net = ReluNetwork([1.0], [[1.0, 0.0, 0.0]])
    s = sample(net, 1_000_000, seed=2)
    se = s.y.std() / math.sqrt(len(s))
    assert abs(s.y.mean() - 1 / math.sqrt(2 * math.pi)) <= 3 * se


def test_label_noise():
    net = ReluNetwork([1.0], [[1.0, 0.0]])
    clean = sample(net, 50_000, seed=3)
    noisy = sample(net, 50_000, seed=3, noise_sigma=0.5)
    assert np.array_equal(clean.x, noisy.x)
    assert (noisy.y - clean.y).std() == pytest.approx(0.5, rel=0.02)


def test_samples_iterate_as_labeled_points():
    s = sample(ReluNetwork([1.0], [[0.0, 1.0]]), 3, seed=0)
    items = list(s)
    assert all(isinstance(p, LabeledSample) for p in items)
    assert items[1].y == s.y[1]
    first, second = s.split(1)
    assert len(first) == 1 and len(second) == 2


def test_samples_validation():
    with pytest.raises(ValueError):
        Samples(np.zeros((3, 2)), np.zeros(2))


def test_samples_file_round_trip(tmp_path):
    s = sample(random_network(4, 2, seed=1), 321, seed=8)
    save_samples(s, tmp_path / "s.bin")
    raw = (tmp_path / "s.bin").read_bytes()
    assert struct.unpack_from("<QQ", raw) == (321, 4)
    assert len(raw) == 16 + 8 * 321 * 5
    back = load_samples(tmp_path / "s.bin")
    assert back.x.tobytes() == s.x.tobytes() and back.y.tobytes() == s.y.tobytes()


def test_corrupt_samples_rejected(tmp_path):
    (tmp_path / "short.bin").write_bytes(b"abc")
    with pytest.raises(FormatError):
        load_samples(tmp_path / "short.bin")
    (tmp_path / "lying.bin").write_bytes(struct.pack("<QQ", 10, 3) + b"\0" * 8)
    with pytest.raises(FormatError):
        load_samples(tmp_path / "lying.bin")


# -- instance profiles ---------------------------------------------------------


def test_generic_single_unit():
    net = random_network(5, 1, "generic", seed=11)
    assert net.width == 1 and abs(net.weights[0]) <= 1
    assert np.linalg.norm(net.directions[0]) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_near_parallel_angles(seed):
    net = random_network(8, 2, "near-parallel", 0.01, seed)
    assert net.directions[0] @ net.directions[1] >= math.cos(0.01)


@pytest.mark.parametrize("seed", range(5))
def test_cancelling_resultant(seed):
    net = random_network(8, 3, "cancelling", seed=seed)
    resultant = net.weights @ net.directions
    assert np.linalg.norm(resultant) <= 0.01 * np.abs(net.weights).sum()
    assert np.any(net.weights < 0)


@given(st.sampled_from(["generic", "near-parallel", "cancelling"]), st.integers(2, 4), st.integers(0, 10_000))
def test_profiles_satisfy_invariants(profile, k, seed):
    net = random_network(k + 2, k, profile, 0.05, seed)
    assert np.abs(net.weights).sum() <= 1 + 1e-12
    assert np.allclose(np.linalg.norm(net.directions, axis=1), 1.0, atol=1e-12)


def test_bad_profile_and_sizes():
    with pytest.raises(ConfigError):
        random_network(4, 2, "spiky")
    with pytest.raises(ConfigError):
        random_network(2, 3)
    with pytest.raises(ConfigError):
        random_network(4, 1, "cancelling")
