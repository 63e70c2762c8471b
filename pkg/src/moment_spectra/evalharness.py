"""L2 error of a hypothesis against a known network, and experiment runs."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .datagen import ReluNetwork, evaluate, gaussian_points, random_network, sample
from .errors import ConfigError, ShapeError
from .hermite import relu_coeffs
from .learner import Hypothesis, LearnConfig, learn, predict, save_hypothesis
from .symtensor import SymTensor, power

__all__ = [
    "MCError",
    "AnalyticError",
    "EvalReport",
    "relu_kernel",
    "l2_error_mc",
    "l2_error_analytic",
    "moment_norms_sq",
    "derive_seed",
    "config_echo",
    "build_instance",
    "run_experiment",
]

DEFAULT_TAIL_CUTOFF = 400
DEFAULT_EVAL_POINTS = 100_000


@dataclass
class MCError:
    """Monte Carlo root-mean-square error with jackknife standard error.

    ``mse`` and ``mse_se`` are the mean squared error and its standard error.
    """

    value: float
    se: float
    mse: float
    mse_se: float
    n: int


@dataclass
class AnalyticError:
    value: float
    per_order_errors: list
    tail: float
    tail_explicit: float
    tail_bound: float


@dataclass
class EvalReport:
    l2_error_mc: float | None = None
    l2_error_mc_se: float | None = None
    l2_error_analytic: float | None = None
    tail_bound: float | None = None
    per_order_errors: list = field(default_factory=list)
    runtime: float = 0.0

    def to_json(self, include_runtime: bool = True) -> dict:
        out = asdict(self)
        if not include_runtime:
            out.pop("runtime")
        return out


def _check_dims(net: ReluNetwork, h: Hypothesis):
    if net.dim != h.dim:
        raise ShapeError(f"model dim {net.dim} does not match hypothesis dim {h.dim}")


def l2_error_mc(
    net: ReluNetwork,
    h: Hypothesis,
    n_eval: int = DEFAULT_EVAL_POINTS,
    seed: int = 0,
    threads: int = 1,
    proposal_scale: float = 1.0,
) -> MCError:
    """RMS of ``predict(h, x) - F(x)`` over ``n_eval`` fresh Gaussian points.

    The squared error of a high-degree polynomial hypothesis is heavy tailed:
    a few percent of its mean can sit at radii a sample of 10^5 points never
    reaches, so plain averages run low and their standard errors run small.
    ``proposal_scale > 1`` draws points from ``N(0, s^2 I)`` instead and
    reweights by the density ratio, which samples those radii and keeps the
    estimator unbiased with a trustworthy standard error.  The default of 1
    is the plain Gaussian average.
    """
    _check_dims(net, h)
    if n_eval < 2:
        raise ValueError("need at least two evaluation points")
    if not proposal_scale > 0:
        raise ValueError("proposal_scale must be positive")
    g = gaussian_points(n_eval, net.dim, seed, threads)
    x = g if proposal_scale == 1.0 else proposal_scale * g
    sq = (predict(h, x) - evaluate(net, x)) ** 2
    if proposal_scale != 1.0:
        s2 = proposal_scale**2
        log_ratio = net.dim * math.log(proposal_scale) - 0.5 * (s2 - 1.0) * np.einsum("ij,ij->i", g, g)
        sq = sq * np.exp(log_ratio)
    total = math.fsum(sq)
    mse = total / n_eval
    # delete-one jackknife of sqrt(mean)
    loo = np.sqrt(np.maximum((total - sq) / (n_eval - 1), 0.0))
    se = math.sqrt((n_eval - 1) / n_eval * np.sum((loo - loo.mean()) ** 2))
    mse_se = float(np.std(sq, ddof=1) / math.sqrt(n_eval))
    return MCError(math.sqrt(mse), se, mse, mse_se, n_eval)


def relu_kernel(rho):
    """``E[ReLU(u.X) ReLU(v.X)]`` for unit ``u, v`` with ``u.v = rho``."""
    rho = np.clip(np.asarray(rho, dtype=np.float64), -1.0, 1.0)
    return (np.sqrt(1.0 - rho**2) + (np.pi - np.arccos(rho)) * rho) / (2.0 * np.pi)


def moment_norms_sq(net: ReluNetwork, m_max: int) -> np.ndarray:
    """``||M_m||^2 = c_m^2 sum_ij w_i w_j (v_i . v_j)^m`` for ``m = 0..m_max``."""
    c = relu_coeffs(m_max)
    gram = np.clip(net.directions @ net.directions.T, -1.0, 1.0)
    ww = np.outer(net.weights, net.weights)
    m = np.arange(m_max + 1)
    sums = np.einsum("ij,ijm->m", ww, gram[:, :, None] ** m[None, None, :])
    return c**2 * sums


def l2_error_analytic(net: ReluNetwork, h: Hypothesis, tail_cutoff: int = DEFAULT_TAIL_CUTOFF) -> AnalyticError:
    """Error via Hermite orthonormality.

    ``||F~ - F||^2 = sum_{m<=D} ||P_m - M_m||^2 + sum_{m>D} ||M_m||^2``, with
    ``P_m`` lifted to ``R^d`` through the basis.  The infinite tail is exact:
    ``E[F^2]`` has a closed form, so the tail equals ``E[F^2]`` minus the
    explicit low-order mass.  ``tail_explicit`` sums orders ``D < m <=
    tail_cutoff`` directly and ``tail_bound`` bounds the rest by
    ``(sum |w_i|)^2 sum_{m > tail_cutoff} c_m^2``.
    """
    _check_dims(net, h)
    degree = h.degree
    cutoff = max(tail_cutoff, degree)
    c = relu_coeffs(cutoff)
    norms_sq = moment_norms_sq(net, cutoff)
    # ||P_m - M_m||^2 splits into the error against the projection of M_m
    # onto span(B)^{(x)m}, computed in k coordinates, plus the mass of M_m
    # outside it.  Both pieces avoid subtracting nearly equal squares, which
    # would leave about sqrt(eps) of noise in every order.
    projected = net.directions @ h.basis
    resid = net.directions - projected @ h.basis.T
    ww = np.outer(net.weights, net.weights)
    a = net.directions @ net.directions.T
    b = projected @ projected.T
    diff = resid @ resid.T
    geo = np.zeros_like(a)  # sum_j a^j b^(m-1-j), updated in place
    a_pow = np.ones_like(a)
    per_order = []
    for m, p in enumerate(h.coeffs):
        target = SymTensor.zeros(m, h.k)
        for w, u in zip(net.weights, projected):
            target = target + (c[m] * w) * power(u, m)
        in_span = (p - target).norm2() ** 2
        if m > 0:
            geo = geo * b + a_pow
            a_pow = a_pow * a
        outside = c[m] ** 2 * float(np.sum(ww * diff * geo)) if m > 0 else 0.0
        per_order.append(math.sqrt(in_span + max(outside, 0.0)))
    energy = float(np.sum(np.outer(net.weights, net.weights) * relu_kernel(net.directions @ net.directions.T)))
    tail = max(energy - math.fsum(norms_sq[: degree + 1]), 0.0)
    tail_explicit = math.fsum(norms_sq[degree + 1:])
    # sum over all m of c_m^2 equals E[ReLU(G)^2] = 1/2
    tail_bound = np.abs(net.weights).sum() ** 2 * max(0.5 - math.fsum(c**2), 0.0)
    value = math.sqrt(math.fsum(e * e for e in per_order) + tail)
    return AnalyticError(value, per_order, tail, tail_explicit, float(tail_bound))


def config_echo(config: LearnConfig) -> dict:
    """Config as written to manifests.

    ``threads`` is left out: results do not depend on it, and keeping it out
    lets runs at different thread counts produce identical manifests.
    """
    out = config.to_json()
    out.pop("threads", None)
    return out


def derive_seed(seed: int, stream: int) -> int:
    """Independent integer seed for one named stream of an experiment."""
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


# stream ids for derive_seed
STREAM_SUBSPACE, STREAM_REGRESSION, STREAM_EVAL = 1, 2, 3


def build_instance(spec: dict) -> ReluNetwork:
    """Network from an instance spec: explicit arrays or a named profile."""
    if "weights" in spec:
        return ReluNetwork(spec["weights"], spec["directions"])
    try:
        d, k = int(spec["d"]), int(spec["k"])
    except KeyError as exc:
        raise ConfigError(f"instance spec needs {exc}") from None
    return random_network(d, k, spec.get("profile", "generic"), float(spec.get("theta", 0.01)), int(spec.get("seed", 0)))


def run_experiment(config: LearnConfig, instance: dict | ReluNetwork, out_dir=None, n_eval: int = DEFAULT_EVAL_POINTS, analytic: bool = True):
    """Generate an instance, sample, learn, evaluate.

    Returns ``(report, manifest, hypothesis)``.  When ``out_dir`` is given,
    writes ``hypothesis.bin``, ``report.json``, ``manifest.json`` and a
    ``timing.json`` sidecar (the only file with wall-clock content).
    """
    start = time.perf_counter()
    net = instance if isinstance(instance, ReluNetwork) else build_instance(instance)
    if net.dim != config.d or net.width > config.k:
        raise ConfigError(f"instance (d={net.dim}, k={net.width}) does not fit config (d={config.d}, k={config.k})")
    s_sub = sample(net, config.n_subspace, derive_seed(config.seed, STREAM_SUBSPACE), threads=config.threads)
    s_reg = sample(net, config.n_regression, derive_seed(config.seed, STREAM_REGRESSION), threads=config.threads)
    t_learn = time.perf_counter()
    h = learn(s_sub, s_reg, config)
    t_learn = time.perf_counter() - t_learn
    mc = l2_error_mc(net, h, n_eval, derive_seed(config.seed, STREAM_EVAL), config.threads)
    report = EvalReport(l2_error_mc=mc.value, l2_error_mc_se=mc.se)
    if analytic:
        an = l2_error_analytic(net, h)
        report.l2_error_analytic = an.value
        report.tail_bound = an.tail_bound
        report.per_order_errors = an.per_order_errors
    report.runtime = time.perf_counter() - start
    manifest = {
        "config": config_echo(config),
        "instance": net.to_json() if isinstance(instance, ReluNetwork) else dict(instance),
        "eigenvalues": h.eigenvalues.tolist(),
        "sample_counts": {"subspace": config.n_subspace, "regression": config.n_regression, "eval": n_eval},
        "degree_D": config.degree_D,
        "degree_capped": config.degree_capped,
        "report": report.to_json(include_runtime=False),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_hypothesis(h, out / "hypothesis.bin")
        (out / "report.json").write_text(json.dumps(report.to_json(include_runtime=False), indent=2) + "\n")
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        (out / "timing.json").write_text(
            json.dumps({"learn_seconds": t_learn, "total_seconds": report.runtime, "threads": config.threads}, indent=2) + "\n"
        )
    return report, manifest, h
