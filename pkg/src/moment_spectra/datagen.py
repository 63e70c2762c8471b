"""Ground-truth ReLU networks and Gaussian labeled samples."""

from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError

__all__ = [
    "ReluNetwork",
    "LabeledSample",
    "Samples",
    "evaluate",
    "sample",
    "gaussian_points",
    "random_network",
    "PROFILES",
    "save_model",
    "load_model",
    "save_samples",
    "load_samples",
]

UNIT_TOL = 1e-12
SAMPLE_CHUNK = 65536
PROFILES = ("generic", "near-parallel", "cancelling")


@dataclass(frozen=True)
class ReluNetwork:
    """``F(x) = sum_i w_i ReLU(v_i . x)`` with unit ``v_i`` and ``sum |w_i| <= 1``."""

    weights: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        v = np.atleast_2d(np.array(self.directions, dtype=np.float64))
        if v.shape[0] != w.shape[0]:
            raise ConfigError(f"{w.shape[0]} weights but {v.shape[0]} directions")
        if w.shape[0] < 1:
            raise ConfigError("network needs at least one unit")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise ConfigError("weights and directions must be finite")
        if np.abs(w).sum() > 1.0 + 1e-12:
            raise ConfigError(f"sum |w_i| = {np.abs(w).sum():.6g} exceeds 1")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise ConfigError(f"directions must be unit vectors, norms {norms}")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "directions", v)

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __call__(self, x):
        return evaluate(self, x)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "width": self.width,
            "weights": self.weights.tolist(),
            "directions": self.directions.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> ReluNetwork:
        try:
            net = cls(obj["weights"], obj["directions"])
        except KeyError as exc:
            raise FormatError(f"model file missing key {exc}") from None
        if obj.get("dim", net.dim) != net.dim or obj.get("width", net.width) != net.width:
            raise FormatError("model header disagrees with its arrays")
        return net


@dataclass(frozen=True)
class LabeledSample:
    x: np.ndarray
    y: float


@dataclass(frozen=True)
class Samples:
    """A batch of labeled points: ``x`` has shape ``(n, d)``, ``y`` shape ``(n,)``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValueError(f"inconsistent sample arrays: x {x.shape}, y {y.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.y.shape[0]

    def __iter__(self):
        return (LabeledSample(xi, float(yi)) for xi, yi in zip(self.x, self.y))

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def split(self, n_first: int) -> tuple[Samples, Samples]:
        return Samples(self.x[:n_first], self.y[:n_first]), Samples(self.x[n_first:], self.y[n_first:])


def evaluate(net: ReluNetwork, x):
    """Network output for one point or a batch of points (rows)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.dim:
        raise ConfigError(f"input dim {x.shape[-1]} does not match network dim {net.dim}")
    out = np.maximum(x @ net.directions.T, 0.0) @ net.weights
    return float(out) if out.ndim == 0 else out


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    # Philox is counter-based; one key per (seed, chunk) keeps chunks independent
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk])))


def gaussian_points(n: int, dim: int, seed: int, threads: int = 1) -> np.ndarray:
    """``n`` standard normal points in ``R^dim``, identical for any thread count."""
    n_chunks = -(-n // SAMPLE_CHUNK)
    out = np.empty((n, dim))

    def fill(c):
        lo = c * SAMPLE_CHUNK
        hi = min(n, lo + SAMPLE_CHUNK)
        out[lo:hi] = _chunk_rng(seed, c).standard_normal((hi - lo, dim))

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(fill, range(n_chunks)))
    else:
        for c in range(n_chunks):
            fill(c)
    return out


def sample(net: ReluNetwork, n: int, seed: int, noise_sigma: float = 0.0, threads: int = 1) -> Samples:
    """``n`` draws ``x ~ N(0, I_d)`` labeled with ``y = F(x)`` (plus optional noise)."""
    if n < 0:
        raise ValueError("sample count must be non-negative")
    x = gaussian_points(n, net.dim, seed, threads)
    y = evaluate(net, x) if n else np.zeros(0)
    if noise_sigma > 0:
        noise = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 2**32 - 1])))
        y = y + noise_sigma * noise.standard_normal(n)
    return Samples(x, np.asarray(y, dtype=np.float64).reshape(-1))


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_network(d: int, k: int, weight_profile: str = "generic", angle_profile: float = 0.01, seed: int = 0) -> ReluNetwork:
    """Test-instance factory.

    Profiles: ``generic`` (Haar directions, positive weights summing to 1),
    ``near-parallel`` (pairwise angles at most ``angle_profile`` radians) and
    ``cancelling`` (signed weights with ``sum_i w_i v_i == 0``).
    """
    if k < 1 or d < k:
        raise ConfigError(f"need 1 <= k <= d, got k={k}, d={d}")
    if weight_profile not in PROFILES:
        raise ConfigError(f"unknown profile {weight_profile!r}; choose from {', '.join(PROFILES)}")
    rng = np.random.default_rng([seed, 7919])
    if weight_profile == "generic":
        v = _unit(rng.standard_normal((k, d)))
        w = rng.dirichlet(np.ones(k))
    elif weight_profile == "near-parallel":
        base = _unit(rng.standard_normal(d))
        perp = rng.standard_normal((k, d))
        perp = _unit(perp - np.outer(perp @ base, base))
        # angles to the base direction at most theta/2 keeps pairwise angles <= theta
        phi = rng.uniform(0.0, angle_profile / 2.0, k)
        v = np.cos(phi)[:, None] * base + np.sin(phi)[:, None] * perp
        w = rng.dirichlet(np.ones(k))
    else:
        if k < 2:
            raise ConfigError("the cancelling profile needs k >= 2")
        head = _unit(rng.standard_normal((k - 1, d)))
        coef = rng.uniform(0.5, 1.0, k - 1) * rng.choice([-1.0, 1.0], k - 1)
        resultant = coef @ head
        v = np.vstack([head, _unit(resultant)])
        w = np.append(coef, -np.linalg.norm(resultant))
        w = w / np.abs(w).sum()
    v = _unit(v)
    return ReluNetwork(w / max(1.0, np.abs(w).sum()), v)


def save_model(net: ReluNetwork, path):
    Path(path).write_text(json.dumps(net.to_json(), indent=2) + "\n")


def load_model(path) -> ReluNetwork:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    return ReluNetwork.from_json(obj)


def save_samples(samples: Samples, path):
    """Header ``(count, dim)`` as little-endian u64, then rows ``x_1..x_d, y`` as f64."""
    block = np.hstack([samples.x, samples.y[:, None]]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", len(samples), samples.dim))
        fh.write(block.tobytes())


def load_samples(path) -> Samples:
    buf = Path(path).read_bytes()
    if len(buf) < 16:
        raise FormatError(f"{path}: truncated samples header")
    count, dim = struct.unpack_from("<QQ", buf, 0)
    if dim < 1 or len(buf) != 16 + 8 * count * (dim + 1):
        raise FormatError(f"{path}: header (count={count}, dim={dim}) does not match file size {len(buf)}")
    block = np.frombuffer(buf, dtype="<f8", offset=16).reshape(count, dim + 1).astype(np.float64)
    return Samples(block[:, :dim], block[:, dim])
