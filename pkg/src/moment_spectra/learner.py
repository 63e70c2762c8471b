"""Moment-tensor learner for sums of k ReLUs under the standard Gaussian.

Pipeline: estimate ``T_1..T_M`` in the ambient space, form
``Q(v) = sum_m ||T_m v||^2``, keep the top-k eigenspace ``V`` of ``Q``, then
regress Hermite coefficients ``P_0..P_D`` of the labels inside ``V``.
"""

from __future__ import annotations

import json
import math
import struct
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .datagen import ReluNetwork, Samples
from .errors import ConfigError, FormatError, ShapeError
from .hermite import hermite_all, relu_coeff
from .moments import _group_indices, analytic_moment, estimate_moments
from .symtensor import SymTensor, max_degree_within_budget, power

__all__ = [
    "LearnConfig",
    "Hypothesis",
    "DegenerateSpectrumWarning",
    "build_quadratic_form",
    "top_k_subspace",
    "learn",
    "predict",
    "analytic_hypothesis",
    "residual_orthogonal_mass",
    "save_hypothesis",
    "load_hypothesis",
]


class DegenerateSpectrumWarning(UserWarning):
    """Every eigenvalue of the quadratic form is below the degeneracy threshold."""


@dataclass
class LearnConfig:
    k: int
    d: int
    epsilon: float = 0.1
    moment_cutoff: int | None = None
    degree_D: int | None = None
    C_D: float = 2.0
    n_subspace: int = 200_000
    n_regression: int = 200_000
    seed: int = 0
    tie_tolerance: float = 1e-10
    degeneracy_threshold: float = 1e-12
    sample_multiplier: float = 1.0
    threads: int = 1
    # set when the memory budget lowered the default degree
    degree_capped: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise ConfigError(f"d must be a positive integer, got {self.d!r}")
        if self.k > self.d:
            raise ConfigError(f"k={self.k} exceeds the dimension d={self.d}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.moment_cutoff is None:
            self.moment_cutoff = 4 * self.k
        if self.moment_cutoff < 1:
            raise ConfigError("moment_cutoff must be at least 1")
        if self.n_subspace < 1 or self.n_regression < 1:
            raise ConfigError("sample counts must be positive")
        if self.C_D <= 0 or self.sample_multiplier <= 0:
            raise ConfigError("C_D and sample_multiplier must be positive")
        if self.degree_D is None:
            default = max(math.ceil(self.C_D * self.epsilon ** (-4.0 / 3.0)), self.moment_cutoff)
            cap = max_degree_within_budget(self.k)
            self.degree_capped = default > cap
            self.degree_D = min(default, cap)
        if self.degree_D < self.moment_cutoff:
            raise ConfigError(
                f"degree_D={self.degree_D} must be at least moment_cutoff={self.moment_cutoff}"
            )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> LearnConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        obj = {k: v for k, v in obj.items() if k != "degree_capped"}
        return cls(**obj)


@dataclass
class Hypothesis:
    """``F~(x) = sum_m <P_m, H_m(B^T x)>`` with orthonormal basis columns ``B``."""

    basis: np.ndarray
    coeffs: list
    eigenvalues: np.ndarray | None = None

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=np.float64)
        if self.basis.ndim != 2:
            raise ShapeError("basis must be a d x k matrix")
        k = self.basis.shape[1]
        gram = self.basis.T @ self.basis
        if np.abs(gram - np.eye(k)).max() > 1e-10:
            raise ShapeError("basis columns are not orthonormal")
        for m, p in enumerate(self.coeffs):
            if p.order != m or p.dim != k:
                raise ShapeError(f"coefficient {m} has order {p.order}, dim {p.dim}")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return predict(self, x)


def build_quadratic_form(tensors) -> np.ndarray:
    """``A = sum_m gram(T_m)``, so that ``Q(v) = v^T A v``."""
    tensors = list(tensors)
    if not tensors:
        raise ValueError("need at least one tensor")
    d = tensors[0].dim
    out = np.zeros((d, d))
    for t in tensors:
        if t.dim != d:
            raise ShapeError(f"tensor dims disagree: {t.dim} vs {d}")
        out += t.gram_matrix()
    return out


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        lead = np.nonzero(np.abs(col) > 1e-12)[0]
        if lead.size and col[lead[0]] < 0:
            vecs[:, j] = -col
    return vecs


def _canonical_cluster(vecs: np.ndarray) -> np.ndarray:
    """A basis of span(vecs) that depends only on the span.

    Gram-Schmidt on the projections of e_1, e_2, ... onto the span.
    """
    dim, size = vecs.shape
    proj = vecs @ vecs.T
    out = []
    for i in range(dim):
        u = proj[:, i].copy()
        for b in out:
            u -= (b @ u) * b
        nrm = np.linalg.norm(u)
        if nrm > 1e-6:
            out.append(u / nrm)
            if len(out) == size:
                break
    return np.column_stack(out)


def top_k_subspace(a, k: int, tie_tolerance: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` eigenvectors (columns) and eigenvalues, largest first.

    Eigenvalues closer than ``tie_tolerance`` (relative to ``||A||``) form a
    cluster whose basis is canonicalized, so degenerate spectra still give
    the same output on every run.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1e-300)
    if np.abs(a - a.T).max() > 1e-10 * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    if not 1 <= k <= a.shape[0]:
        raise ValueError(f"k={k} out of range for a {a.shape[0]}x{a.shape[0]} matrix")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    vals, vecs = vals[::-1], vecs[:, ::-1]
    tol = tie_tolerance * max(scale, 1.0)
    start = 0
    while start < len(vals):
        stop = start + 1
        while stop < len(vals) and vals[stop - 1] - vals[stop] < tol:
            stop += 1
        if stop - start > 1 and start < k:
            vecs[:, start:stop] = _canonical_cluster(vecs[:, start:stop])
        start = stop
    return _canonical_signs(vecs[:, :k]), vals[:k].copy()


def learn(samples_subspace: Samples, samples_regression: Samples, config: LearnConfig) -> Hypothesis:
    """Run the estimate / spectral / regression pipeline; see the module docstring."""
    for name, s in (("subspace", samples_subspace), ("regression", samples_regression)):
        if s.dim != config.d:
            raise ShapeError(f"{name} samples have dim {s.dim}, config says d={config.d}")
    moments = estimate_moments(samples_subspace, config.moment_cutoff, threads=config.threads)
    a = build_quadratic_form(m.tensor for m in moments[1:])
    basis, eigenvalues = top_k_subspace(a, config.k, config.tie_tolerance)
    if eigenvalues[0] < config.degeneracy_threshold:
        warnings.warn(
            f"all eigenvalues of Q are below {config.degeneracy_threshold:g}; "
            "regressing on a deterministic but arbitrary subspace",
            DegenerateSpectrumWarning,
            stacklevel=2,
        )
    coeffs = estimate_moments(samples_regression, config.degree_D, subspace_basis=basis, threads=config.threads)
    return Hypothesis(basis, [c.tensor for c in coeffs], eigenvalues)


def analytic_hypothesis(net: ReluNetwork, k: int, degree: int, moment_cutoff: int | None = None, basis=None, tie_tolerance: float = 1e-10) -> Hypothesis:
    """Steps 3-6 run on exact moments instead of estimates.

    ``T_m = M_m`` for ``m <= moment_cutoff`` (default ``4k``) picks the basis
    unless one is given; ``P_m`` is then the exact projection of ``M_m``.
    """
    if basis is None:
        cutoff = 4 * k if moment_cutoff is None else moment_cutoff
        a = build_quadratic_form(analytic_moment(net, m) for m in range(1, cutoff + 1))
        basis, eigenvalues = top_k_subspace(a, k, tie_tolerance)
    else:
        basis = np.asarray(basis, dtype=np.float64)
        eigenvalues = None
    projected = net.directions @ basis
    coeffs = []
    for m in range(degree + 1):
        c = relu_coeff(m)
        data = np.zeros(math.comb(basis.shape[1] + m - 1, m))
        if c != 0.0:
            for w, u in zip(net.weights, projected):
                data += c * w * power(u, m).data
        coeffs.append(SymTensor(m, basis.shape[1], data))
    return Hypothesis(basis, coeffs, eigenvalues)


def predict(h: Hypothesis, x, chunk: int = 8192):
    """Evaluate the hypothesis at one point or at the rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != h.dim:
        raise ShapeError(f"input dim {x.shape[1]} does not match hypothesis dim {h.dim}")
    # <P_m, H_m(z)> = sum_alpha sqrt(weight) P_alpha prod_j h_{alpha_j}(z_j)
    alphas, _ = _group_indices(h.k, h.degree)
    coef = np.concatenate([np.sqrt(p.weights) * p.data for p in h.coeffs])
    out = np.empty(x.shape[0])
    for lo in range(0, x.shape[0], chunk):
        z = x[lo:lo + chunk] @ h.basis
        table = hermite_all(h.degree, z.T)
        mono = table[alphas[:, 0], 0, :]
        for j in range(1, h.k):
            mono = mono * table[alphas[:, j], j, :]
        out[lo:lo + chunk] = coef @ mono
    return float(out[0]) if single else out


def residual_orthogonal_mass(net: ReluNetwork, basis, m_max: int) -> dict:
    """Diagnostics of how much moment mass the subspace misses.

    Returns arrays indexed by ``m = 0..m_max``:

    * ``perp``: max over an orthonormal basis ``u`` of
      ``span(B)^perp`` within ``span(B, v_1..v_k)`` of ``||M_m u||``;
    * ``err``: ``||R_m - M_m||`` where ``R_m`` projects every ``v_i`` onto
      ``span(B)`` before taking the tensor power.

    Everything is computed in coordinates of ``span(B, v_1..v_k)``.
    """
    basis = np.asarray(basis, dtype=np.float64)
    k = basis.shape[1]
    proj_v = net.directions @ basis @ basis.T
    resid = net.directions - proj_v
    # orthonormal completion of span(B) inside span(B) + span(v)
    q, s, _ = np.linalg.svd(resid.T, full_matrices=False)
    extra = q[:, s > 1e-10 * max(1.0, s.max(initial=0.0))]
    frame = np.hstack([basis, extra])
    n_perp = extra.shape[1]
    v_loc = net.directions @ frame
    pv_loc = proj_v @ frame
    perp = np.zeros(m_max + 1)
    err = np.zeros(m_max + 1)
    for m in range(m_max + 1):
        c = relu_coeff(m)
        if c == 0.0:
            continue
        full = SymTensor.zeros(m, frame.shape[1])
        projected = SymTensor.zeros(m, frame.shape[1])
        for w, v, pv in zip(net.weights, v_loc, pv_loc):
            full = full + w * power(v, m)
            projected = projected + w * power(pv, m)
        err[m] = abs(c) * (full - projected).norm2()
        if m >= 1 and n_perp:
            units = np.eye(frame.shape[1])[k:]
            perp[m] = max(abs(c) * full.contract(u).norm2() for u in units)
    return {"perp": perp, "err": err}


# -- file format -------------------------------------------------------------
#
# u64 little-endian header length L, L bytes of UTF-8 JSON
# {"dim", "k", "D", "basis" (row-major), "eigenvalues"}, then the SymTensor
# blocks for P_0..P_D back to back.

def hypothesis_to_bytes(h: Hypothesis) -> bytes:
    header = {
        "dim": h.dim,
        "k": h.k,
        "D": h.degree,
        "basis": h.basis.reshape(-1).tolist(),
        "eigenvalues": None if h.eigenvalues is None else np.asarray(h.eigenvalues).tolist(),
    }
    head = json.dumps(header, sort_keys=True).encode()
    return struct.pack("<Q", len(head)) + head + b"".join(p.to_bytes() for p in h.coeffs)


def hypothesis_from_bytes(buf: bytes) -> Hypothesis:
    if len(buf) < 8:
        raise FormatError("truncated hypothesis header")
    (length,) = struct.unpack_from("<Q", buf, 0)
    if 8 + length > len(buf):
        raise FormatError("hypothesis header length exceeds file size")
    try:
        header = json.loads(buf[8:8 + length])
        dim, k, degree = int(header["dim"]), int(header["k"]), int(header["D"])
        basis = np.array(header["basis"], dtype=np.float64).reshape(dim, k)
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"bad hypothesis header: {exc}") from None
    offset = 8 + length
    coeffs = []
    for _ in range(degree + 1):
        p, offset = SymTensor.from_bytes(buf, offset)
        coeffs.append(p)
    if offset != len(buf):
        raise FormatError("trailing bytes after hypothesis coefficients")
    eig = header.get("eigenvalues")
    return Hypothesis(basis, coeffs, None if eig is None else np.array(eig))


def save_hypothesis(h: Hypothesis, path):
    Path(path).write_bytes(hypothesis_to_bytes(h))


def load_hypothesis(path) -> Hypothesis:
    return hypothesis_from_bytes(Path(path).read_bytes())
