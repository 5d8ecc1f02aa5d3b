"""Context distributions on the probability simplex and the MMD norm ||w||_M = sqrt(w^T M w)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve

from .gp import JITTER_LADDER, ConditioningError
from .kernels import KernelSpec, kernel_matrix

NEG_TOL = 1e-12
SUM_TOL = 1e-9


class UniformFallbackWarning(RuntimeWarning):
    """All discretized densities underflowed and the uniform distribution was used."""


def as_distribution(w) -> np.ndarray:
    """Validate a weight vector; floating-point dust below zero is clamped and renormalized."""
    w = np.asarray(w, dtype=float).ravel()
    if w.size == 0 or not np.all(np.isfinite(w)):
        raise ValueError("distribution must be a nonempty finite vector")
    if np.any(w < -NEG_TOL):
        raise ValueError(f"negative weight {w.min():g}")
    if abs(w.sum() - 1.0) > SUM_TOL:
        raise ValueError(f"weights sum to {w.sum():.12g}, not 1")
    w = np.clip(w, 0.0, None)
    return w / w.sum()


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


@dataclass(frozen=True, eq=False)
class MmdMetric:
    """Kernel matrix of the contexts with a Cholesky factor for M^{-1} solves.

    ``M`` is symmetrized and carries the smallest jitter from the ladder that makes
    the factorization succeed; every norm computed through the metric uses that same
    matrix so that solvers and checks agree.
    """

    M: np.ndarray
    jitter: float = field(init=False, default=0.0)

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("M must be square")
        M = 0.5 * (M + M.T)
        if np.linalg.eigvalsh(M)[0] < -1e-10:
            raise ValueError("context kernel matrix is not positive semidefinite")
        for jitter in JITTER_LADDER:
            Mj = M + jitter * np.eye(len(M)) if jitter else M
            try:
                chol = np.linalg.cholesky(Mj)
            except np.linalg.LinAlgError:
                continue
            object.__setattr__(self, "M", Mj)
            object.__setattr__(self, "jitter", jitter)
            object.__setattr__(self, "_chol", chol)
            return
        raise ConditioningError("context kernel matrix is singular", JITTER_LADDER[-1])

    @classmethod
    def from_kernel(cls, spec: KernelSpec, contexts) -> "MmdMetric":
        return cls(kernel_matrix(spec, contexts, contexts))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def norm(self, d) -> float:
        d = np.asarray(d, dtype=float)
        return float(np.sqrt(max(d @ self.M @ d, 0.0)))

    def distance(self, w, w2) -> float:
        return self.norm(np.asarray(w, dtype=float) - np.asarray(w2, dtype=float))

    def solve(self, b) -> np.ndarray:
        """M^{-1} b through the cached factor."""
        return cho_solve((self._chol, True), np.asarray(b, dtype=float), check_finite=False)

    def inverse_norm(self, f) -> float:
        f = np.asarray(f, dtype=float)
        return float(np.sqrt(max(f @ self.solve(f), 0.0)))

    def vertex_distances(self, w) -> np.ndarray:
        """||e_i - w||_M for every vertex e_i."""
        w = np.asarray(w, dtype=float)
        Mw = self.M @ w
        sq = np.diag(self.M) - 2.0 * Mw + w @ Mw
        return np.sqrt(np.clip(sq, 0.0, None))

    @cached_property
    def diameter(self) -> float:
        """Largest M-distance between two points of the simplex (attained at vertices)."""
        d = np.diag(self.M)
        sq = d[:, None] + d[None, :] - 2.0 * self.M
        return float(np.sqrt(max(sq.max(), 0.0)))


def mmd(metric: MmdMetric, w, w2) -> float:
    w = np.asarray(w, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if w.shape != w2.shape or w.shape != (metric.n,):
        raise ValueError(f"dimension mismatch: {w.shape} vs {w2.shape} for n={metric.n}")
    return metric.distance(w, w2)


def discretized_gaussian(contexts, mean, variance) -> np.ndarray:
    """Gaussian density evaluated at each context and renormalized onto the simplex.

    Multi-dimensional contexts use an isotropic Gaussian. If every density
    underflows the uniform distribution is returned and a warning is emitted.
    """
    if variance <= 0:
        raise ValueError("variance must be positive")
    pts = np.asarray(contexts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    sq = np.sum((pts - np.asarray(mean, dtype=float)) ** 2, axis=1)
    logp = -0.5 * sq / variance
    dens = np.exp(logp)
    total = dens.sum()
    if total == 0.0 or not np.isfinite(total):
        warnings.warn("all context densities underflowed; using uniform weights",
                      UniformFallbackWarning, stacklevel=2)
        return np.full(len(pts), 1.0 / len(pts))
    return dens / total


def empirical_distribution(observed, n: int) -> np.ndarray:
    """Normalized counts of observed context indices; uniform before any observation."""
    observed = np.asarray(observed, dtype=int)
    if observed.size == 0:
        return np.full(n, 1.0 / n)
    counts = np.bincount(observed, minlength=n).astype(float)
    if counts.size != n:
        raise ValueError("observed context index out of range")
    return counts / counts.sum()


def b_prime(metric: MmdMetric, f) -> float:
    """max_x ||f_x||_{M^{-1}} over the rows of the reward matrix."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    if f.shape[1] != metric.n:
        raise ValueError("reward matrix columns must match the number of contexts")
    vals = metric.solve(f.T)
    return float(np.sqrt(np.clip(np.einsum("ij,ji->i", f, vals), 0.0, None)).max())


def empirical_mmd_bound(t: int, delta: float) -> float:
    """Per-round deviation radius for an empirical distribution of t - 1 samples."""
    if t < 2:
        return np.inf
    return (2.0 + np.sqrt(2.0 * np.log(np.pi ** 2 * t ** 2 / (2.0 * delta)))) / np.sqrt(t - 1)
