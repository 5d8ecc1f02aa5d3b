"""Exact GP inference over a finite action x context grid.

The posterior is kept as an incrementally grown Cholesky factor of
(K_t + lambda I) together with V = L^{-1} K(obs, grid), so one observation costs
O(t * |grid|) instead of a refit.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import ProductKernel

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


class ConditioningError(np.linalg.LinAlgError):
    """Cholesky factorization failed at every jitter level."""

    def __init__(self, message, jitter):
        super().__init__(f"{message} (last jitter tried: {jitter:g})")
        self.jitter = jitter


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("expected a nonempty list of points")
    return arr


@dataclass(frozen=True, eq=False)
class GridSpec:
    actions: np.ndarray
    contexts: np.ndarray

    def __post_init__(self):
        actions = _as_points(self.actions)
        contexts = _as_points(self.contexts)
        for name, pts in (("actions", actions), ("contexts", contexts)):
            if len(np.unique(pts, axis=0)) != len(pts):
                raise ValueError(f"grid {name} must be distinct")
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "contexts", contexts)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_contexts(self) -> int:
        return len(self.contexts)

    @property
    def size(self) -> int:
        return self.n_actions * self.n_contexts

    def index(self, x: int, c: int) -> int:
        if not (0 <= x < self.n_actions and 0 <= c < self.n_contexts):
            raise IndexError(f"grid index ({x}, {c}) out of range")
        return x * self.n_contexts + c


class _GrowingCholesky:
    """Lower-triangular factor of A + jitter*I, grown one row/column at a time."""

    def __init__(self, capacity=16):
        self.L = np.zeros((capacity, capacity))
        self.t = 0

    def _reserve(self):
        cap = self.L.shape[0]
        if self.t == cap:
            grown = np.zeros((2 * cap, 2 * cap))
            grown[:cap, :cap] = self.L
            self.L = grown

    def new_row(self, cross: np.ndarray, diag: float):
        """Row of the extended factor; ``None`` when the new pivot is not positive."""
        L = self.L[: self.t, : self.t]
        row = _forward(L, cross) if self.t else np.zeros(0)
        pivot = diag - row @ row
        if not np.isfinite(pivot) or pivot <= 0.0:
            return None
        return row, np.sqrt(pivot)

    def append(self, row, pivot):
        self._reserve()
        self.L[self.t, : self.t] = row
        self.L[self.t, self.t] = pivot
        self.t += 1

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.L)[: self.t])))


def _forward(L, b):
    return solve_triangular(L, b, lower=True, check_finite=False)


class GPPosterior:
    """Zero-mean GP posterior on ``grid`` with regularizer ``lam`` (likelihood variance).

    ``noise`` is the sub-Gaussian noise scale sigma and ``rkhs_bound`` is B, both of
    which only enter the confidence radius :meth:`beta`.
    """

    def __init__(self, grid: GridSpec, kernel: ProductKernel, noise: float, rkhs_bound: float,
                 delta: float, lam: float = 1.0, prior: np.ndarray | None = None):
        if noise <= 0 or rkhs_bound <= 0 or lam <= 0:
            raise ValueError("noise, rkhs_bound and lam must be positive")
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        self.grid = grid
        self.kernel = kernel
        self.noise = float(noise)
        self.rkhs_bound = float(rkhs_bound)
        self.delta = float(delta)
        self.lam = float(lam)
        self.lam_bar = max(1.0, self.lam)
        self.K = kernel.grid_matrix(grid.actions, grid.contexts) if prior is None else prior
        self.prior_var = np.diag(self.K).copy()
        self.reset()

    def reset(self, jitter_level: int = 0):
        self.jitter_level = jitter_level
        self.obs: list[int] = []
        self.y: list[float] = []
        self._chol = _GrowingCholesky()
        self._chol_bar = _GrowingCholesky() if self.lam_bar != self.lam else None
        self._V = np.zeros((16, self.grid.size))
        self._alpha = np.zeros(16)
        self._mean = np.zeros(self.grid.size)
        self._var = self.prior_var.copy()

    @property
    def jitter(self) -> float:
        return JITTER_LADDER[self.jitter_level]

    @property
    def t(self) -> int:
        """Number of observations absorbed; the posterior is the one used in round t + 1."""
        return len(self.obs)

    def copy(self) -> "GPPosterior":
        return copy.deepcopy(self)

    # -- updates -----------------------------------------------------------------

    def update(self, x: int, c: int, y: float) -> "GPPosterior":
        z = self.grid.index(x, c)
        ok = self._try_append(z, float(y))
        while not ok:
            if self.jitter_level + 1 >= len(JITTER_LADDER):
                raise ConditioningError("posterior factorization failed", self.jitter)
            ok = self._refactor(self.jitter_level + 1, extra=(z, float(y)))
        return self

    def _try_append(self, z: int, y: float) -> bool:
        cross = self.K[z, self.obs]
        base = self.K[z, z] + self.jitter
        step = self._chol.new_row(cross, base + self.lam)
        step_bar = None
        if self._chol_bar is not None:
            step_bar = self._chol_bar.new_row(cross, base + self.lam_bar)
            if step_bar is None:
                return False
        if step is None:
            return False
        row, pivot = step
        t = self.t
        if t == self._V.shape[0]:
            self._V = np.vstack([self._V, np.zeros_like(self._V)])
            self._alpha = np.concatenate([self._alpha, np.zeros_like(self._alpha)])
        v = (self.K[z] - row @ self._V[:t]) / pivot
        a = (y - row @ self._alpha[:t]) / pivot
        self._V[t] = v
        self._alpha[t] = a
        self._mean += a * v
        self._var -= v * v
        self._chol.append(row, pivot)
        if step_bar is not None:
            self._chol_bar.append(*step_bar)
        self.obs.append(z)
        self.y.append(y)
        return True

    def _refactor(self, level: int, extra) -> bool:
        pending = list(zip(self.obs, self.y)) + [extra]
        self.reset(level)
        for i, (z, y) in enumerate(pending):
            if not self._try_append(z, y):
                # keep the already-absorbed history so the next level can retry
                self.obs += [p[0] for p in pending[i:-1]]
                self.y += [p[1] for p in pending[i:-1]]
                return False
        return True

    # -- queries -----------------------------------------------------------------

    def mean_var(self) -> tuple[np.ndarray, np.ndarray]:
        shape = (self.grid.n_actions, self.grid.n_contexts)
        var = np.clip(self._var, 0.0, self.prior_var)
        return self._mean.reshape(shape).copy(), var.reshape(shape)

    def logdet(self, bar: bool = False) -> float:
        """log det(K_t + lam I), or with lam_bar = max(1, lam) when ``bar``."""
        if bar and self._chol_bar is not None:
            return self._chol_bar.logdet()
        return self._chol.logdet()

    def beta(self) -> float:
        inner = self.logdet(bar=True) + 2.0 * np.log(1.0 / self.delta)
        return self.noise * np.sqrt(max(inner, 0.0)) + self.rkhs_bound

    def info_gain(self) -> float:
        """0.5 log det(I + K_A / lam) for the sampled multiset A."""
        return 0.5 * (self.logdet() - self.t * np.log(self.lam + self.jitter)) if self.t else 0.0


# Module-level aliases with the operation names used throughout the harness.

def posterior_mean_var(state: GPPosterior) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and standard deviation, both shaped (n_actions, n_contexts)."""
    mu, var = state.mean_var()
    return mu, np.sqrt(var)


def beta_t(state: GPPosterior) -> float:
    return state.beta()


def ucb_lcb(state: GPPosterior, beta: float | None = None):
    """Full UCB and LCB matrices; row x is ucb^t_x."""
    mu, sd = posterior_mean_var(state)
    b = state.beta() if beta is None else beta
    return mu + b * sd, mu - b * sd


def ucb_lcb_vectors(state: GPPosterior, x: int, beta: float | None = None):
    ucb, lcb = ucb_lcb(state, beta)
    return ucb[x], lcb[x]


def update(state: GPPosterior, x: int, c: int, y: float) -> GPPosterior:
    return state.update(x, c, y)


def realized_info_gain(state: GPPosterior) -> float:
    return state.info_gain()


def rkhs_function(K: np.ndarray, norm: float, n_centers: int, rng: np.random.Generator) -> np.ndarray:
    """Values on the grid of f = sum_i a_i k(., z_i) with ||f||_H = norm exactly.

    Centers are distinct grid points drawn from ``rng``; K is the grid kernel matrix.
    """
    size = K.shape[0]
    centers = rng.choice(size, size=min(n_centers, size), replace=False)
    alpha = rng.standard_normal(len(centers))
    sq = alpha @ K[np.ix_(centers, centers)] @ alpha
    if sq <= 0:
        raise ValueError("degenerate RKHS sample")
    alpha *= norm / np.sqrt(sq)
    return K[:, centers] @ alpha
