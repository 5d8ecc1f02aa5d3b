"""Stationary kernels on finite point sets and their product over actions x contexts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("rbf", "matern")
MATERN_NUS = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class KernelSpec:
    """One factor of the product kernel.

    ``lengthscales`` holds one entry per input dimension (ARD); a single entry is
    broadcast over all dimensions. Signal variance is fixed to one, so k(z, z) = 1.
    """

    kind: str = "rbf"
    lengthscales: tuple[float, ...] = (1.0,)
    nu: float = 2.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        if not ls or any(not np.isfinite(v) or v <= 0 for v in ls):
            raise ValueError(f"lengthscales must be positive, got {self.lengthscales}")
        object.__setattr__(self, "lengthscales", ls)
        if self.kind == "matern" and float(self.nu) not in MATERN_NUS:
            raise ValueError(f"matern nu must be one of {MATERN_NUS}, got {self.nu}")

    def __call__(self, a, b) -> np.ndarray:
        return kernel_matrix(self, a, b)


def _points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[:, None] if p.ndim == 1 else np.atleast_2d(p)


def _scaled_distance(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _points(a), _points(b)
    ls = np.asarray(spec.lengthscales)
    if ls.size not in (1, a.shape[1]):
        raise ValueError(f"{ls.size} lengthscales for {a.shape[1]}-dimensional inputs")
    diff = (a[:, None, :] - b[None, :, :]) / ls
    return np.sqrt(np.sum(diff * diff, axis=-1))


def kernel_matrix(spec: KernelSpec, a, b) -> np.ndarray:
    r = _scaled_distance(spec, a, b)
    if spec.kind == "rbf":
        return np.exp(-0.5 * r * r)
    if spec.nu == 0.5:
        return np.exp(-r)
    if spec.nu == 1.5:
        s = np.sqrt(3.0) * r
        return (1.0 + s) * np.exp(-s)
    s = np.sqrt(5.0) * r
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


@dataclass(frozen=True)
class ProductKernel:
    """k((x, c), (x', c')) = k_action(x, x') * k_context(c, c')."""

    action: KernelSpec = field(default_factory=KernelSpec)
    context: KernelSpec = field(default_factory=KernelSpec)

    def grid_matrix(self, actions, contexts) -> np.ndarray:
        """Kernel over the full grid in action-major order (index = x * n + c)."""
        return np.kron(kernel_matrix(self.action, actions, actions),
                       kernel_matrix(self.context, contexts, contexts))
