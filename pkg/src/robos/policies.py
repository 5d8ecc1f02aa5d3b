"""Acquisition rules: RoBOS, SO-UCB, DRBO and WRBO, plus the threshold rules.

Every selector works on the (n_actions, n_contexts) UCB matrix of the current
posterior. Ties always go to the lowest action index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fragility import FragilityResult, dro_worst_case, estimated_fragility
from .simplex import MmdMetric

POLICY_KINDS = ("robos", "so_ucb", "drbo", "wrbo")
TAU_MODES = ("fixed", "fraction_of_max", "range_fraction", "dynamic_lcb")
RADIUS_MODES = ("fixed", "epsilon")


@dataclass(frozen=True)
class TauRule:
    """``fixed``: tau = value. ``fraction_of_max``: tau = value * max f.
    ``range_fraction``: tau = min f + value * (max f - min f).
    ``dynamic_lcb``: tau_t = value * <w_t, lcb_x'> at x' = argmax_x <w_t, lcb_x>."""

    mode: str = "fixed"
    value: float = 0.0

    def __post_init__(self):
        if self.mode not in TAU_MODES:
            raise ValueError(f"unknown tau mode {self.mode!r}; expected one of {TAU_MODES}")
        if not np.isfinite(self.value):
            raise ValueError("tau value must be finite")
        if self.mode == "range_fraction" and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"tau range fraction must lie in [0, 1], got {self.value}")
        if self.mode in ("fraction_of_max", "dynamic_lcb") and not 0.0 < self.value <= 1.0:
            raise ValueError(f"tau fraction must lie in (0, 1], got {self.value}")

    def static_value(self, f: np.ndarray) -> float | None:
        """Threshold known before the run starts, or None for the dynamic rule."""
        if self.mode == "fixed":
            return float(self.value)
        if self.mode == "fraction_of_max":
            return float(self.value * np.max(f))
        if self.mode == "range_fraction":
            return float(np.min(f) + self.value * (np.max(f) - np.min(f)))
        return None


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    label: str = ""
    radius: float = 0.0
    radius_mode: str = "fixed"
    tau: TauRule | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.radius_mode not in RADIUS_MODES:
            raise ValueError(f"unknown radius mode {self.radius_mode!r}")
        if not self.radius >= 0.0:
            raise ValueError("radius must be nonnegative")
        if not self.label:
            object.__setattr__(self, "label", self.default_label())

    def default_label(self) -> str:
        if self.kind != "drbo":
            return self.kind
        suffix = "eps" if self.radius_mode == "epsilon" else ""
        return f"drbo_r{self.radius:g}{suffix}"

    def radius_at(self, eps: float) -> float:
        return self.radius * eps if self.radius_mode == "epsilon" else self.radius


@dataclass
class Decision:
    action: int
    tau: float
    fragilities: list[FragilityResult] = field(default_factory=list)
    values: np.ndarray | None = None
    infeasible: bool = False


def expectations(ucb: np.ndarray, w: np.ndarray) -> np.ndarray:
    """<w, row> for each row, computed row by row so every caller gets identical bits."""
    return np.array([float(row @ w) for row in ucb])


def so_ucb_select(ucb: np.ndarray, w_t: np.ndarray) -> int:
    return int(np.argmax(expectations(ucb, w_t)))


def wrbo_select(ucb: np.ndarray) -> int:
    return int(np.argmax(ucb.min(axis=1)))


def drbo_values(ucb: np.ndarray, w_t: np.ndarray, radius: float, metric: MmdMetric) -> np.ndarray:
    return np.array([dro_worst_case(row, w_t, radius, metric)[0] for row in ucb])


def drbo_select(ucb: np.ndarray, w_t: np.ndarray, radius: float, metric: MmdMetric) -> int:
    return int(np.argmax(drbo_values(ucb, w_t, radius, metric)))


def robos_select(ucb: np.ndarray, w_t: np.ndarray, tau: float, metric: MmdMetric,
                 method: str = "path") -> Decision:
    """argmin of the estimated fragility; falls back to SO-UCB when every action is infeasible."""
    frags = [estimated_fragility(row, w_t, tau, metric, method=method) for row in ucb]
    kappas = np.array([f.kappa for f in frags])
    if np.all(np.isinf(kappas)):
        return Decision(so_ucb_select(ucb, w_t), tau, frags, kappas, infeasible=True)
    return Decision(int(np.argmin(kappas)), tau, frags, kappas)


def dynamic_tau(lcb: np.ndarray, w_t: np.ndarray, fraction: float) -> float:
    """fraction * <w_t, lcb_x'> with x' the action maximizing the expected LCB."""
    vals = expectations(lcb, w_t)
    return float(fraction * vals[int(np.argmax(vals))])


def select(policy: PolicyConfig, ucb: np.ndarray, w_t: np.ndarray, tau: float, eps: float,
           metric: MmdMetric) -> Decision:
    if policy.kind == "robos":
        return robos_select(ucb, w_t, tau, metric)
    if policy.kind == "so_ucb":
        vals = expectations(ucb, w_t)
        return Decision(int(np.argmax(vals)), tau, values=vals)
    if policy.kind == "drbo":
        vals = drbo_values(ucb, w_t, policy.radius_at(eps), metric)
        return Decision(int(np.argmax(vals)), tau, values=vals)
    vals = ucb.min(axis=1)
    return Decision(int(np.argmax(vals)), tau, values=vals)
