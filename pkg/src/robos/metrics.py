"""Regret accounting, bound diagnostics and trace serialization."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .fragility import true_fragility
from .simplex import MmdMetric

TRACE_VERSION = 1
TRACE_COLUMNS = (
    "t", "action", "context", "y", "tau", "eps", "expected_reward", "kappa",
    "lenient", "rs", "beta", "sigma_w", "info_gain", "infeasible",
    "w", "w_star", "kappa_hat",
)


@dataclass
class RoundRecord:
    t: int
    w: np.ndarray
    w_star: np.ndarray
    eps: float
    tau: float
    action: int
    context: int
    y: float
    expected_reward: float
    kappa: float
    lenient: float
    rs: float
    beta: float
    sigma_w: float
    info_gain: float
    infeasible: bool = False
    kappa_hat: np.ndarray = field(default_factory=lambda: np.zeros(0))


def instantaneous_lenient(tau: float, expected: float) -> float:
    return max(tau - expected, 0.0)


def instantaneous_rs(tau: float, kappa: float, eps: float, expected: float) -> float:
    """(tau - kappa * eps - expected)^+ ; a round with infinite kappa contributes zero."""
    if not np.isfinite(kappa):
        return 0.0
    return max(tau - kappa * eps - expected, 0.0)


class BenchmarkFragility:
    """Clamped true fragility of the best action, cached on (w_t, tau)."""

    def __init__(self, f: np.ndarray, metric: MmdMetric):
        self.f = f
        self.metric = metric
        self._cache: dict[tuple[bytes, float], float] = {}

    def __call__(self, w: np.ndarray, tau: float) -> float:
        key = (np.asarray(w, dtype=float).tobytes(), float(tau))
        if key not in self._cache:
            kappas = [true_fragility(row, w, tau, self.metric).kappa for row in self.f]
            self._cache[key] = float(min(kappas))
        return self._cache[key]


def _field(trace, name):
    return np.array([getattr(r, name) for r in trace], dtype=float)


def lenient_regret(trace) -> np.ndarray:
    return np.cumsum(_field(trace, "lenient"))


def rs_regret(trace) -> np.ndarray:
    return np.cumsum(_field(trace, "rs"))


def concentration_slack(t, delta: float) -> np.ndarray:
    """sqrt(8 t log(12/delta)): the additive term of the variance concentration step."""
    return np.sqrt(8.0 * np.asarray(t, dtype=float) * np.log(12.0 / delta))


@dataclass
class BoundCurves:
    theorem1: np.ndarray
    intermediate: np.ndarray
    theorem2: np.ndarray


def theorem_bound_curves(trace, delta: float, b_prime: float = 0.0) -> BoundCurves:
    """Per-round bound diagnostics using realized quantities.

    theorem1: 4 beta_t sqrt(t (2 gamma_t + 2 log(12/delta))) with the realized
        information gain in place of gamma_t.
    intermediate: 2 beta_t sum_s <w*_s, sigma_s(x_s, .)> + 2 beta_t sqrt(8 t log(12/delta)).
    theorem2: theorem1 + b_prime * sum_s eps_s.
    """
    if not trace:
        empty = np.zeros(0)
        return BoundCurves(empty, empty, empty)
    t = np.arange(1, len(trace) + 1, dtype=float)
    beta = _field(trace, "beta")
    gamma = _field(trace, "info_gain")
    sig = np.cumsum(_field(trace, "sigma_w"))
    eps = np.cumsum(_field(trace, "eps"))
    log_term = 2.0 * np.log(12.0 / delta)
    theorem1 = 4.0 * beta * np.sqrt(t * (2.0 * gamma + log_term))
    intermediate = 2.0 * beta * sig + 2.0 * beta * concentration_slack(t, delta)
    return BoundCurves(theorem1, intermediate, theorem1 + b_prime * eps)


def sublinearity_stat(series, quarter: str = "last") -> float:
    """Least-squares slope of a cumulative series over its last (or first) quarter."""
    y = np.asarray(series, dtype=float)
    T = len(y)
    if T < 2:
        return 0.0
    q = max(T // 4, 2)
    idx = np.arange(T - q, T) if quarter == "last" else np.arange(0, q)
    if quarter not in ("last", "first"):
        raise ValueError("quarter must be 'last' or 'first'")
    x = idx + 1.0
    xc = x - x.mean()
    return float(xc @ (y[idx] - y[idx].mean()) / (xc @ xc))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _num(v) -> str:
    v = float(v)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _vec(v) -> str:
    return " ".join(_num(a) for a in np.asarray(v).ravel())


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for r in trace:
        writer.writerow([
            r.t, r.action, r.context, _num(r.y), _num(r.tau), _num(r.eps),
            _num(r.expected_reward), _num(r.kappa), _num(r.lenient), _num(r.rs),
            _num(r.beta), _num(r.sigma_w), _num(r.info_gain), int(r.infeasible),
            _vec(r.w), _vec(r.w_star), _vec(r.kappa_hat),
        ])
    return buf.getvalue()


def trace_from_csv(text: str) -> list[RoundRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))

    def vec(s):
        return np.array([float(v) for v in s.split()]) if s else np.zeros(0)

    return [RoundRecord(
        t=int(r["t"]), w=vec(r["w"]), w_star=vec(r["w_star"]), eps=float(r["eps"]),
        tau=float(r["tau"]), action=int(r["action"]), context=int(r["context"]),
        y=float(r["y"]), expected_reward=float(r["expected_reward"]), kappa=float(r["kappa"]),
        lenient=float(r["lenient"]), rs=float(r["rs"]), beta=float(r["beta"]),
        sigma_w=float(r["sigma_w"]), info_gain=float(r["info_gain"]),
        infeasible=bool(int(r["infeasible"])), kappa_hat=vec(r["kappa_hat"]),
    ) for r in rows]


def summarize(trace, delta: float, b_prime: float) -> dict:
    lenient = lenient_regret(trace)
    rs = rs_regret(trace)
    curves = theorem_bound_curves(trace, delta, b_prime)
    if not trace:
        return {"rounds": 0}
    return {
        "rounds": len(trace),
        "final_lenient_regret": float(lenient[-1]),
        "final_rs_regret": float(rs[-1]),
        "lenient_slope_first": sublinearity_stat(lenient, "first"),
        "lenient_slope_last": sublinearity_stat(lenient, "last"),
        "rs_slope_first": sublinearity_stat(rs, "first"),
        "rs_slope_last": sublinearity_stat(rs, "last"),
        "bound_theorem1": float(curves.theorem1[-1]),
        "bound_intermediate": float(curves.intermediate[-1]),
        "bound_theorem2": float(curves.theorem2[-1]),
        "rs_exceeds_theorem1": bool(np.any(rs > curves.theorem1)),
        "rs_exceeds_intermediate": bool(np.any(rs > curves.intermediate)),
        "lenient_exceeds_theorem2": bool(np.any(lenient > curves.theorem2)),
        "infeasible_rounds": int(sum(r.infeasible for r in trace)),
        "mean_eps": float(np.mean([r.eps for r in trace])),
    }
