"""Ground-truth objectives, reference/true context distributions and noisy observations."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gp import GridSpec, rkhs_function
from .kernels import ProductKernel
from .rng import RngStreams
from .simplex import MmdMetric, discretized_gaussian, empirical_distribution

OBJECTIVE_KINDS = ("rkhs_sample", "tabular", "glucose_surrogate")
REFERENCE_KINDS = ("fixed_gaussian", "per_round_gaussian", "empirical")
TRUE_KINDS = ("fixed_gaussian", "shifted")
SHIFT_KINDS = ("none", "constant_offset", "decaying")


# ---------------------------------------------------------------------------
# configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GlucoseParams:
    """o = target + s * tanh(isf * (carbs / carb_ratio - dose) / s); reward = -|o - target|.

    ``saturation`` (s) caps the glucose excursion; 0 gives the linear response
    o = target + isf * (carbs / carb_ratio - dose).
    """

    target: float = 112.5
    isf: float = 0.5
    carb_ratio: float = 1.0
    saturation: float = 40.0

    def __post_init__(self):
        if self.isf <= 0 or self.carb_ratio <= 0:
            raise ValueError("isf and carb_ratio must be positive")
        if self.saturation < 0:
            raise ValueError("saturation must be nonnegative")


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str = "rkhs_sample"
    rkhs_norm: float = 1.0
    centers: int = 20
    seed: int | None = None
    path: str | None = None
    glucose: GlucoseParams = GlucoseParams()

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}; expected one of {OBJECTIVE_KINDS}")
        if self.kind == "rkhs_sample" and (self.rkhs_norm <= 0 or self.centers < 1):
            raise ValueError("rkhs_sample needs rkhs_norm > 0 and centers >= 1")
        if self.kind == "tabular" and not self.path:
            raise ValueError("tabular objective needs a path")


@dataclass(frozen=True)
class ReferenceConfig:
    """Reference distribution P_t.

    ``per_round_gaussian`` draws its mean from U(mean_low, mean_high) each round;
    ``empirical`` uses the contexts observed so far (uniform before any).
    """

    kind: str = "fixed_gaussian"
    mean: float = 0.0
    variance: float = 1.0
    mean_low: float = 0.0
    mean_high: float = 1.0

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise ValueError(f"unknown reference kind {self.kind!r}; expected one of {REFERENCE_KINDS}")
        if self.variance <= 0:
            raise ValueError("reference variance must be positive")
        if self.kind == "per_round_gaussian" and self.mean_high < self.mean_low:
            raise ValueError("mean_high must be at least mean_low")


@dataclass(frozen=True)
class TrueConfig:
    """True distribution P*_t.

    ``shifted`` centers a Gaussian at the reference mean plus an offset N_t:
    ``constant_offset`` draws N_t ~ U(-offset, offset), ``decaying`` draws
    N_t ~ U(-offset/log(t+2), offset/log(t+2)). A missing variance reuses the
    reference variance, so shift ``none`` reproduces the reference exactly.
    """

    kind: str = "fixed_gaussian"
    mean: float = 0.0
    variance: float | None = 1.0
    shift: str = "none"
    offset: float = 6.0

    def __post_init__(self):
        if self.kind not in TRUE_KINDS:
            raise ValueError(f"unknown true-process kind {self.kind!r}; expected one of {TRUE_KINDS}")
        if self.shift not in SHIFT_KINDS:
            raise ValueError(f"unknown shift {self.shift!r}; expected one of {SHIFT_KINDS}")
        if self.variance is not None and self.variance <= 0:
            raise ValueError("true variance must be positive")
        if self.kind == "fixed_gaussian" and self.variance is None:
            raise ValueError("fixed_gaussian true process needs a variance")
        if self.offset < 0:
            raise ValueError("offset must be nonnegative")


@dataclass(frozen=True)
class EnvironmentConfig:
    objective: ObjectiveConfig = ObjectiveConfig()
    reference: ReferenceConfig = ReferenceConfig()
    truth: TrueConfig = TrueConfig()
    noise: float = 0.02
    horizon: int = 100

    def __post_init__(self):
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.reference.kind == "empirical" and self.truth.kind != "fixed_gaussian":
            raise ValueError("empirical reference requires a fixed_gaussian true process")


def auto_context_range(env: EnvironmentConfig, width: float = 4.0) -> tuple[float, float]:
    """Range covering every Gaussian the run can produce, padded by ``width`` std devs."""
    ref, tru = env.reference, env.truth
    lows, highs, variances = [], [], []
    if ref.kind == "fixed_gaussian":
        lows.append(ref.mean), highs.append(ref.mean), variances.append(ref.variance)
    elif ref.kind == "per_round_gaussian":
        lows.append(ref.mean_low), highs.append(ref.mean_high), variances.append(ref.variance)
    if tru.kind == "fixed_gaussian":
        lows.append(tru.mean), highs.append(tru.mean), variances.append(tru.variance)
    else:
        lo, hi = min(lows), max(highs)
        off = tru.offset if tru.shift != "none" else 0.0
        if tru.shift == "decaying":
            off = tru.offset / np.log(3.0)
        lows.append(lo - off), highs.append(hi + off)
        variances.append(tru.variance or ref.variance)
    sd = np.sqrt(max(variances))
    return float(min(lows) - width * sd), float(max(highs) + width * sd)


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------

def glucose_surrogate(x, c, params: GlucoseParams = GlucoseParams()):
    """Negative absolute deviation of post-meal glucose from the target."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    dev = params.isf * (c / params.carb_ratio - x)
    if params.saturation > 0:
        dev = params.saturation * np.tanh(dev / params.saturation)
    o = params.target + dev
    return -np.abs(o - params.target)


def _parse_point(token: str) -> list[float]:
    return [float(v) for v in token.split(",")]


def load_tabular(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read (actions, contexts, f) from a text matrix file.

    Format: '#' comments, one ``contexts:`` header line listing the context
    coordinates, then one row per action: its coordinate followed by the values.
    Multi-dimensional coordinates are comma-separated without spaces.
    """
    contexts, actions, rows = None, [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("contexts:"):
            contexts = [_parse_point(tok) for tok in line.split(":", 1)[1].split()]
            continue
        if contexts is None:
            raise ValueError(f"{path}:{lineno}: data row before the contexts header")
        toks = line.split()
        if len(toks) != len(contexts) + 1:
            raise ValueError(f"{path}:{lineno}: expected {len(contexts) + 1} fields, got {len(toks)}")
        actions.append(_parse_point(toks[0]))
        rows.append([float(v) for v in toks[1:]])
    if contexts is None or not rows:
        raise ValueError(f"{path}: no contexts header or no data rows")
    f = np.array(rows)
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{path}: non-finite objective values")
    return np.array(actions), np.array(contexts), f


def write_tabular(path, actions, contexts, f, header: str = "") -> None:
    def fmt(p):
        return ",".join(f"{v:.10g}" for v in np.atleast_1d(p))

    lines = [f"# {ln}" for ln in header.splitlines()]
    lines.append("contexts: " + " ".join(fmt(c) for c in contexts))
    for a, row in zip(actions, f):
        lines.append(fmt(a) + " " + " ".join(f"{v:.10g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def build_objective(cfg: ObjectiveConfig, grid: GridSpec, kernel: ProductKernel,
                    streams: RngStreams) -> np.ndarray:
    """Objective values on the grid, shaped (n_actions, n_contexts)."""
    shape = (grid.n_actions, grid.n_contexts)
    if cfg.kind == "rkhs_sample":
        rng = streams["objective"] if cfg.seed is None else RngStreams(cfg.seed)["objective"]
        K = kernel.grid_matrix(grid.actions, grid.contexts)
        return rkhs_function(K, cfg.rkhs_norm, cfg.centers, rng).reshape(shape)
    if cfg.kind == "glucose_surrogate":
        if grid.actions.shape[1] != 1 or grid.contexts.shape[1] != 1:
            raise ValueError("glucose surrogate needs one-dimensional doses and carbohydrates")
        return glucose_surrogate(grid.actions[:, :1], grid.contexts[:, 0][None, :], cfg.glucose)
    _, _, f = load_tabular(cfg.path)
    if f.shape != shape:
        raise ValueError(f"tabular objective has shape {f.shape}, grid is {shape}")
    return f


# ---------------------------------------------------------------------------
# per-round randomness
# ---------------------------------------------------------------------------

@dataclass
class EnvironmentTape:
    """Everything the environment draws over a run; independent of the actions taken."""

    w: np.ndarray        # (T, n) reference distributions
    w_star: np.ndarray   # (T, n) true distributions
    eps: np.ndarray      # (T,) MMD between them
    contexts: np.ndarray  # (T,) context indices
    noise: np.ndarray    # (T,) observation noise

    @property
    def horizon(self) -> int:
        return len(self.eps)


def sample_context(w_star: np.ndarray, uniform: float) -> int:
    """Inverse-CDF draw of a context index."""
    cdf = np.cumsum(w_star)
    return int(min(np.searchsorted(cdf, uniform * cdf[-1], side="right"), len(cdf) - 1))


class Environment:
    def __init__(self, config: EnvironmentConfig, grid: GridSpec, metric: MmdMetric,
                 streams: RngStreams):
        self.config = config
        self.grid = grid
        self.metric = metric
        self.streams = streams
        self.observed: list[int] = []
        ref, tru = config.reference, config.truth
        if tru.kind == "fixed_gaussian":
            self._fixed_true = discretized_gaussian(grid.contexts, tru.mean, tru.variance)
        if ref.kind == "fixed_gaussian":
            self._fixed_ref = discretized_gaussian(grid.contexts, ref.mean, ref.variance)

    def round_distributions(self, t: int) -> tuple[np.ndarray, np.ndarray, float]:
        """(w_t, w*_t, eps_t) for round t (1-based). Call once per round, in order."""
        ref, tru = self.config.reference, self.config.truth
        rng = self.streams["environment"]
        n = self.grid.n_contexts
        if ref.kind == "empirical":
            w = empirical_distribution(self.observed, n)
            mean = None
        elif ref.kind == "per_round_gaussian":
            mean = rng.uniform(ref.mean_low, ref.mean_high)
            w = discretized_gaussian(self.grid.contexts, mean, ref.variance)
        else:
            mean = ref.mean
            w = self._fixed_ref
        if tru.kind == "fixed_gaussian":
            w_star = self._fixed_true
        else:
            if tru.shift == "none":
                offset = 0.0
            else:
                scale = tru.offset if tru.shift == "constant_offset" else tru.offset / np.log(t + 2.0)
                offset = rng.uniform(-scale, scale)
            variance = ref.variance if tru.variance is None else tru.variance
            if offset == 0.0 and variance == ref.variance:
                w_star = w
            else:
                w_star = discretized_gaussian(self.grid.contexts, mean + offset, variance)
        return w.copy(), w_star.copy(), self.metric.distance(w, w_star)

    def sample_context_and_observe(self, f: np.ndarray, x: int, w_star: np.ndarray) -> tuple[int, float]:
        c = sample_context(w_star, self.streams["context"].uniform())
        eta = self.streams["noise"].normal(0.0, self.config.noise) if self.config.noise > 0 else 0.0
        self.observed.append(c)
        return c, float(f[x, c] + eta)

    def record_tape(self, horizon: int | None = None) -> EnvironmentTape:
        """Play the environment forward; the tape is shared by every policy run on this seed."""
        T = horizon or self.config.horizon
        n = self.grid.n_contexts
        tape = EnvironmentTape(np.zeros((T, n)), np.zeros((T, n)), np.zeros(T),
                               np.zeros(T, dtype=int), np.zeros(T))
        for t in range(1, T + 1):
            w, w_star, eps = self.round_distributions(t)
            c = sample_context(w_star, self.streams["context"].uniform())
            eta = self.streams["noise"].normal(0.0, self.config.noise) if self.config.noise > 0 else 0.0
            self.observed.append(c)
            tape.w[t - 1], tape.w_star[t - 1], tape.eps[t - 1] = w, w_star, eps
            tape.contexts[t - 1], tape.noise[t - 1] = c, eta
        return tape


def round_distributions(env: Environment, t: int):
    return env.round_distributions(t)


def sample_context_and_observe(env: Environment, f: np.ndarray, x: int, w_star: np.ndarray):
    return env.sample_context_and_observe(f, x, w_star)
