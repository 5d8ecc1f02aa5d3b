"""Experiment configuration: YAML in, validated frozen dataclasses out.

Validation collects every problem it finds instead of stopping at the first one,
and unknown keys are errors. Relative file paths are resolved against the
directory of the config file.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .environment import (
    EnvironmentConfig,
    GlucoseParams,
    ObjectiveConfig,
    ReferenceConfig,
    TrueConfig,
    auto_context_range,
    load_tabular,
)
from .gp import GridSpec
from .kernels import KernelSpec, ProductKernel
from .policies import PolicyConfig, TauRule


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class AxisSpec:
    """Either an explicit list of points or an evenly spaced range."""

    points: tuple | None = None
    start: float = 0.0
    stop: float = 1.0
    num: int = 11

    def values(self) -> np.ndarray:
        if self.points is not None:
            return np.array(self.points, dtype=float)
        return np.linspace(self.start, self.stop, self.num)

    def to_dict(self):
        if self.points is not None:
            return {"points": [list(p) if isinstance(p, (list, tuple)) else p for p in self.points]}
        return {"start": self.start, "stop": self.stop, "num": self.num}


@dataclass(frozen=True)
class GridConfig:
    actions: AxisSpec | None = None
    contexts: AxisSpec | None = None   # None means "auto"
    context_points: int = 32


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    grid: GridConfig
    kernel: ProductKernel
    environment: EnvironmentConfig
    policies: tuple[PolicyConfig, ...]
    tau: TauRule
    seeds: tuple[int, ...] = (0,)
    output: str | None = None
    delta: float = 0.1
    rkhs_bound: float = 1.0
    lam: float = 1.0
    base_dir: str = field(default=".", compare=False)

    @property
    def horizon(self) -> int:
        return self.environment.horizon

    def with_overrides(self, seeds=None, horizon=None) -> "ExperimentConfig":
        cfg = self
        if seeds is not None:
            cfg = replace(cfg, seeds=tuple(seeds))
        if horizon is not None:
            cfg = replace(cfg, environment=replace(cfg.environment, horizon=int(horizon)))
        return cfg

    def build_grid(self) -> GridSpec:
        env = self.environment
        if env.objective.kind == "tabular":
            actions, contexts, _ = load_tabular(env.objective.path)
            return GridSpec(actions, contexts)
        if self.grid.contexts is None:
            lo, hi = auto_context_range(env)
            contexts = np.linspace(lo, hi, self.grid.context_points)
        else:
            contexts = self.grid.contexts.values()
        return GridSpec(self.grid.actions.values(), contexts)

    def to_dict(self) -> dict:
        env = self.environment
        obj = env.objective
        obj_d = {"kind": obj.kind}
        if obj.kind == "rkhs_sample":
            obj_d.update(rkhs_norm=obj.rkhs_norm, centers=obj.centers, seed=obj.seed)
        elif obj.kind == "tabular":
            obj_d["path"] = obj.path
        else:
            obj_d["glucose"] = {"target": obj.glucose.target, "isf": obj.glucose.isf,
                                "carb_ratio": obj.glucose.carb_ratio, "saturation": obj.glucose.saturation}
        ref, tru = env.reference, env.truth
        grid_d = None
        if obj.kind != "tabular":
            grid_d = {"actions": self.grid.actions.to_dict(),
                      "contexts": "auto" if self.grid.contexts is None else self.grid.contexts.to_dict(),
                      "context_points": self.grid.context_points}

        def kern(k):
            return {"kind": k.kind, "lengthscales": list(k.lengthscales), "nu": k.nu}

        def pol(p):
            d = {"kind": p.kind, "label": p.label, "radius": p.radius, "radius_mode": p.radius_mode}
            if p.tau is not None:
                d["tau"] = {"mode": p.tau.mode, "value": p.tau.value}
            return d

        out = {
            "name": self.name,
            "horizon": env.horizon,
            "seeds": list(self.seeds),
            "delta": self.delta,
            "rkhs_bound": self.rkhs_bound,
            "lam": self.lam,
            "output": self.output,
            "kernel": {"action": kern(self.kernel.action), "context": kern(self.kernel.context)},
            "environment": {
                "noise": env.noise,
                "objective": obj_d,
                "reference": {"kind": ref.kind, "mean": ref.mean, "variance": ref.variance,
                              "mean_low": ref.mean_low, "mean_high": ref.mean_high},
                "truth": {"kind": tru.kind, "mean": tru.mean, "variance": tru.variance,
                          "shift": tru.shift, "offset": tru.offset},
            },
            "tau": {"mode": self.tau.mode, "value": self.tau.value},
            "policies": [pol(p) for p in self.policies],
        }
        if grid_d is not None:
            out["grid"] = grid_d
        return out


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_SEED_RANGE = re.compile(r"^\s*(\d+)\s*\.\.\s*(\d+)\s*$")


def parse_seeds(spec) -> tuple[int, ...]:
    """Accepts an int, a list of ints, or an inclusive range string 'a..b'."""
    if isinstance(spec, bool):
        raise ValueError("seeds must be integers")
    if isinstance(spec, int):
        if spec < 0:
            raise ValueError("seeds must be nonnegative")
        return (spec,)
    if isinstance(spec, str):
        m = _SEED_RANGE.match(spec)
        if not m:
            raise ValueError(f"seed range must look like 'a..b', got {spec!r}")
        a, b = int(m.group(1)), int(m.group(2))
        if b < a:
            raise ValueError(f"empty seed range {spec!r}")
        return tuple(range(a, b + 1))
    if isinstance(spec, (list, tuple)) and spec:
        if not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in spec):
            raise ValueError("seed list must hold nonnegative integers")
        if len(set(spec)) != len(spec):
            raise ValueError("seed list has duplicates")
        return tuple(spec)
    raise ValueError(f"cannot interpret seeds {spec!r}")


class _Reader:
    """Pulls typed keys out of a mapping, recording errors under a dotted path."""

    def __init__(self, data, path, errors):
        self.path = path
        self.errors = errors
        self.seen = set()
        if data is None:
            data = {}
        if not isinstance(data, dict):
            errors.append(f"{path or '<root>'}: expected a mapping, got {type(data).__name__}")
            data = {}
        self.data = data

    def _where(self, key):
        return f"{self.path}.{key}" if self.path else key

    def get(self, key, kind, default=None, required=False):
        self.seen.add(key)
        if key not in self.data or self.data[key] is None:
            if required:
                self.errors.append(f"{self._where(key)}: required")
            return default
        val = self.data[key]
        if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
            return float(val)
        if kind is int and isinstance(val, int) and not isinstance(val, bool):
            return val
        if kind in (str, list, dict) and isinstance(val, kind):
            return val
        if kind is bool and isinstance(val, bool):
            return val
        self.errors.append(f"{self._where(key)}: expected {kind.__name__}, got {val!r}")
        return default

    def sub(self, key, required=False):
        self.seen.add(key)
        if required and key not in self.data:
            self.errors.append(f"{self._where(key)}: required")
        return _Reader(self.data.get(key), self._where(key), self.errors)

    def finish(self):
        for key in sorted(set(self.data) - self.seen, key=str):
            self.errors.append(f"{self._where(key)}: unknown key")


def _build(errors, where, factory, **kwargs):
    try:
        return factory(**kwargs)
    except (ValueError, TypeError) as exc:
        errors.append(f"{where}: {exc}")
        return None


def _axis(value, where, errors) -> AxisSpec | None:
    if isinstance(value, list):
        if not value:
            errors.append(f"{where}: empty point list")
            return None
        pts = tuple(tuple(p) if isinstance(p, list) else p for p in value)
        return AxisSpec(points=pts)
    r = _Reader(value, where, errors)
    points = r.get("points", list)
    start = r.get("start", float, 0.0)
    stop = r.get("stop", float, 1.0)
    num = r.get("num", int, 11)
    r.finish()
    if points is not None:
        return _axis(points, where + ".points", errors)
    if num is not None and num < 1:
        errors.append(f"{where}.num: must be positive")
        return None
    return AxisSpec(start=start, stop=stop, num=num)


def _kernel(r: _Reader, errors) -> KernelSpec | None:
    kind = r.get("kind", str, "rbf")
    ls = r.get("lengthscales", list)
    if ls is None:
        single = r.get("lengthscale", float)
        ls = [single] if single is not None else [1.0]
    else:
        r.seen.add("lengthscale")
    nu = r.get("nu", float, 2.5)
    r.finish()
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in ls):
        errors.append(f"{r.path}.lengthscales: expected numbers")
        return None
    return _build(errors, r.path, KernelSpec, kind=kind, lengthscales=tuple(ls), nu=nu)


def _tau(r: _Reader, errors) -> TauRule | None:
    mode = r.get("mode", str, "fixed")
    value = r.get("value", float, 0.0)
    r.finish()
    return _build(errors, r.path, TauRule, mode=mode, value=value)


def parse_config(data, base_dir=".") -> ExperimentConfig:
    errors: list[str] = []
    base = Path(base_dir)
    root = _Reader(data, "", errors)
    if not isinstance(data, dict) or not data:
        raise ConfigError(["<root>: configuration is empty or not a mapping"])

    name = root.get("name", str, "experiment")
    horizon = root.get("horizon", int, required=True)
    delta = root.get("delta", float, 0.1)
    rkhs_bound = root.get("rkhs_bound", float, 1.0)
    lam = root.get("lam", float, 1.0)
    output = root.get("output", str)
    seeds = (0,)
    root.seen.add("seeds")
    if "seeds" in root.data:
        try:
            seeds = parse_seeds(root.data["seeds"])
        except ValueError as exc:
            errors.append(f"seeds: {exc}")
    for key, val, ok in (("delta", delta, delta is not None and 0 < delta < 1),
                         ("rkhs_bound", rkhs_bound, rkhs_bound is not None and rkhs_bound > 0),
                         ("lam", lam, lam is not None and lam > 0)):
        if not ok:
            errors.append(f"{key}: out of range ({val!r})")

    kr = root.sub("kernel")
    ka = _kernel(kr.sub("action"), errors)
    kc = _kernel(kr.sub("context"), errors)
    kr.finish()

    er = root.sub("environment", required=True)
    noise = er.get("noise", float, 0.02)
    orr = er.sub("objective", required=True)
    okind = orr.get("kind", str, "rkhs_sample")
    path = orr.get("path", str)
    if path is not None:
        path = str((base / path).resolve()) if not Path(path).is_absolute() else path
    gr = orr.sub("glucose")
    glucose = _build(errors, gr.path, GlucoseParams,
                     target=gr.get("target", float, 112.5), isf=gr.get("isf", float, 0.5),
                     carb_ratio=gr.get("carb_ratio", float, 1.0),
                     saturation=gr.get("saturation", float, 40.0))
    gr.finish()
    objective = _build(errors, orr.path, ObjectiveConfig, kind=okind,
                       rkhs_norm=orr.get("rkhs_norm", float, rkhs_bound or 1.0),
                       centers=orr.get("centers", int, 20), seed=orr.get("seed", int),
                       path=path, glucose=glucose or GlucoseParams())
    orr.finish()
    rr = er.sub("reference")
    reference = _build(errors, rr.path, ReferenceConfig,
                       kind=rr.get("kind", str, "fixed_gaussian"), mean=rr.get("mean", float, 0.0),
                       variance=rr.get("variance", float, 1.0),
                       mean_low=rr.get("mean_low", float, 0.0), mean_high=rr.get("mean_high", float, 1.0))
    rr.finish()
    tr = er.sub("truth")
    truth = _build(errors, tr.path, TrueConfig,
                   kind=tr.get("kind", str, "fixed_gaussian"), mean=tr.get("mean", float, 0.0),
                   variance=tr.get("variance", float, None if "variance" in tr.data else 1.0),
                   shift=tr.get("shift", str, "none"), offset=tr.get("offset", float, 6.0))
    tr.finish()
    er.finish()
    environment = None
    if objective and reference and truth and horizon is not None and noise is not None:
        environment = _build(errors, "environment", EnvironmentConfig, objective=objective,
                             reference=reference, truth=truth, noise=noise, horizon=horizon)

    grid_r = root.sub("grid")
    actions = contexts = None
    ctx_points = grid_r.get("context_points", int, 32)
    if "actions" in grid_r.data:
        actions = _axis(grid_r.data["actions"], "grid.actions", errors)
    grid_r.seen.add("actions")
    grid_r.seen.add("contexts")
    ctx_raw = grid_r.data.get("contexts", "auto")
    if ctx_raw != "auto":
        contexts = _axis(ctx_raw, "grid.contexts", errors)
    grid_r.finish()
    if okind == "tabular" and grid_r.data:
        errors.append("grid: tabular objectives take their grid from the objective file")
    elif okind != "tabular" and actions is None:
        errors.append("grid.actions: required")
    if ctx_points is not None and ctx_points < 2:
        errors.append("grid.context_points: must be at least 2")

    tau = _tau(root.sub("tau", required=True), errors)

    policies = []
    raw_pol = root.get("policies", list, required=True) or []
    if not raw_pol and "policies" in root.data:
        errors.append("policies: at least one policy is required")
    for i, item in enumerate(raw_pol):
        pr = _Reader(item, f"policies[{i}]", errors)
        ptau = _tau(pr.sub("tau"), errors) if "tau" in pr.data else None
        pr.seen.add("tau")
        p = _build(errors, pr.path, PolicyConfig, kind=pr.get("kind", str, required=True) or "",
                   label=pr.get("label", str, ""), radius=pr.get("radius", float, 0.0),
                   radius_mode=pr.get("radius_mode", str, "fixed"), tau=ptau)
        pr.finish()
        if p is not None:
            policies.append(p)

    sweep = root.get("sweep_tau", list)
    if sweep is not None:
        rules = []
        for i, item in enumerate(sweep):
            rule = _tau(_Reader(item, f"sweep_tau[{i}]", errors), errors)
            if rule is not None:
                rules.append(rule)
        policies = [replace(p, tau=rule, label=f"{p.label}_tau{rule.value:g}")
                    for rule in rules for p in policies]
    labels = [p.label for p in policies]
    dup = sorted({lbl for lbl in labels if labels.count(lbl) > 1})
    if dup:
        errors.append(f"policies: duplicate labels {dup}")
    for lbl in labels:
        if not re.fullmatch(r"[A-Za-z0-9_.\-]+", lbl):
            errors.append(f"policies: label {lbl!r} is not a safe directory name")
    root.finish()

    if errors:
        raise ConfigError(errors)
    cfg = ExperimentConfig(
        name=name, grid=GridConfig(actions, contexts, ctx_points),
        kernel=ProductKernel(ka, kc), environment=environment, policies=tuple(policies),
        tau=tau, seeds=seeds, output=output, delta=delta, rkhs_bound=rkhs_bound, lam=lam,
        base_dir=str(base),
    )
    try:
        cfg.build_grid()
    except (ValueError, OSError) as exc:
        raise ConfigError([f"grid: {exc}"]) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: YAML syntax error: {exc}"]) from None
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from None
    return parse_config(data, base_dir=path.parent)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)
